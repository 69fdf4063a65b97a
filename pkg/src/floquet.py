"""
Floquet Covariance
------------------
Steady-state variance harmonics of the periodically modulated fluctuation
dynamics. The Fourier components R(n)(omega) of the quadratures obey the
block-tridiagonal system

    M(+1) R(n-1) + [i(omega + n Omega) I + M(0)] R(n) + M(-1) R(n+1) = -delta_n0 N(omega)

truncated to zones n = -N..N. With T = P^-1 the variance harmonics are

    V(l)_ii = 1/(2 pi) int  sum_m  [T(omega) C T^T(-omega)]_{(m,i),(l-m,i)} domega

Only the zone-0 columns of T are needed. Since M(-1) = conj(M(+1)),
T(-omega) is the zone-reversed conjugate of T(omega), so only omega >= 0 is solved.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import FloquetConfig, DEFAULTS
from debug import DEBUG
from drift import DriftHarmonics, NoiseMatrices
from errors import ConfigError, QuadratureNotConverged, Unstable
from steadystate import stability

DIM = 6
VACUUM = 0.5


def assemble_p(harmonics: DriftHarmonics, omega: float, Omega: float, N: int) -> np.ndarray:
    """Block-tridiagonal P(omega) over zones -N..N"""
    zones = 2 * N + 1
    P = np.zeros((zones * DIM, zones * DIM), dtype=complex)
    eye = np.eye(DIM)
    for idx, n in enumerate(range(-N, N + 1)):
        row = slice(DIM * idx, DIM * (idx + 1))
        P[row, row] = 1j * (omega + n * Omega) * eye + harmonics.m0
        if idx > 0:
            P[row, DIM * (idx - 1):DIM * idx] = harmonics.m_plus1
        if idx < zones - 1:
            P[row, DIM * (idx + 1):DIM * (idx + 2)] = harmonics.m_minus1
    return P


@dataclass
class FloquetOperator:
    harmonics: DriftHarmonics
    Omega: float
    n_zones: int = 2
    omega_grid: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        self.base = assemble_p(self.harmonics, 0.0, self.Omega, self.n_zones)
        self._rhs = np.zeros((self.block_dim, DIM), dtype=complex)
        self._rhs[DIM * self.n_zones:DIM * (self.n_zones + 1)] = np.eye(DIM)

    @property
    def block_dim(self) -> int:
        return DIM * (2 * self.n_zones + 1)

    @property
    def zones(self) -> int:
        return 2 * self.n_zones + 1

    def at(self, omega: float) -> np.ndarray:
        return self.base + 1j * omega * np.eye(self.block_dim)

    def poles(self):
        """Real positions and half-widths of the resonances of P(omega)^-1"""
        mu = np.linalg.eigvals(self.base)
        return -mu.imag, np.abs(mu.real)

    def zone_columns(self, omegas, chunk: int = 512) -> np.ndarray:
        """T(omega)[:, zone 0] for each omega, shaped (K, zones, 6, 6)"""
        omegas = np.asarray(omegas, dtype=float)
        out = np.empty((omegas.size, self.zones, DIM, DIM), dtype=complex)
        eye = np.eye(self.block_dim)
        for start in range(0, omegas.size, chunk):
            w = omegas[start:start + chunk]
            batch = self.base[None] + 1j * w[:, None, None] * eye
            cols = np.linalg.solve(batch, np.broadcast_to(self._rhs, (w.size,) + self._rhs.shape))
            out[start:start + w.size] = cols.reshape(w.size, self.zones, DIM, DIM)
        return out


@dataclass(frozen=True)
class FloquetCovariance:
    v0: np.ndarray
    v1: np.ndarray
    convergence: float
    n_zones: int
    Omega: float
    v2: Optional[np.ndarray] = None
    nodes: int = 0

    @property
    def v_min(self) -> np.ndarray:
        return self.v0 - 2.0 * np.abs(self.v1)

    @property
    def squeezing_db(self) -> np.ndarray:
        v_min = self.v_min
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(v_min > 0, -10.0 * np.log10(v_min / VACUUM), np.nan)

    def harmonic(self, ell: int) -> Optional[np.ndarray]:
        return {0: self.v0, 1: self.v1, 2: self.v2}.get(ell)


def frequency_grid(op: FloquetOperator, kappa: float, cfg: FloquetConfig = DEFAULTS.floquet,
                   halve: bool = False):
    """Gauss-Legendre nodes and weights covering omega in [0, inf).

    Uniform panels of width <= panel_fraction*kappa on [0, W], geometrically
    graded panels around every narrow resonance, and the tail [W, inf)
    mapped onto u in (0, 1] through omega = W/u.
    """
    W = (op.n_zones + 1) * op.Omega + 20.0 * kappa
    width = cfg.panel_fraction * kappa
    breaks = [np.linspace(0.0, W, int(np.ceil(W / width)) + 1)]

    centers, half_widths = op.poles()
    for c, hw in zip(np.abs(centers), half_widths):
        if hw >= kappa / 8 or c > W or hw == 0:
            continue
        offsets, step = [0.0], hw / 2
        while step < width:
            offsets.append(offsets[-1] + step)
            step *= cfg.grading_ratio
        offsets = np.array(offsets)
        breaks += [c + offsets, c - offsets]
    breaks = np.unique(np.clip(np.concatenate(breaks), 0.0, W))
    if halve:
        mids = (breaks[:-1] + breaks[1:]) / 2
        breaks = np.sort(np.concatenate([breaks, mids]))

    x, w = leggauss(cfg.gl_order)
    a, b = breaks[:-1], breaks[1:]
    half = ((b - a) / 2)[:, None]
    nodes = (half * x + ((a + b) / 2)[:, None]).ravel()
    weights = (half * w).ravel()

    xt, wt = leggauss(cfg.tail_nodes * (2 if halve else 1))
    u = (xt + 1) / 2
    tail_nodes = W / u
    tail_weights = (wt / 2) * W / u ** 2
    return np.concatenate([nodes, tail_nodes]), np.concatenate([weights, tail_weights])


def _density(Xa, Xb, c_mat, ell, N):
    """sum_m [X(w) C X(-w)^T]_{(m,i),(l-m,i)} with Xa = X(w), Xb = X(-w)"""
    Y = Xa @ c_mat
    out = np.zeros(Xa.shape[:1] + (DIM,), dtype=complex)
    for m in range(-N, N + 1):
        k = ell - m
        if abs(k) <= N:
            out += np.sum(Y[:, m + N] * Xb[:, k + N], axis=-1)
    return out


def _integrate(op: FloquetOperator, c_mat, nodes, weights, l_max):
    Xp = op.zone_columns(nodes)
    Xm = np.conj(Xp[:, ::-1])
    N = op.n_zones
    harmonics = {}
    for ell in range(l_max + 1):
        f = _density(Xp, Xm, c_mat, ell, N) + _density(Xm, Xp, c_mat, ell, N)
        harmonics[ell] = weights @ f / (2 * np.pi)
    return harmonics


def floquet_covariance(harmonics: DriftHarmonics, noise: NoiseMatrices, Omega: float,
                       N: int = None, quadrature_cfg: FloquetConfig = DEFAULTS.floquet,
                       kappa: float = None, l_max: int = None) -> FloquetCovariance:
    """Variance harmonics V(0), V(1) (and V(2) when l_max = 2) of all six quadratures.

    kappa sets the panel scale; when omitted it is read from the cavity block
    of M(0).
    """
    cfg = quadrature_cfg
    N = cfg.n_zones if N is None else N
    l_max = cfg.l_max if l_max is None else l_max
    if harmonics.modulated and N < 1:
        raise ConfigError("a modulated drift needs at least one Floquet zone on each side")
    stable, eigvals = stability(harmonics.m0)
    if not stable:
        raise Unstable("M(0) has eigenvalues with non-negative real part",
                       max_real=float(np.max(eigvals.real)))
    if kappa is None:
        kappa = -2.0 * harmonics.m0[0, 0]

    op = FloquetOperator(harmonics, Omega, N)
    nodes, weights = frequency_grid(op, kappa, cfg)
    op.omega_grid = (nodes, weights)
    result = _integrate(op, noise.c_mat, nodes, weights, l_max)
    rel_change = 0.0
    if cfg.richardson:
        fine_nodes, fine_weights = frequency_grid(op, kappa, cfg, halve=True)
        fine = _integrate(op, noise.c_mat, fine_nodes, fine_weights, l_max)
        v0_coarse, v0_fine = np.real(result[0]), np.real(fine[0])
        rel_change = float(np.max(np.abs(v0_fine - v0_coarse) / np.maximum(np.abs(v0_fine), 1e-300)))
        DEBUG.log(f"floquet: {nodes.size} nodes, halved-panel change {rel_change:.3e}")
        if rel_change > cfg.rel_tol:
            raise QuadratureNotConverged(
                f"halving the panels changed V(0) by {rel_change:.3e} (> {cfg.rel_tol:g})",
                rel_change=rel_change)
        result = fine
        nodes = fine_nodes

    v0 = result[0]
    assert np.max(np.abs(v0.imag)) <= 1e-8 * max(1.0, float(np.max(np.abs(v0.real)))), \
        "V(0) diagonal must be real"
    return FloquetCovariance(v0=np.real(v0), v1=result[1], v2=result.get(2),
                             convergence=rel_change, n_zones=N, Omega=Omega, nodes=int(nodes.size))


def reconstruct_variance(fc: FloquetCovariance, Omega: float, times, l_max: int = None) -> np.ndarray:
    """V_ii(t) = V(0) + sum_l 2 Re[V(l) e^{-i l Omega t}], shape (len(times), 6)"""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    top = 2 if fc.v2 is not None else 1
    top = top if l_max is None else min(top, l_max)
    v = np.tile(fc.v0, (times.size, 1))
    for ell in range(1, top + 1):
        phase = np.exp(-1j * ell * Omega * times)[:, None]
        v += 2.0 * np.real(fc.harmonic(ell)[None, :] * phase)
    return v
