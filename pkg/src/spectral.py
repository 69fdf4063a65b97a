"""
Spectral Analysis
-----------------
Eigenvalue loci of M(0), exceptional point (EP) location in the
(|mu|, loop phase) plane, and exceptional surfaces traced by continuation.

Coordinates used by the search:
- u   = |mu| / (gamma1 + gamma2)
- phi = loop phase, placed on phi_mu
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize

from classical import solve_classical
from config import ClassicalConfig, SearchConfig, DEFAULTS
from core import run_nodes
from debug import DEBUG
from drift import build_drift
from errors import NotFound, NumericalError
from params import (SystemParams, derive, with_loop_phase, with_mu_over_gamma_sum)

TWO_PI = 2.0 * np.pi
SURFACE_AXES = ('kappa', 'power', 'gamma', 'g1', 'g2', 'delta')
# objective value reported for candidates whose classical state cannot be found
_PENALTY = 10.0


@dataclass(frozen=True)
class EigenLoci:
    phi_samples: np.ndarray
    eigvals_per_phi: np.ndarray      # (len(phi), 3) upper half-plane eigenvalues, tracked


@dataclass(frozen=True)
class EpPoint:
    mu_mag: float
    mu_over_gamma_sum: float
    phi: float
    chirality: str
    branch: str
    residual: float
    omega_ep: float
    overlap: float
    eigenvalue: complex = 0j

    def to_dict(self) -> dict:
        return {
            'mu_mag_rad_s': float(self.mu_mag),
            'mu_over_gamma_sum': float(self.mu_over_gamma_sum),
            'phi_rad': float(self.phi),
            'phi_over_pi': float(self.phi / np.pi),
            'chirality': self.chirality,
            'branch': self.branch,
            'residual': float(self.residual),
            'omega_ep_over_omega_m': float(self.omega_ep),
            'overlap': float(self.overlap),
            'eigenvalue_rad_s': [float(np.real(self.eigenvalue)), float(np.imag(self.eigenvalue))],
        }


@dataclass(frozen=True)
class EpSurface:
    axis1: Tuple[str, np.ndarray]
    axis2: Tuple[str, np.ndarray]
    ep_points: Dict[Tuple[int, int], List[EpPoint]]
    gaps: List[Tuple[int, int, str]] = field(default_factory=list)

    def sheet(self, branch: str) -> np.ndarray:
        """|mu_EP|/(gamma1+gamma2) on the grid, NaN where the branch has no EP"""
        out = np.full((len(self.axis1[1]), len(self.axis2[1])), np.nan)
        for (i, j), points in self.ep_points.items():
            for p in points:
                if p.branch == branch:
                    out[i, j] = p.mu_over_gamma_sum
        return out


def _upper_order(eigvals: np.ndarray) -> np.ndarray:
    # a real 6x6 drift has exactly three eigenvalues above the real axis
    return np.argsort(eigvals.imag, kind='stable')[::-1][:3]


def _pairs(eigvals, vectors, omega_m, branch=None):
    order = _upper_order(eigvals)
    lam = eigvals[order]
    vec = vectors[:, order]
    vec = vec / np.linalg.norm(vec, axis=0)
    for i in range(3):
        for j in range(i + 1, 3):
            centre = 0.5 * (lam[i].imag + lam[j].imag)
            if branch == 'upper' and centre <= omega_m:
                continue
            if branch == 'lower' and centre > omega_m:
                continue
            overlap = abs(np.vdot(vec[:, i], vec[:, j]))
            measure = abs(lam[i] - lam[j]) / omega_m + (1.0 - overlap)
            yield measure, overlap, 0.5 * (lam[i] + lam[j])


def coalescence_measure(m0: np.ndarray, omega_m: float, branch: str = None) -> float:
    """min over upper half-plane pairs of |l_i - l_j|/omega_m + (1 - |<v_i, v_j>|)"""
    if not omega_m > 0:
        raise ValueError(f"omega_m must be positive, got {omega_m!r}")
    eigvals, vectors = np.linalg.eig(m0)
    values = [m for m, _, _ in _pairs(eigvals, vectors, omega_m, branch)]
    return float(min(values)) if values else _PENALTY


def _closest_pair(m0, omega_m, branch=None):
    eigvals, vectors = np.linalg.eig(m0)
    candidates = list(_pairs(eigvals, vectors, omega_m, branch))
    if not candidates:
        return _PENALTY, 0.0, 0j
    return min(candidates, key=lambda c: c[0])


class EpObjective:
    """Coalescence measure as a function of (u, phi), re-solving the classical
    state at every candidate and warm-starting from the last solution"""

    def __init__(self, params: SystemParams, branch: str = None,
                 classical_cfg: ClassicalConfig = DEFAULTS.classical):
        self.params = params
        self.branch = branch
        self.classical_cfg = classical_cfg
        self.guess = None
        self.evaluations = 0

    def point(self, u: float, phi: float) -> SystemParams:
        return with_loop_phase(with_mu_over_gamma_sum(self.params, u), phi)

    def drift(self, u: float, phi: float) -> np.ndarray:
        p = self.point(u, phi)
        derived = derive(p)
        state = solve_classical(p, derived, self.classical_cfg, initial=self.guess)
        self.guess = state.as_vector()
        return build_drift(p, derived, state).m0

    def details(self, u: float, phi: float):
        return _closest_pair(self.drift(u, phi), self.params.omega_m, self.branch)

    def __call__(self, u: float, phi: float) -> float:
        self.evaluations += 1
        try:
            m0 = self.drift(u, phi)
        except NumericalError:
            self.guess = None
            return _PENALTY
        return _closest_pair(m0, self.params.omega_m, self.branch)[0]


def eigen_loci(params: SystemParams, phi_grid: Sequence[float],
               classical_cfg: ClassicalConfig = DEFAULTS.classical) -> EigenLoci:
    """Upper half-plane eigenvalues of M(0) along a loop-phase sweep.

    Phases in (pi, 2 pi) retrace the [0, pi] loci and are evaluated at 2 pi - phi.
    Eigenvalues are matched between neighbouring samples by minimum total
    distance so each column follows one branch.
    """
    objective = EpObjective(params, classical_cfg=classical_cfg)
    phi_grid = np.asarray(phi_grid, dtype=float)
    u = params.mu_mag / params.gamma_sum
    loci = np.zeros((phi_grid.size, 3), dtype=complex)
    previous = None
    for k, phi in enumerate(phi_grid):
        phi_eff = np.mod(phi, TWO_PI)
        if phi_eff > np.pi:
            phi_eff = TWO_PI - phi_eff
        eigvals = np.linalg.eigvals(objective.drift(u, phi_eff))
        top = eigvals[_upper_order(eigvals)]
        if previous is None:
            top = top[np.argsort(top.imag)]
        else:
            cost = np.abs(previous[:, None] - top[None, :])
            _, cols = linear_sum_assignment(cost)
            top = top[cols]
        loci[k] = top
        previous = top
    return EigenLoci(phi_samples=phi_grid, eigvals_per_phi=loci)


def _to_unit(x, box):
    return (x - box[0]) / (box[1] - box[0])


def _from_unit(s, box):
    return box[0] + s * (box[1] - box[0])


def _grid_scan(objective: EpObjective, mu_box, phi_box, n: int):
    """Best (u, phi) of an n x n scan; rows are swept in alternating order so
    consecutive classical solves stay close"""
    us = np.linspace(mu_box[0], mu_box[1], n)
    phis = np.linspace(phi_box[0], phi_box[1], n)
    best = (np.inf, us[0], phis[0])
    for i, u in enumerate(us):
        row = phis if i % 2 == 0 else phis[::-1]
        for phi in row:
            value = objective(u, phi)
            if value < best[0]:
                best = (value, u, phi)
    DEBUG.log(f"EP scan: best measure {best[0]:.3e} at u={best[1]:.4g}, phi={best[2]:.4g}")
    return best[1], best[2]


def _refine(objective: EpObjective, start, mu_box, phi_box, cfg: SearchConfig, step: float):
    boxes = (mu_box, phi_box)
    s0 = np.array([_to_unit(start[0], mu_box), _to_unit(start[1], phi_box)])
    monitor = DEBUG.monitor('ep_search', 100)

    def f(s):
        value = objective(_from_unit(s[0], mu_box), _from_unit(s[1], phi_box))
        monitor.update(value)
        return value

    result = None
    for attempt in range(2):
        simplex = np.array([s0, s0 + [step, 0.0], s0 + [0.0, step]])
        simplex = np.clip(simplex, 0.0, 1.0)
        result = minimize(f, s0, method='Nelder-Mead', bounds=[(0.0, 1.0), (0.0, 1.0)],
                          options={'xatol': cfg.xatol, 'fatol': cfg.fatol,
                                   'maxfev': cfg.max_evals, 'initial_simplex': simplex})
        s0 = result.x
        step = step / 4
    u, phi = (_from_unit(result.x[k], boxes[k]) for k in range(2))
    return u, phi, float(result.fun)


def find_ep(params: SystemParams, search_box=None, branch_hint: str = None,
            cfg: SearchConfig = DEFAULTS.search, classical_cfg: ClassicalConfig = DEFAULTS.classical,
            start: Tuple[float, float] = None) -> EpPoint:
    """Locate one second-order EP inside search_box = ((u_lo, u_hi), (phi_lo, phi_hi)).

    A coarse scan of the box seeds a Nelder-Mead refinement (restarted once);
    with `start` the scan is skipped. Raises NotFound when the refined
    coalescence measure stays above cfg.accept.
    """
    mu_box, phi_box = search_box if search_box is not None else (cfg.mu_box, cfg.phi_box)
    mu_box, phi_box = tuple(map(float, mu_box)), tuple(map(float, phi_box))
    branch = branch_hint if branch_hint is not None else cfg.branch
    objective = EpObjective(params, branch, classical_cfg)

    if start is None:
        start = _grid_scan(objective, mu_box, phi_box, cfg.grid)
        step = 2.0 / cfg.grid
    else:
        step = 0.02
    u, phi, measure = _refine(objective, start, mu_box, phi_box, cfg, step)
    if not measure <= cfg.accept:
        raise NotFound(f"no EP in |mu|/(g1+g2) {mu_box}, phi {phi_box} "
                       f"(best measure {measure:.3e})", best_measure=measure)

    measure, overlap, eigenvalue = objective.details(u, phi)
    omega_ep = eigenvalue.imag / params.omega_m
    point = EpPoint(
        mu_mag=u * params.gamma_sum,
        mu_over_gamma_sum=u,
        phi=phi,
        chirality='clockwise' if np.mod(phi, TWO_PI) < np.pi else 'counterclockwise',
        branch='upper' if omega_ep > 1.0 else 'lower',
        residual=float(measure),
        omega_ep=float(omega_ep),
        overlap=float(overlap),
        eigenvalue=complex(eigenvalue),
    )
    DEBUG.info(f"EP found: |mu|/(g1+g2)={u:.6g}, phi/pi={phi / np.pi:.6g}, "
               f"omega/omega_m={omega_ep:.5f}, measure={measure:.2e} "
               f"after {objective.evaluations} evaluations")
    return point


def find_ep_pair(params: SystemParams, mu_box=None, branch_hint: str = None,
                 cfg: SearchConfig = DEFAULTS.search,
                 classical_cfg: ClassicalConfig = DEFAULTS.classical) -> Tuple[EpPoint, EpPoint]:
    """Clockwise (phi < pi) and counterclockwise (phi > pi) EPs of one branch"""
    mu_box = cfg.mu_box if mu_box is None else mu_box
    cw = find_ep(params, (mu_box, (0.0, np.pi)), branch_hint, cfg, classical_cfg)
    ccw = find_ep(params, (mu_box, (np.pi, TWO_PI)), branch_hint, cfg, classical_cfg)
    return cw, ccw


@dataclass(frozen=True)
class SurfaceAxis:
    """Swept parameter; values are factors on the base value (delta: units of omega_m)"""
    name: str
    values: np.ndarray

    def __post_init__(self):
        if self.name not in SURFACE_AXES:
            raise ValueError(f"surface axis must be one of {SURFACE_AXES}, got {self.name!r}")


def apply_axis(params: SystemParams, name: str, value: float) -> SystemParams:
    """Scale one parameter of the base set by `value`"""
    if name == 'kappa':
        return replace(params, kappa=params.kappa * value)
    if name == 'power':
        return replace(params, power=params.power * value)
    if name == 'gamma':
        return replace(params, gamma1=params.gamma1 * value, gamma2=params.gamma2 * value)
    if name == 'g1':
        return replace(params, g1_mag=params.g1_mag * value)
    if name == 'g2':
        return replace(params, g2_mag=params.g2_mag * value)
    if name == 'delta':
        return replace(params, delta=params.omega_m * value)
    raise ValueError(f"unknown surface axis {name!r}")


# wide fallback box for nodes without a usable neighbour
SURFACE_FALLBACK_BOX = (20.0, 120.0)


def _trace_row(task):
    """One surface row; nodes within the row are warm-started left to right"""
    params, i, axis1, value1, axis2, values2, branches, cfg, classical_cfg = task
    row_params = apply_axis(params, axis1, value1)
    found, gaps = {}, []
    previous = {b: None for b in branches}
    coarse = replace(cfg, grid=max(8, cfg.grid // 4))
    for j, value2 in enumerate(values2):
        node = apply_axis(row_params, axis2, value2)
        points = []
        for branch in branches:
            box = (SURFACE_FALLBACK_BOX, (0.0, np.pi))
            point = None
            if previous[branch] is not None:
                try:
                    point = find_ep(node, box, branch, cfg, classical_cfg, start=previous[branch])
                except NotFound:
                    point = None
            if point is None:
                try:
                    point = find_ep(node, box, branch, coarse, classical_cfg)
                except NotFound as exc:
                    gaps.append((i, j, f"{branch}: {exc}"))
                    previous[branch] = None
                    continue
            previous[branch] = (point.mu_over_gamma_sum, point.phi)
            points.append(point)
        if points:
            found[(i, j)] = points
    return found, gaps


def trace_surface(params: SystemParams, axis1: SurfaceAxis, axis2: SurfaceAxis,
                  branches=('upper', 'lower'), cfg: SearchConfig = DEFAULTS.search,
                  classical_cfg: ClassicalConfig = DEFAULTS.classical,
                  workers: int = 1) -> EpSurface:
    """EPs of each branch over the axis1 x axis2 grid. NotFound nodes become gaps"""
    tasks = [(params, i, axis1.name, float(v1), axis2.name, np.asarray(axis2.values, dtype=float),
              tuple(branches), cfg, classical_cfg) for i, v1 in enumerate(axis1.values)]
    ep_points, gaps = {}, []
    for found, row_gaps in run_nodes(_trace_row, tasks, workers):
        ep_points.update(found)
        gaps.extend(row_gaps)
    return EpSurface(axis1=(axis1.name, np.asarray(axis1.values, dtype=float)),
                     axis2=(axis2.name, np.asarray(axis2.values, dtype=float)),
                     ep_points=ep_points, gaps=gaps)
