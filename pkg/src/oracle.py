"""
Time-Domain Reference
---------------------
Brute-force fixed-step RK4 integration of

- the nonlinear mean-field equations of the three mode amplitudes, and
- the symmetrized covariance equation dV/dt = M(t) V + V M(t)^T + D.

Shares nothing with the stationary or Floquet solvers beyond drift assembly.
Whole modulation periods are advanced with the one-period RK4 propagator
raised to a power (repeated squaring), which equals stepping up to round-off.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config import OracleConfig, DEFAULTS
from debug import DEBUG
from drift import DriftHarmonics, drift_at
from errors import BlowUp, ConfigError, NonConvergence
from params import SystemParams, DerivedParams, drive_amplitude


@dataclass(frozen=True)
class OdeTrajectory:
    times: np.ndarray
    covariances: Optional[np.ndarray] = None       # (K, 6, 6)
    classical_means: Optional[np.ndarray] = None   # (K, 3) complex: a, b1, b2
    harmonics: Optional[Dict[int, np.ndarray]] = None

    @property
    def final(self) -> np.ndarray:
        return self.covariances[-1]


def mean_field_rhs(params: SystemParams, derived: DerivedParams, t: float, y: np.ndarray) -> np.ndarray:
    """d(a, b1, b2)/dt; y has shape (3,) or (3, k) for k trajectories at once"""
    a, b1, b2 = y
    g1, g2, mu = params.g1, params.g2, params.mu
    eps = drive_amplitude(params, derived, t)
    shift = g1 * np.conj(b1) + np.conj(g1) * b1 + g2 * np.conj(b2) + np.conj(g2) * b2
    photons = np.abs(a) ** 2
    da = (-1j * params.delta - params.kappa / 2) * a + np.sqrt(params.eta * params.kappa) * eps \
        + 1j * a * shift
    db1 = (-1j * params.omega_m - params.gamma1 / 2) * b1 + 1j * mu * b2 + 1j * g1 * photons
    db2 = (-1j * params.omega_m - params.gamma2 / 2) * b2 + 1j * np.conj(mu) * b1 + 1j * g2 * photons
    return np.array([da, db1, db2])


def _rk4(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_grid(Omega: float, dt: float, kappa: float):
    """Steps per period and the matching step; dt is rounded so a period is whole"""
    if Omega > 0:
        period = 2 * np.pi / Omega
        limit = min(period, 1.0 / kappa) / 50
    else:
        limit = 1.0 / (50 * kappa)
        period = 200 * (dt if dt else limit)
    if dt is None:
        dt = min(period / 200, limit) if Omega > 0 else limit
    if dt > limit * (1 + 1e-12):
        raise ConfigError(f"time step {dt:.3e} s exceeds min(2 pi/Omega, 1/kappa)/50 = {limit:.3e} s")
    steps = max(1, int(np.ceil(period / dt - 1e-9)))
    return period, steps, period / steps


def _cavity_guess(params, derived):
    a = np.sqrt(params.eta * params.kappa) * derived.eps0 / (1j * params.delta + params.kappa / 2)
    return np.array([a, 0.0, 0.0], dtype=complex)


def _project(times, means, Omega):
    """Harmonics 0, +-1 of samples spanning exactly one period"""
    if Omega <= 0:
        return {0: means.mean(axis=0), 1: np.zeros(3, complex), -1: np.zeros(3, complex)}
    return {h: np.mean(means * np.exp(1j * h * Omega * times)[:, None], axis=0) for h in (-1, 0, 1)}


def _integrate_means(params, derived, y0, t0, steps, dt, blowup, record=False):
    f = lambda t, y: mean_field_rhs(params, derived, t, y)
    y = np.array(y0, dtype=complex)
    samples = [y.copy()] if record else None
    for k in range(steps):
        y = _rk4(f, t0 + k * dt, y, dt)
        if record:
            samples.append(y.copy())
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > blowup:
        raise BlowUp("mean-field amplitudes diverged", time=t0 + steps * dt)
    return (y, np.array(samples)) if record else y


def propagate_classical(params: SystemParams, derived: DerivedParams, t_end: float,
                        dt: float = None, y0=None, cfg: OracleConfig = DEFAULTS.oracle) -> OdeTrajectory:
    """Integrate the mean-field equations from y0 (default: bare driven cavity) to t_end.

    Samples cover the final modulation period, from which harmonics 0, +-1 are
    projected.
    """
    period, steps, dt = _step_grid(params.Omega_mod, dt, params.kappa)
    y = _cavity_guess(params, derived) if y0 is None else np.asarray(y0, dtype=complex)
    periods = max(1, int(round(t_end / period)))
    chunk = 64
    done = 0
    while done < periods - 1:
        n = min(chunk, periods - 1 - done)
        y = _integrate_means(params, derived, y, done * period, n * steps, dt, cfg.blowup)
        done += n
    t0 = done * period
    _, samples = _integrate_means(params, derived, y, t0, steps, dt, cfg.blowup, record=True)
    times = t0 + dt * np.arange(steps + 1)
    return OdeTrajectory(times=times, classical_means=samples,
                         harmonics=_project(times[:-1], samples[:-1], params.Omega_mod))


def periodic_orbit(params: SystemParams, derived: DerivedParams, dt: float = None,
                   y0=None, cfg: OracleConfig = DEFAULTS.oracle) -> OdeTrajectory:
    """Periodic steady state by shooting: Newton on y -> Phi_T(y) - y over the
    six real components, finite-difference Jacobian evaluated in one batch"""
    period, steps, dt = _step_grid(params.Omega_mod, dt, params.kappa)
    y = _cavity_guess(params, derived) if y0 is None else np.asarray(y0, dtype=complex)

    def one_period(Y):
        return _integrate_means(params, derived, Y, 0.0, steps, dt, cfg.blowup)

    def to_real(z):
        return np.concatenate([z.real, z.imag])

    def to_complex(r):
        return r[:3] + 1j * r[3:]

    x = to_real(y)
    for iteration in range(cfg.shooting_max_iter):
        h = 1e-7 * (1.0 + np.abs(x))
        columns = np.column_stack([x] + [x + h[k] * np.eye(6)[k] for k in range(6)])
        mapped = one_period(to_complex(columns))
        mapped = np.concatenate([mapped.real, mapped.imag])
        defect = mapped[:, 0] - x
        J = (mapped[:, 1:] - mapped[:, [0]]) / h - np.eye(6)
        step = np.linalg.solve(J, -defect)
        x = x + step
        rel = float(np.max(np.abs(step) / (1.0 + np.abs(x))))
        DEBUG.log(f"shooting iteration {iteration}: step {rel:.3e}")
        if rel < cfg.shooting_tol:
            break
    else:
        raise NonConvergence("shooting did not reach a periodic orbit", best_residual=rel,
                             iterations=cfg.shooting_max_iter)
    _, samples = _integrate_means(params, derived, to_complex(x), 0.0, steps, dt, cfg.blowup,
                                  record=True)
    times = dt * np.arange(steps + 1)
    return OdeTrajectory(times=times, classical_means=samples,
                         harmonics=_project(times[:-1], samples[:-1], params.Omega_mod))


def _generator(harmonics: DriftHarmonics, Omega: float, d_vec: np.ndarray, t: float) -> np.ndarray:
    """37x37 generator of d[vec V; 1]/dt (row-major vec)"""
    m = drift_at(harmonics, Omega, t)
    eye = np.eye(6)
    B = np.zeros((37, 37))
    B[:36, :36] = np.kron(m, eye) + np.kron(eye, m)
    B[:36, 36] = d_vec
    return B


def _step_matrix(harmonics, Omega, d_vec, t, dt):
    """RK4 step of a linear ODE as a matrix"""
    f = lambda s, Z: _generator(harmonics, Omega, d_vec, s) @ Z
    return _rk4(f, t, np.eye(37), dt)


def propagate_covariance(harmonics: DriftHarmonics, d_mat: np.ndarray, v0_init: np.ndarray,
                         t_end: float, dt: float = None, kappa: float = None,
                         cfg: OracleConfig = DEFAULTS.oracle) -> OdeTrajectory:
    """V(t) from V(0) = v0_init; samples cover the last two periods before t_end"""
    Omega = harmonics.Omega if harmonics.modulated else 0.0
    kappa = -2.0 * harmonics.m0[0, 0] if kappa is None else kappa
    period, steps, dt = _step_grid(Omega, dt, kappa)
    d_vec = np.asarray(d_mat, dtype=float).reshape(-1)

    step_mats = [_step_matrix(harmonics, Omega, d_vec, k * dt, dt) for k in range(steps)]
    one_period = np.eye(37)
    for S in step_mats:
        one_period = S @ one_period

    periods = max(2, int(round(t_end / period)))
    z = np.concatenate([np.asarray(v0_init, dtype=float).reshape(-1), [1.0]])
    z = np.linalg.matrix_power(one_period, periods - 2) @ z
    if not np.all(np.isfinite(z)) or np.max(np.abs(z[:36])) > cfg.blowup:
        raise BlowUp("covariance diverged", time=(periods - 2) * period)

    samples = [z[:36].reshape(6, 6)]
    for _ in range(2):
        for S in step_mats:
            z = S @ z
            samples.append(z[:36].reshape(6, 6))
    covariances = np.array(samples)
    if np.max(np.abs(covariances)) > cfg.blowup:
        raise BlowUp("covariance diverged", time=periods * period)
    covariances = (covariances + covariances.transpose(0, 2, 1)) / 2
    times = (periods - 2) * period + dt * np.arange(2 * steps + 1)
    return OdeTrajectory(times=times, covariances=covariances)


def settle_time(params: SystemParams, cfg: OracleConfig = DEFAULTS.oracle) -> float:
    return cfg.settle_rates / min(params.gamma1, params.gamma2)
