"""
Classical Mean-Field Solver
---------------------------
Self-consistent center and first-sideband amplitudes of the cavity and the
two mechanical modes under a drive modulated at Omega_mod.

Each mode mean is expanded as  x(t) = x_0 + x_1 e^{-i Omega t} + x_{-1} e^{i Omega t}
and the balance equations are iterated with a damped fixed-point scheme.
A stagnating iteration hands over to a finite-difference Newton solve.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from config import ClassicalConfig, DEFAULTS
from debug import DEBUG
from errors import NonConvergence
from params import SystemParams, DerivedParams, derive

AMPLITUDES = ('a0', 'a_p1', 'a_m1', 'b1_0', 'b1_p1', 'b1_m1', 'b2_0', 'b2_p1', 'b2_m1')


@dataclass(frozen=True)
class ClassicalSteadyState:
    a0: complex
    a_p1: complex
    a_m1: complex
    b1_0: complex
    b1_p1: complex
    b1_m1: complex
    b2_0: complex
    b2_p1: complex
    b2_m1: complex
    delta_a0: float
    delta_a_p1: complex
    iterations: int
    residual: float

    @property
    def delta_a_m1(self) -> complex:
        return np.conj(self.delta_a_p1)

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in AMPLITUDES], dtype=complex)

    def harmonic(self, mode: str, h: int) -> complex:
        """Amplitude of mode 'a', 'b1' or 'b2' at harmonic h in {-1, 0, 1}"""
        if mode == 'a':
            return {0: self.a0, 1: self.a_p1, -1: self.a_m1}[h]
        return {0: getattr(self, f'{mode}_0'), 1: getattr(self, f'{mode}_p1'),
                -1: getattr(self, f'{mode}_m1')}[h]

    def detuning_harmonic(self, h: int) -> complex:
        return {0: self.delta_a0, 1: self.delta_a_p1, -1: self.delta_a_m1}[h]

    def means_at(self, Omega: float, t) -> np.ndarray:
        """Mode means (a, b1, b2) at times t, shape (3,) + t.shape"""
        t = np.asarray(t, dtype=float)
        em = np.exp(-1j * Omega * t).ravel()
        x = self.as_vector().reshape(3, 3)
        means = x[:, 0, None] + x[:, 1, None] * em + x[:, 2, None] * np.conj(em)
        return means.reshape((3,) + t.shape)

    def to_dict(self) -> dict:
        data = {name: [float(np.real(v)), float(np.imag(v))]
                for name, v in zip(AMPLITUDES, self.as_vector())}
        data['delta_a0'] = float(self.delta_a0)
        data['delta_a_p1'] = [float(np.real(self.delta_a_p1)), float(np.imag(self.delta_a_p1))]
        data['iterations'] = int(self.iterations)
        data['residual'] = float(self.residual)
        return data


def detuning_harmonics(params: SystemParams, x: np.ndarray):
    """Harmonics 0 and +1 of the effective detuning Delta_a(t)"""
    _, _, _, b10, b1p, b1m, b20, b2p, b2m = x
    g1, g2 = params.g1, params.g2
    shift = g1 * np.conj(b10) + np.conj(g1) * b10 + g2 * np.conj(b20) + np.conj(g2) * b20
    d0 = params.delta - shift
    d1 = -(np.conj(g1) * b1p + g1 * np.conj(b1m) + np.conj(g2) * b2p + g2 * np.conj(b2m))
    return d0, d1


def sideband_map(params: SystemParams, derived: DerivedParams, x: np.ndarray) -> np.ndarray:
    """Right-hand sides of the nine amplitude relations evaluated at x"""
    a0, ap, am, b10, b1p, b1m, b20, b2p, b2m = x
    d0, d1 = detuning_harmonics(params, x)
    d0 = np.real(d0)
    dm1 = np.conj(d1)
    Om = params.Omega_mod
    drive = np.sqrt(params.eta * params.kappa)
    cav = 1j * d0 + params.kappa / 2

    a0_new = (drive * derived.eps0 - 1j * (d1 * am + dm1 * ap)) / cav
    ap_new = (drive * derived.eps_n[1] - 1j * d1 * a0) / (cav - 1j * Om)
    am_new = (drive * derived.eps_n[-1] - 1j * dm1 * a0) / (cav + 1j * Om)

    n0 = abs(a0) ** 2 + abs(ap) ** 2 + abs(am) ** 2
    np1 = a0 * np.conj(am) + np.conj(a0) * ap
    nm1 = a0 * np.conj(ap) + np.conj(a0) * am

    mu = params.mu
    w = params.omega_m
    g1, g2 = params.g1, params.g2
    k1, k2 = params.gamma1 / 2, params.gamma2 / 2
    b10_new = (1j * mu * b20 + 1j * g1 * n0) / (1j * w + k1)
    b1p_new = (1j * mu * b2p + 1j * g1 * np1) / (1j * (w - Om) + k1)
    b1m_new = (1j * mu * b2m + 1j * g1 * nm1) / (1j * (w + Om) + k1)
    b20_new = (1j * np.conj(mu) * b10 + 1j * g2 * n0) / (1j * w + k2)
    b2p_new = (1j * np.conj(mu) * b1p + 1j * g2 * np1) / (1j * (w - Om) + k2)
    b2m_new = (1j * np.conj(mu) * b1m + 1j * g2 * nm1) / (1j * (w + Om) + k2)
    return np.array([a0_new, ap_new, am_new, b10_new, b1p_new, b1m_new,
                     b20_new, b2p_new, b2m_new], dtype=complex)


def _relative_residual(x: np.ndarray, fx: np.ndarray) -> float:
    return float(np.max(np.abs(x - fx) / (1.0 + np.abs(x))))


def mean_field_residual(params: SystemParams, derived: DerivedParams, amplitudes) -> float:
    """Largest relative defect of the nine amplitude relations at the given amplitudes"""
    if isinstance(amplitudes, ClassicalSteadyState):
        amplitudes = amplitudes.as_vector()
    x = np.asarray(amplitudes, dtype=complex)
    return _relative_residual(x, sideband_map(params, derived, x))


def initial_guess(params: SystemParams, derived: DerivedParams) -> np.ndarray:
    """Decoupled driven cavity, mechanical modes at rest"""
    drive = np.sqrt(params.eta * params.kappa)
    cav = 1j * params.delta + params.kappa / 2
    x = np.zeros(9, dtype=complex)
    x[0] = drive * derived.eps0 / cav
    x[1] = drive * derived.eps_n[1] / (cav - 1j * params.Omega_mod)
    x[2] = drive * derived.eps_n[-1] / (cav + 1j * params.Omega_mod)
    return x


def _newton(params, derived, x0, cfg: ClassicalConfig):
    """Finite-difference Newton on the 18 real unknowns"""
    scale = 1.0 + np.abs(x0)

    def defect(v):
        x = (v[:9] + 1j * v[9:]) * scale
        r = (x - sideband_map(params, derived, x)) / scale
        return np.concatenate([r.real, r.imag])

    u0 = x0 / scale
    sol = optimize.root(defect, np.concatenate([u0.real, u0.imag]), method='hybr',
                        options={'xtol': 1e-15, 'maxfev': 200 * (cfg.newton_max_iter + 1)})
    x = (sol.x[:9] + 1j * sol.x[9:]) * scale
    return x, sol.nfev


def _finish(params, x, iterations, residual) -> ClassicalSteadyState:
    if not params.modulated:
        # no drive at +-Omega: sidebands vanish identically
        x = x.copy()
        x[[1, 2, 4, 5, 7, 8]] = 0.0
    d0, d1 = detuning_harmonics(params, x)
    assert abs(np.imag(d0)) <= 1e-12 * max(1.0, abs(d0)), "Delta_a0 must be real"
    return ClassicalSteadyState(*x, delta_a0=float(np.real(d0)), delta_a_p1=complex(d1),
                                iterations=int(iterations), residual=float(residual))


def solve_classical(params: SystemParams, derived: DerivedParams = None,
                    cfg: ClassicalConfig = DEFAULTS.classical,
                    initial: np.ndarray = None) -> ClassicalSteadyState:
    """Solve the sideband balance equations to cfg.tol.

    Raises NonConvergence with the best residual seen when neither the
    fixed-point iteration nor the Newton fallback reaches the tolerance.
    """
    if derived is None:
        derived = derive(params)
    x = initial_guess(params, derived) if initial is None else np.asarray(initial, dtype=complex)
    monitor = DEBUG.monitor('classical', cfg.stagnation_window)
    best_x, best_res = x, np.inf

    for iteration in range(1, cfg.max_iter + 1):
        fx = sideband_map(params, derived, x)
        res = _relative_residual(x, fx)
        if not np.isfinite(res):
            DEBUG.log(f"classical: non-finite residual at iteration {iteration}")
            break
        monitor.update(res)
        if res < best_res:
            best_x, best_res = x, res
        if res < cfg.tol:
            DEBUG.log(f"classical: converged in {iteration} iterations, residual {res:.3e}")
            return _finish(params, x, iteration, res)
        if monitor.stagnated():
            DEBUG.log(f"classical: stagnated at residual {res:.3e}, switching to Newton")
            break
        x = (1.0 - cfg.beta) * x + cfg.beta * fx

    x_newton, nfev = _newton(params, derived, best_x, cfg)
    res = mean_field_residual(params, derived, x_newton)
    if np.isfinite(res) and res < cfg.tol:
        DEBUG.log(f"classical: Newton converged, residual {res:.3e}")
        return _finish(params, x_newton, iteration + nfev, res)
    if np.isfinite(res) and res < best_res:
        best_res = res
    raise NonConvergence(f"classical sidebands did not converge (best residual {best_res:.3e})",
                         best_residual=best_res, iterations=iteration)
