"""
Physical Parameters
-------------------
System parameters of the closed-loop cavity / two-resonator network, derived
quantities (drive amplitudes, bath occupancies, loop phase) and named presets.

All rates are angular frequencies in rad/s. Coupling phases are stored apart
from magnitudes; complex couplings are built on demand.
"""

from dataclasses import dataclass, field, replace, asdict
from typing import Dict

import numpy as np
from scipy import constants

from errors import ParameterError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SystemParams:
    """Inputs of the cavity / two-resonator Hamiltonian in the pump frame"""
    omega_m: float
    kappa: float
    gamma1: float
    gamma2: float
    g1_mag: float
    g2_mag: float
    phi1: float = 0.0
    phi2: float = 0.0
    mu_mag: float = 0.0
    phi_mu: float = 0.0
    delta: float = 0.0
    eta: float = 0.5
    power: float = 0.25e-3
    lambda_laser: float = 1550e-9
    Omega_mod: float = 0.0
    depths: Dict[int, float] = field(default_factory=lambda: {-1: 0.0, 1: 0.0})
    T_cavity: float = 18.1
    T_mech: float = 18.1

    def __post_init__(self):
        # depths always hold float entries for sidebands -1 and +1
        object.__setattr__(self, 'depths', {-1: float(self.depths.get(-1, 0.0)),
                                            1: float(self.depths.get(1, 0.0))})

    @property
    def g1(self) -> complex:
        return self.g1_mag * np.exp(1j * self.phi1)

    @property
    def g2(self) -> complex:
        return self.g2_mag * np.exp(1j * self.phi2)

    @property
    def mu(self) -> complex:
        return self.mu_mag * np.exp(1j * self.phi_mu)

    @property
    def gamma_sum(self) -> float:
        return self.gamma1 + self.gamma2

    @property
    def resolved_sideband(self) -> bool:
        return self.kappa < self.omega_m

    @property
    def modulated(self) -> bool:
        return any(d != 0.0 for d in self.depths.values())

    def to_dict(self) -> dict:
        data = asdict(self)
        data['depths'] = {str(k): v for k, v in self.depths.items()}
        return data


@dataclass(frozen=True)
class DerivedParams:
    omega_L: float
    eps0: float
    eps_n: Dict[int, float]
    n_a: float
    n_m: float
    loop_phase: float


def validate(params: SystemParams):
    """Raise ParameterError unless every physical input is in range"""
    for name in ('omega_m', 'kappa', 'gamma1', 'gamma2'):
        value = getattr(params, name)
        if not np.isfinite(value) or value <= 0:
            raise ParameterError(f"{name} must be a positive rate, got {value!r}")
    for name in ('g1_mag', 'g2_mag', 'mu_mag', 'power', 'Omega_mod'):
        value = getattr(params, name)
        if not np.isfinite(value) or value < 0:
            raise ParameterError(f"{name} must be non-negative, got {value!r}")
    if not 0.0 <= params.eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {params.eta!r}")
    for n, d in params.depths.items():
        if abs(d) >= 1.0:
            raise ParameterError(f"modulation depth d_{n} must satisfy |d| < 1, got {d!r}")
    if params.modulated and params.Omega_mod <= 0:
        raise ParameterError("a modulated drive needs Omega_mod > 0")
    if params.T_cavity < 0 or params.T_mech < 0:
        raise ParameterError("temperatures must be >= 0 K")
    if not np.isfinite(params.delta):
        raise ParameterError("delta must be finite")


def thermal_occupancy(omega: float, T: float) -> float:
    """Bose-Einstein occupancy 1/(exp(hbar*omega/kT) - 1); exactly 0 at T = 0"""
    if T <= 0:
        return 0.0
    x = constants.hbar * omega / (constants.k * T)
    # e^-x / (1 - e^-x) stays finite for optical frequencies at cryogenic T
    return float(-np.exp(-x) / np.expm1(-x))


def derive(params: SystemParams) -> DerivedParams:
    """Drive amplitudes, bath occupancies and loop phase"""
    if not params.lambda_laser > 0:
        raise ParameterError(f"lambda_laser must be positive, got {params.lambda_laser!r}")
    validate(params)
    omega_L = TWO_PI * constants.c / params.lambda_laser
    eps0 = np.sqrt(2.0 * params.power / (constants.hbar * omega_L))
    eps_n = {n: d * eps0 for n, d in params.depths.items()}
    # the cavity bath is taken at the laser frequency; Delta << omega_L
    n_a = thermal_occupancy(omega_L, params.T_cavity)
    n_m = thermal_occupancy(params.omega_m, params.T_mech)
    loop_phase = float(np.mod(-params.phi1 + params.phi2 + params.phi_mu, TWO_PI))
    return DerivedParams(omega_L=float(omega_L), eps0=float(eps0), eps_n=eps_n,
                         n_a=n_a, n_m=n_m, loop_phase=loop_phase)


def drive_amplitude(params: SystemParams, derived: DerivedParams, t):
    """Modulated drive eps_L(t) = sum_n eps_n exp(-i n Omega t), n in {-1, 0, 1}"""
    t = np.asarray(t, dtype=float)
    value = derived.eps0 * np.ones_like(t, dtype=complex)
    for n, eps in derived.eps_n.items():
        if eps != 0.0:
            value = value + eps * np.exp(-1j * n * params.Omega_mod * t)
    return value


def with_loop_phase(params: SystemParams, phi: float) -> SystemParams:
    """Impart the loop phase on the intermechanical coupling, keeping g1, g2 phases"""
    return replace(params, phi_mu=float(phi) + params.phi1 - params.phi2)


def with_mu_over_gamma_sum(params: SystemParams, ratio: float) -> SystemParams:
    return replace(params, mu_mag=float(ratio) * params.gamma_sum)


def with_temperature(params: SystemParams, T: float) -> SystemParams:
    return replace(params, T_cavity=float(T), T_mech=float(T))


def with_depth(params: SystemParams, d: float, sideband: int = 1) -> SystemParams:
    depths = dict(params.depths)
    depths[sideband] = float(d)
    return replace(params, depths=depths)


def mu_over_gamma_sum(params: SystemParams) -> float:
    return params.mu_mag / params.gamma_sum


def _default_preset() -> SystemParams:
    omega_m = TWO_PI * 3.75e9
    gamma = 5e-4 * omega_m
    return SystemParams(
        omega_m=omega_m,
        kappa=TWO_PI * 900e6,
        gamma1=gamma,
        gamma2=gamma,
        g1_mag=TWO_PI * 800e3,
        g2_mag=TWO_PI * 800e3,
        phi1=0.0,
        phi2=0.0,
        mu_mag=EP1_MU_OVER_GAMMA_SUM * 2 * gamma,
        phi_mu=np.pi / 2,
        delta=omega_m,
        eta=0.5,
        power=0.25e-3,
        lambda_laser=1550e-9,
        Omega_mod=2 * omega_m,
        depths={-1: 0.0, 1: 0.0},
        T_cavity=18.1,
        T_mech=18.1,
    )


# Reported EP magnitudes in units of gamma1 + gamma2
EP1_MU_OVER_GAMMA_SUM = 52.5
EP2_MU_OVER_GAMMA_SUM = 80.45
EP1_MODULATED_D05 = 50.83
EP1_MODULATED_D04 = 51.36

DEFAULT = _default_preset()

PRESETS = {
    'default': DEFAULT,
    'squeezing': replace(with_mu_over_gamma_sum(with_depth(DEFAULT, 0.5), EP1_MODULATED_D05),
                         T_cavity=1.9, T_mech=1.9),
}


def preset(name: str) -> SystemParams:
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]
