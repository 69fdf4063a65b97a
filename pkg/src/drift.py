"""
Drift and Noise Matrices
------------------------
Linearized fluctuation dynamics dR/dt = M(t) R + N(t) in the quadrature basis
R = [X_a, Y_a, X_b1, Y_b1, X_b2, Y_b2], with

    M(t) = M(+1) e^{-i Omega t} + M(0) + M(-1) e^{+i Omega t}

The drift is first written for the ladder vector
z = (da, db1, db2, da+, db1+, db2+), where every entry follows directly from
the fluctuation equations, then mapped to quadratures by the fixed similarity
transform X = (z + z+)/sqrt(2), Y = (z - z+)/(i sqrt(2)).
"""

from dataclasses import dataclass

import numpy as np

from classical import ClassicalSteadyState
from params import SystemParams, DerivedParams

QUADRATURES = ('X_a', 'Y_a', 'X_b1', 'Y_b1', 'X_b2', 'Y_b2')
REALNESS_TOL = 1e-12

_S = np.zeros((6, 6), dtype=complex)
for _k in range(3):
    _S[2 * _k, _k] = _S[2 * _k, _k + 3] = 1 / np.sqrt(2)
    _S[2 * _k + 1, _k] = -1j / np.sqrt(2)
    _S[2 * _k + 1, _k + 3] = 1j / np.sqrt(2)
_S_INV = np.linalg.inv(_S)


@dataclass(frozen=True)
class DriftHarmonics:
    """Harmonics of M(t); M(-1) is stored as the exact conjugate of M(+1)"""
    m_minus1: np.ndarray
    m0: np.ndarray
    m_plus1: np.ndarray
    Omega: float = 0.0

    @property
    def modulated(self) -> bool:
        return bool(np.any(self.m_plus1 != 0))

    def harmonic(self, h: int) -> np.ndarray:
        return {-1: self.m_minus1, 0: self.m0, 1: self.m_plus1}[h]

    def at(self, t: float) -> np.ndarray:
        return drift_at(self, self.Omega, t)


@dataclass(frozen=True)
class NoiseMatrices:
    c_mat: np.ndarray
    d_mat: np.ndarray


def _fluctuation_blocks(params: SystemParams, A: complex, A_conj: complex,
                        delta_a: complex, static: bool):
    """Blocks P, Q of d(da, db1, db2)/dt = P (da, db1, db2) + Q (da+, db1+, db2+)

    A is the harmonic of <a>(t) and A_conj the same harmonic of <a>*(t).
    """
    g1, g2 = params.g1, params.g2
    P = np.zeros((3, 3), dtype=complex)
    Q = np.zeros((3, 3), dtype=complex)
    P[0, 0] = -1j * delta_a
    P[0, 1] = 1j * np.conj(g1) * A
    P[0, 2] = 1j * np.conj(g2) * A
    P[1, 0] = 1j * g1 * A_conj
    P[2, 0] = 1j * g2 * A_conj
    Q[0, 1] = Q[1, 0] = 1j * g1 * A
    Q[0, 2] = Q[2, 0] = 1j * g2 * A
    if static:
        P[0, 0] -= params.kappa / 2
        P[1, 1] = -1j * params.omega_m - params.gamma1 / 2
        P[2, 2] = -1j * params.omega_m - params.gamma2 / 2
        P[1, 2] = 1j * params.mu
        P[2, 1] = 1j * np.conj(params.mu)
    return P, Q


def ladder_harmonics(params: SystemParams, classical: ClassicalSteadyState) -> dict:
    """Complex 6x6 drift harmonics L(h), h in {-1, 0, 1}, in the ladder basis"""
    blocks = {}
    for h in (-1, 0, 1):
        A = classical.harmonic('a', h)
        A_conj = np.conj(classical.harmonic('a', -h))
        blocks[h] = _fluctuation_blocks(params, A, A_conj, classical.detuning_harmonic(h), h == 0)
    harmonics = {}
    for h in (-1, 0, 1):
        P, Q = blocks[h]
        P_m, Q_m = blocks[-h]
        harmonics[h] = np.block([[P, Q], [np.conj(Q_m), np.conj(P_m)]])
    return harmonics


def to_quadratures(ladder: np.ndarray) -> np.ndarray:
    return _S @ ladder @ _S_INV


def build_drift(params: SystemParams, derived: DerivedParams,
                classical: ClassicalSteadyState) -> DriftHarmonics:
    """Quadrature drift harmonics around the classical periodic orbit"""
    ladder = ladder_harmonics(params, classical)
    m0 = to_quadratures(ladder[0])
    m_plus1 = to_quadratures(ladder[1])
    m_minus1 = to_quadratures(ladder[-1])

    scale = max(1.0, float(np.max(np.abs(m0))))
    assert np.max(np.abs(m0.imag)) <= REALNESS_TOL * scale, "M(0) must be real"
    assert np.max(np.abs(m_minus1 - np.conj(m_plus1))) <= REALNESS_TOL * scale, \
        "M(-1) must conjugate M(+1)"

    m_plus1 = m_plus1.copy()
    if not params.modulated:
        m_plus1[:] = 0.0
    return DriftHarmonics(m_minus1=np.conj(m_plus1), m0=np.ascontiguousarray(m0.real),
                          m_plus1=m_plus1, Omega=params.Omega_mod)


def drift_at(harmonics: DriftHarmonics, Omega: float, t: float) -> np.ndarray:
    """Real M(t) reconstructed from its harmonics"""
    phase = np.exp(-1j * Omega * t)
    m = harmonics.m0 + 2.0 * np.real(harmonics.m_plus1 * phase)
    return m


def build_noise(params: SystemParams, derived: DerivedParams) -> NoiseMatrices:
    """Two-time noise correlation C and symmetrized diffusion D = (C + C^T)/2"""
    c_mat = np.zeros((6, 6), dtype=complex)
    rates = ((params.kappa, derived.n_a), (params.gamma1, derived.n_m), (params.gamma2, derived.n_m))
    for k, (rate, n) in enumerate(rates):
        i = 2 * k
        c_mat[i, i] = c_mat[i + 1, i + 1] = rate * (2 * n + 1) / 2
        c_mat[i, i + 1] = -rate / 2j
        c_mat[i + 1, i] = rate / 2j
    d_mat = np.real(c_mat + c_mat.T) / 2
    return NoiseMatrices(c_mat=c_mat, d_mat=d_mat)
