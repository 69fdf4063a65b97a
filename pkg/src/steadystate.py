"""
Stationary Covariance
---------------------
Steady-state covariance of the unmodulated fluctuation dynamics, computed two
independent ways:

- residue formula in the eigenbasis of M(0), integration-free, giving the
  non-symmetrized <R_i R_j>
- Lyapunov equation M V + V M^T + D = 0 for the symmetrized V^s, either in
  the eigenbasis or as a vectorized linear solve that needs no diagonalization
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from debug import DEBUG
from errors import DefectiveMatrix, Unstable

COND_LIMIT = 1e12
MARGINAL_TOL = 1e-14
LYAPUNOV_METHODS = ('auto', 'eigen', 'direct', 'schur')

# quadrature index pairs (X, Y) of the cavity and the two resonators
MODE_SLICES = {0: (0, 1), 1: (2, 3), 2: (4, 5)}

SYMPLECTIC = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class StationaryCovariance:
    v: np.ndarray
    v_sym: np.ndarray
    stable: bool
    eigvals: np.ndarray
    cond_u: float
    method: str = 'residue'

    def mean_phonon(self, resonator: int) -> float:
        return mean_phonon(self.v_sym, resonator)


@dataclass(frozen=True)
class PhysicalityReport:
    min_eigenvalue: float
    heisenberg: tuple

    @property
    def physical(self) -> bool:
        return self.min_eigenvalue >= -1e-8 and all(p >= 0.25 - 1e-8 for p in self.heisenberg)


def stability(m0: np.ndarray):
    """(stable, eigenvalues sorted by imaginary part)"""
    eigvals = np.linalg.eigvals(m0)
    eigvals = eigvals[np.argsort(eigvals.imag, kind='stable')]
    return bool(np.max(eigvals.real) < 0), eigvals


def diagonalize(m0: np.ndarray):
    """Eigenvalues, eigenvector matrix U and cond(U); DefectiveMatrix near an EP"""
    lam, U = np.linalg.eig(m0)
    cond_u = float(np.linalg.cond(U))
    if not np.isfinite(cond_u) or cond_u > COND_LIMIT:
        raise DefectiveMatrix(f"eigenvector matrix is ill-conditioned (cond {cond_u:.3e})",
                              cond_u=cond_u)
    return lam, U, cond_u


def _eigen_sum(lam, U, noise, signs):
    """U [W_kq (s_k + s_q) / (2 (lam_k + lam_q))] U^T with W = U^-1 noise U^-T"""
    U_inv = np.linalg.inv(U)
    W = U_inv @ noise @ U_inv.T
    numerator = (signs[:, None] + signs[None, :]) / 2.0
    denominator = lam[:, None] + lam[None, :]
    F = np.divide(numerator, denominator, out=np.zeros_like(denominator),
                  where=numerator != 0)
    return U @ (W * F) @ U.T


def _signs(lam):
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.any(np.abs(lam.real) <= MARGINAL_TOL * scale):
        raise Unstable("marginally stable mode, no steady state", max_real=float(np.max(lam.real)))
    return np.sign(lam.real)


def covariance_residue(m0: np.ndarray, c_mat: np.ndarray) -> np.ndarray:
    """Non-symmetrized stationary covariance from the residue formula"""
    lam, U, cond_u = diagonalize(m0)
    v = _eigen_sum(lam, U, np.asarray(c_mat, dtype=complex), _signs(lam).astype(complex))
    DEBUG.log(f"residue covariance: cond(U) = {cond_u:.3e}")
    return v


def _lyapunov_eigen(m0, d_mat):
    lam, U, _ = diagonalize(m0)
    v = _eigen_sum(lam, U, d_mat.astype(complex), -np.ones(lam.size, dtype=complex))
    return np.real(v)


def _lyapunov_direct(m0, d_mat):
    n = m0.shape[0]
    eye = np.eye(n)
    operator = np.kron(m0, eye) + np.kron(eye, m0)
    v = np.linalg.solve(operator, -d_mat.reshape(-1)).reshape(n, n)
    return v


def covariance_lyapunov(m0: np.ndarray, d_mat: np.ndarray, method: str = 'auto') -> np.ndarray:
    """Symmetrized stationary covariance solving M V + V M^T + D = 0"""
    if method not in LYAPUNOV_METHODS:
        raise ValueError(f"unknown Lyapunov method {method!r}")
    stable, eigvals = stability(m0)
    if not stable:
        raise Unstable("drift has eigenvalues with non-negative real part",
                       max_real=float(np.max(eigvals.real)))
    d_mat = np.asarray(d_mat, dtype=float)
    if method == 'direct':
        v = _lyapunov_direct(m0, d_mat)
    elif method == 'schur':
        v = linalg.solve_continuous_lyapunov(m0, -d_mat)
    else:
        try:
            v = _lyapunov_eigen(m0, d_mat)
        except DefectiveMatrix as exc:
            if method == 'eigen':
                raise
            DEBUG.log(f"Lyapunov: {exc}; falling back to the vectorized solve")
            v = _lyapunov_direct(m0, d_mat)
    return (v + v.T) / 2


def lyapunov_residual(m0: np.ndarray, v_sym: np.ndarray, d_mat: np.ndarray) -> float:
    return float(np.linalg.norm(m0 @ v_sym + v_sym @ m0.T + d_mat))


def mean_phonon(v_sym: np.ndarray, resonator_index: int) -> float:
    """Mean occupancy (V_XX + V_YY - 1)/2 of mode 0 (cavity), 1 or 2"""
    ix, iy = MODE_SLICES[resonator_index]
    return float((np.real(v_sym[ix, ix]) + np.real(v_sym[iy, iy]) - 1.0) / 2.0)


def physicality_check(v_sym: np.ndarray) -> PhysicalityReport:
    """Smallest eigenvalue of V^s + (i/2) Sigma and per-mode Heisenberg products"""
    v_sym = np.real(v_sym)
    min_eig = float(np.min(np.linalg.eigvalsh(v_sym + 0.5j * SYMPLECTIC)))
    products = tuple(float(v_sym[ix, ix] * v_sym[iy, iy]) for ix, iy in MODE_SLICES.values())
    return PhysicalityReport(min_eigenvalue=min_eig, heisenberg=products)


def stationary_covariance(m0: np.ndarray, c_mat: np.ndarray) -> StationaryCovariance:
    """Residue formula with stability and conditioning diagnostics"""
    stable, eigvals = stability(m0)
    lam, U, cond_u = diagonalize(m0)
    v = _eigen_sum(lam, U, np.asarray(c_mat, dtype=complex), _signs(lam).astype(complex))
    v_sym = np.real(v + v.T) / 2
    return StationaryCovariance(v=v, v_sym=v_sym, stable=stable, eigvals=eigvals, cond_u=cond_u)
