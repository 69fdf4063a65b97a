import unittest
from dataclasses import replace

import numpy as np

from classical import solve_classical
from drift import (QUADRATURES, build_drift, build_noise, drift_at, ladder_harmonics,
                   to_quadratures)
from oracle import mean_field_rhs
from params import DEFAULT, derive, preset, with_loop_phase, with_temperature


def _as_real(z):
    """(a, b1, b2) -> (Re a, Im a, Re b1, Im b1, Re b2, Im b2)"""
    return np.stack([z.real, z.imag], axis=1).reshape(-1)


def linearize(params, derived, y, t):
    """Central-difference Jacobian of the mean-field equations in real coordinates.

    The right-hand side is quadratic in the amplitudes, so central differences
    are exact up to round-off.
    """
    J = np.zeros((6, 6))
    for k in range(6):
        step = 1e-3 * (1.0 + abs(y[k // 2]))
        dy = np.zeros(3, dtype=complex)
        dy[k // 2] = step if k % 2 == 0 else 1j * step
        plus = _as_real(mean_field_rhs(params, derived, t, y + dy))
        minus = _as_real(mean_field_rhs(params, derived, t, y - dy))
        J[:, k] = (plus - minus) / (2 * step)
    return J


class TestDriftAssembly(unittest.TestCase):
    def setUp(self):
        self.params = DEFAULT
        self.derived = derive(self.params)
        self.classical = solve_classical(self.params, self.derived)
        self.harmonics = build_drift(self.params, self.derived, self.classical)

    def test_shapes_and_realness(self):
        self.assertEqual(len(QUADRATURES), 6)
        self.assertEqual(self.harmonics.m0.shape, (6, 6))
        self.assertTrue(np.isrealobj(self.harmonics.m0))

    def test_unmodulated_has_no_harmonics(self):
        self.assertFalse(self.harmonics.modulated)
        np.testing.assert_array_equal(self.harmonics.m_plus1, 0)
        np.testing.assert_array_equal(drift_at(self.harmonics, self.params.Omega_mod, 1.3e-11),
                                      self.harmonics.m0)

    def test_decay_on_diagonal(self):
        m0 = self.harmonics.m0
        self.assertAlmostEqual(m0[0, 0], -self.params.kappa / 2)
        self.assertAlmostEqual(m0[2, 2], -self.params.gamma1 / 2)
        self.assertAlmostEqual(m0[5, 5], -self.params.gamma2 / 2)

    def test_trace_is_total_loss(self):
        expected = -(self.params.kappa + self.params.gamma1 + self.params.gamma2)
        self.assertAlmostEqual(np.trace(self.harmonics.m0) / expected, 1.0, places=12)

    def test_decoupled_mechanics(self):
        p = replace(self.params, g1_mag=0.0, g2_mag=0.0, mu_mag=0.0)
        derived = derive(p)
        m0 = build_drift(p, derived, solve_classical(p, derived)).m0
        np.testing.assert_allclose(m0[2:4, 2:4], [[-p.gamma1 / 2, p.omega_m],
                                                  [-p.omega_m, -p.gamma1 / 2]])
        np.testing.assert_allclose(m0[0:2, 2:6], 0, atol=1e-9 * p.omega_m)

    def test_ladder_quadrature_similarity(self):
        ladder = ladder_harmonics(self.params, self.classical)
        quad = to_quadratures(ladder[0])
        for k in (1, 2, 3):
            # similarity keeps the power sums of the eigenvalues
            self.assertAlmostEqual(np.trace(np.linalg.matrix_power(ladder[0], k)).real
                                   / np.trace(np.linalg.matrix_power(quad, k)).real, 1.0, places=9)

    def test_matches_linearized_mean_field(self):
        y = np.array([self.classical.a0, self.classical.b1_0, self.classical.b2_0])
        J = linearize(self.params, self.derived, y, 0.0)
        scale = np.max(np.abs(self.harmonics.m0))
        np.testing.assert_allclose(self.harmonics.m0, J, rtol=0, atol=1e-7 * scale)


class TestModulatedDrift(unittest.TestCase):
    def setUp(self):
        self.params = preset('squeezing')
        self.derived = derive(self.params)
        self.classical = solve_classical(self.params, self.derived)
        self.harmonics = build_drift(self.params, self.derived, self.classical)

    def test_conjugate_harmonics(self):
        self.assertTrue(self.harmonics.modulated)
        np.testing.assert_array_equal(self.harmonics.m_minus1, np.conj(self.harmonics.m_plus1))
        self.assertIs(self.harmonics.harmonic(0), self.harmonics.m0)

    def test_drift_real_at_all_times(self):
        Omega = self.params.Omega_mod
        for t in np.linspace(0.0, 2 * np.pi / Omega, 7):
            m = self.harmonics.at(t)
            self.assertTrue(np.isrealobj(m))
            direct = (self.harmonics.m0 + self.harmonics.m_plus1 * np.exp(-1j * Omega * t)
                      + self.harmonics.m_minus1 * np.exp(1j * Omega * t))
            np.testing.assert_allclose(m, direct.real, atol=1e-6)
            self.assertLess(np.max(np.abs(direct.imag)), 1e-6)

    def test_matches_linearized_mean_field_along_orbit(self):
        Omega = self.params.Omega_mod
        scale = np.max(np.abs(self.harmonics.m0))
        for t in np.linspace(0.0, 2 * np.pi / Omega, 5, endpoint=False):
            y = self.classical.means_at(Omega, t)
            J = linearize(self.params, self.derived, y, t)
            np.testing.assert_allclose(drift_at(self.harmonics, Omega, t), J,
                                       rtol=0, atol=1e-7 * scale)


SWAP = np.eye(6)[[0, 1, 4, 5, 2, 3]]


def _harmonics_at(params):
    derived = derive(params)
    return build_drift(params, derived, solve_classical(params, derived))


class TestSymmetries(unittest.TestCase):
    """Resonator exchange under phi -> 2 pi - phi and the common coupling phase gauge"""

    def test_reversed_loop_phase_permutes_resonator_blocks(self):
        for phi in (0.3, 0.7, 2.0):
            m = _harmonics_at(with_loop_phase(DEFAULT, phi)).m0
            r = _harmonics_at(with_loop_phase(DEFAULT, 2 * np.pi - phi)).m0
            scale = np.max(np.abs(m))
            np.testing.assert_allclose(SWAP @ m @ SWAP.T, r, rtol=0, atol=1e-9 * scale)
            np.testing.assert_allclose(m[2:4, 2:4], r[4:6, 4:6], rtol=0, atol=1e-9 * scale)
            np.testing.assert_allclose(m[2:4, 4:6], r[4:6, 2:4], rtol=0, atol=1e-9 * scale)

    def test_reversed_loop_phase_permutes_modulated_harmonics(self):
        p = preset('squeezing')
        m = _harmonics_at(with_loop_phase(p, 0.7))
        r = _harmonics_at(with_loop_phase(p, 2 * np.pi - 0.7))
        scale = np.max(np.abs(m.m0))
        for h in (-1, 0, 1):
            np.testing.assert_allclose(SWAP @ m.harmonic(h) @ SWAP.T, r.harmonic(h),
                                       rtol=0, atol=1e-8 * scale)

    def test_diffusion_is_exchange_symmetric(self):
        noise = build_noise(DEFAULT, derive(DEFAULT))
        np.testing.assert_array_equal(SWAP @ noise.d_mat @ SWAP.T, noise.d_mat)

    def test_common_coupling_phase_keeps_spectrum(self):
        p = with_loop_phase(DEFAULT, 0.7)
        m = _harmonics_at(p).m0
        g = _harmonics_at(replace(p, phi1=p.phi1 + 0.4, phi2=p.phi2 + 0.4)).m0
        self.assertAlmostEqual(derive(p).loop_phase, 0.7)
        for k in (1, 2, 3, 4):
            a = np.trace(np.linalg.matrix_power(m, k))
            b = np.trace(np.linalg.matrix_power(g, k))
            self.assertAlmostEqual(b / a, 1.0, places=8)
        # the cavity block does not see the gauge
        np.testing.assert_allclose(g[0:2, 0:2], m[0:2, 0:2], rtol=0, atol=1e-9 * np.max(np.abs(m)))


class TestNoise(unittest.TestCase):
    def setUp(self):
        self.params = DEFAULT
        self.derived = derive(self.params)
        self.noise = build_noise(self.params, self.derived)

    def test_correlation_is_hermitian(self):
        c = self.noise.c_mat
        np.testing.assert_allclose(c, c.conj().T)

    def test_diffusion_is_symmetric_real_part(self):
        np.testing.assert_array_equal(self.noise.d_mat, self.noise.d_mat.T)
        np.testing.assert_allclose(self.noise.d_mat, self.noise.c_mat.real)

    def test_diffusion_diagonal(self):
        n_m = self.derived.n_m
        expected = [self.params.kappa / 2] * 2 + [self.params.gamma1 * (2 * n_m + 1) / 2] * 2 \
            + [self.params.gamma2 * (2 * n_m + 1) / 2] * 2
        np.testing.assert_allclose(np.diag(self.noise.d_mat), expected, rtol=1e-12)
        np.testing.assert_array_equal(self.noise.d_mat - np.diag(np.diag(self.noise.d_mat)), 0)

    def test_commutator_part(self):
        c = self.noise.c_mat
        self.assertAlmostEqual(c[0, 1], 1j * self.params.kappa / 2)
        self.assertAlmostEqual(c[1, 0], -1j * self.params.kappa / 2)

    def test_vacuum_at_zero_temperature(self):
        noise = build_noise(self.params, derive(with_temperature(self.params, 0.0)))
        np.testing.assert_allclose(np.diag(noise.d_mat)[2:],
                                   [self.params.gamma1 / 2] * 4)


if __name__ == '__main__':
    unittest.main()
