import unittest
from dataclasses import replace

import numpy as np

from classical import solve_classical
from drift import build_drift, build_noise
from errors import DefectiveMatrix, Unstable
from params import DEFAULT, derive
from steadystate import (SYMPLECTIC, covariance_lyapunov, covariance_residue, diagonalize,
                         lyapunov_residual, mean_phonon, physicality_check, stability,
                         stationary_covariance)


def _point(params):
    derived = derive(params)
    harmonics = build_drift(params, derived, solve_classical(params, derived))
    return harmonics.m0, build_noise(params, derived), derived


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


class TestStationaryCovariance(unittest.TestCase):
    def setUp(self):
        self.m0, self.noise, self.derived = _point(DEFAULT)

    def test_default_is_stable(self):
        stable, eigvals = stability(self.m0)
        self.assertTrue(stable)
        self.assertEqual(eigvals.shape, (6,))
        self.assertTrue(np.all(np.diff(eigvals.imag) >= 0))

    def test_residue_matches_lyapunov(self):
        v_sym = stationary_covariance(self.m0, self.noise.c_mat).v_sym
        v_lyap = covariance_lyapunov(self.m0, self.noise.d_mat)
        self.assertLess(_relative(v_sym, v_lyap), 1e-8)

    def test_lyapunov_methods_agree(self):
        reference = covariance_lyapunov(self.m0, self.noise.d_mat, 'schur')
        for method in ('auto', 'eigen', 'direct'):
            v = covariance_lyapunov(self.m0, self.noise.d_mat, method)
            self.assertLess(_relative(v, reference), 1e-8, method)
            np.testing.assert_array_equal(v, v.T)

    def test_lyapunov_residual_small(self):
        v = covariance_lyapunov(self.m0, self.noise.d_mat)
        scale = np.linalg.norm(self.m0) * np.linalg.norm(v)
        self.assertLess(lyapunov_residual(self.m0, v, self.noise.d_mat) / scale, 1e-10)

    def test_antisymmetric_part_is_commutator(self):
        v = covariance_residue(self.m0, self.noise.c_mat)
        np.testing.assert_allclose(v - v.T, 1j * SYMPLECTIC, atol=1e-6)

    def test_physical_state(self):
        v = covariance_lyapunov(self.m0, self.noise.d_mat)
        report = physicality_check(v)
        self.assertTrue(report.physical)
        self.assertEqual(len(report.heisenberg), 3)
        self.assertGreater(mean_phonon(v, 1), 0.0)
        self.assertGreater(mean_phonon(v, 2), 0.0)

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            covariance_lyapunov(self.m0, self.noise.d_mat, 'magic')


class TestDecoupled(unittest.TestCase):
    """Without optomechanical or loop coupling every mode thermalizes with its bath"""

    def test_thermal_occupancies(self):
        p = replace(DEFAULT, g1_mag=0.0, g2_mag=0.0, mu_mag=0.0)
        m0, noise, derived = _point(p)
        v = covariance_lyapunov(m0, noise.d_mat)
        self.assertAlmostEqual(mean_phonon(v, 0), 0.0, places=9)
        self.assertAlmostEqual(mean_phonon(v, 1) / derived.n_m, 1.0, places=9)
        self.assertAlmostEqual(mean_phonon(v, 2) / derived.n_m, 1.0, places=9)


class TestDegenerateDrift(unittest.TestCase):
    def setUp(self):
        # Jordan block in the first pair, simple decay elsewhere
        self.m0 = np.diag([-1.0, -1.0, -2.0, -2.0, -3.0, -3.0])
        self.m0[0, 1] = 1.0
        self.d_mat = np.eye(6)

    def test_diagonalize_detects_defect(self):
        with self.assertRaises(DefectiveMatrix) as ctx:
            diagonalize(self.m0)
        self.assertGreater(ctx.exception.cond_u, 1e12)

    def test_eigen_method_refuses(self):
        with self.assertRaises(DefectiveMatrix):
            covariance_lyapunov(self.m0, self.d_mat, 'eigen')

    def test_auto_falls_back(self):
        v = covariance_lyapunov(self.m0, self.d_mat, 'auto')
        reference = covariance_lyapunov(self.m0, self.d_mat, 'schur')
        np.testing.assert_allclose(v, reference, rtol=1e-12, atol=1e-14)
        self.assertLess(lyapunov_residual(self.m0, v, self.d_mat), 1e-12)


class TestInstability(unittest.TestCase):
    def test_growing_mode(self):
        m0 = np.diag([0.5, -1.0, -1.0, -1.0, -1.0, -1.0])
        with self.assertRaises(Unstable) as ctx:
            covariance_lyapunov(m0, np.eye(6))
        self.assertAlmostEqual(ctx.exception.max_real, 0.5)

    def test_marginal_mode_has_no_steady_state(self):
        m0 = np.diag([0.0, -1.0, -1.0, -2.0, -2.0, -3.0])
        with self.assertRaises(Unstable):
            covariance_residue(m0, np.eye(6))


class TestObservables(unittest.TestCase):
    def test_mean_phonon(self):
        v = np.diag([0.5, 0.5, 3.5, 3.5, 0.5, 0.5])
        self.assertEqual(mean_phonon(v, 0), 0.0)
        self.assertEqual(mean_phonon(v, 1), 3.0)
        self.assertEqual(mean_phonon(v, 2), 0.0)

    def test_vacuum_saturates_uncertainty(self):
        report = physicality_check(0.5 * np.eye(6))
        self.assertTrue(report.physical)
        self.assertAlmostEqual(report.min_eigenvalue, 0.0, places=12)
        self.assertEqual(report.heisenberg, (0.25, 0.25, 0.25))

    def test_below_vacuum_is_unphysical(self):
        report = physicality_check(0.1 * np.eye(6))
        self.assertFalse(report.physical)
        self.assertLess(report.min_eigenvalue, 0.0)


if __name__ == '__main__':
    unittest.main()
