import unittest
from dataclasses import replace
from unittest import mock

import numpy as np
import pytest

from errors import ConfigError
from floquet import FloquetCovariance
from observables import (AXIS_SETTERS, RECIPES, AxisSpec, Panel, figure_recipe, fingerprint,
                         min_variance_db, squeezing_db)
from params import DEFAULT, EP1_MU_OVER_GAMMA_SUM, derive, mu_over_gamma_sum, preset


class TestSqueezing(unittest.TestCase):
    def test_vacuum_reference(self):
        self.assertEqual(squeezing_db(0.5), 0.0)
        self.assertAlmostEqual(squeezing_db(0.25), 3.0103, places=4)
        self.assertAlmostEqual(squeezing_db(1.0), -3.0103, places=4)

    def test_non_positive_variance(self):
        for v in (0.0, -0.1, float('nan')):
            with self.assertRaises(ValueError):
                squeezing_db(v)

    def test_better_quadrature(self):
        v0 = np.array([0.5, 0.5, 1.0, 0.25, 2.0, 3.0])
        fc = FloquetCovariance(v0=v0, v1=np.zeros(6, complex), convergence=0.0,
                               n_zones=2, Omega=1.0)
        self.assertAlmostEqual(min_variance_db(fc, 1), 3.0103, places=4)
        self.assertAlmostEqual(min_variance_db(fc, 2), -6.0206, places=4)


class TestFingerprint(unittest.TestCase):
    def test_stable_and_short(self):
        self.assertEqual(fingerprint(DEFAULT), fingerprint(replace(DEFAULT)))
        self.assertEqual(len(fingerprint(DEFAULT)), 16)
        int(fingerprint(DEFAULT), 16)

    def test_sensitive_to_parameters(self):
        self.assertNotEqual(fingerprint(DEFAULT), fingerprint(preset('squeezing')))


class TestAxes(unittest.TestCase):
    def test_linear_and_log(self):
        resolution = {'points_1d': 5}
        np.testing.assert_allclose(AxisSpec('x', span=(0.0, 2.0)).values(resolution),
                                   [0.0, 0.5, 1.0, 1.5, 2.0])
        np.testing.assert_allclose(AxisSpec('x', span=(1.0, 100.0), log=True).values(resolution),
                                   [1.0, 10 ** 0.5, 10.0, 10 ** 1.5, 100.0])
        self.assertEqual(list(AxisSpec('x', levels=(3, 1)).values(resolution)), [3.0, 1.0])

    def test_setters(self):
        panel = Panel('p', 'stationary', (), mu_ref=50.0)
        p = AXIS_SETTERS['mu_over_ep1'](DEFAULT, 1.2, panel)
        self.assertAlmostEqual(mu_over_gamma_sum(p), 60.0)
        p = AXIS_SETTERS['phi_over_pi'](DEFAULT, 0.25, panel)
        self.assertAlmostEqual(derive(p).loop_phase, np.pi / 4)
        p = AXIS_SETTERS['depth'](DEFAULT, 0.4, panel)
        self.assertEqual(p.depths, {-1: 0.0, 1: 0.4})
        p = AXIS_SETTERS['delta_over_omega_m'](DEFAULT, 0.9, panel)
        self.assertAlmostEqual(p.delta / p.omega_m, 0.9)


class TestRecipes(unittest.TestCase):
    def test_catalogue(self):
        for name in ('fig3_phase_sweep', 'fig4_mu_phase_map', 'fig5_loci', 'fig6_temperature',
                     'fig7_surfaces', 'fig8_squeezing', 'fig9_detuning'):
            self.assertIn(name, RECIPES)

    def test_mu_phase_map(self):
        result = figure_recipe('fig4_mu_phase_map', {'points_2d': 3})
        self.assertEqual(result.columns, ('mu_over_ep1', 'phi_over_pi', 'nbar1', 'nbar2', 'stable'))
        self.assertEqual(len(result.values), 9)
        np.testing.assert_allclose(result.column('mu_over_ep1'), np.repeat([0.8, 1.25, 1.7], 3))
        np.testing.assert_allclose(result.column('phi_over_pi'), np.tile([0.0, 0.5, 1.0], 3))
        frame = result.to_frame()
        self.assertEqual(list(frame.columns), list(result.columns))
        self.assertTrue(set(frame['stable'].unique()) <= {0, 1})
        self.assertEqual(result.preset_fingerprint, fingerprint(DEFAULT))

    def test_loop_phase_mirrors_resonators(self):
        result = figure_recipe('fig3_phase_sweep', {'points_1d': 5})
        self.assertEqual(len(result.values), 10)
        rows = {(r['mu_over_gamma_sum'], r['phi_over_pi']): r for r in result.values}
        for phi in (0.0, 0.5):
            a = rows[(EP1_MU_OVER_GAMMA_SUM, phi)]
            b = rows[(EP1_MU_OVER_GAMMA_SUM, 2.0 - phi)]
            self.assertAlmostEqual(a['nbar1'] / b['nbar2'], 1.0, places=6)
            self.assertAlmostEqual(a['nbar2'] / b['nbar1'], 1.0, places=6)

    def test_setting_override_forks_fixed_value(self):
        result = figure_recipe('fig4_mu_phase_map', {'points_2d': 2, 'temperature_k': 4.0})
        self.assertIn('temperature_k', result.columns)
        self.assertTrue(np.all(result.column('temperature_k') == 4.0))

    def test_param_override_changes_fingerprint(self):
        result = figure_recipe('fig4_mu_phase_map', {'points_2d': 2, 't_mech_k': 4.0})
        self.assertNotEqual(result.preset_fingerprint, fingerprint(DEFAULT))

    def test_loci_rows(self):
        result = figure_recipe('fig5_loci', {'points_1d': 3})
        self.assertEqual(len(result.values), 6 * 3 * 3)
        self.assertEqual(result.columns, ('mu_over_gamma_sum', 'phi_over_pi', 'locus',
                                          'damping_over_omega_m', 'frequency_over_omega_m'))
        self.assertTrue(np.all(result.column('frequency_over_omega_m') > 0))

    def test_failures_are_recorded(self):
        def flaky(task):
            params, cfg, mode = task
            if derive(params).loop_phase == 0.0:
                return {'stable': False, 'nbar1': np.nan, 'nbar2': np.nan,
                        'failure': 'Unstable', 'message': 'forced'}
            return {'stable': True, 'nbar1': 1.0, 'nbar2': 2.0, 'failure': '', 'message': ''}

        with mock.patch('observables.evaluate_node', side_effect=flaky):
            result = figure_recipe('fig4_mu_phase_map', {'points_2d': 2})
        self.assertEqual(len(result.values), 4)
        self.assertEqual([f['index'] for f in result.failures], [0, 2])
        self.assertEqual(result.failures[0]['failure'], 'Unstable')
        self.assertTrue(np.isnan(result.column('nbar1')[0]))
        self.assertEqual(result.argmin('nbar2')['nbar2'], 2.0)

    def test_multi_panel_has_panel_column(self):
        result = figure_recipe('kappa_power_sweep', {'points_1d': 2})
        self.assertEqual(result.columns[0], 'panel')
        self.assertEqual(sorted(set(result.column('panel'))), ['kappa', 'power'])
        self.assertEqual(len(result.column('nbar2', panel='kappa')), 2)

    def test_unknown_names(self):
        with self.assertRaises(ConfigError):
            figure_recipe('fig99')
        with self.assertRaises(ConfigError):
            figure_recipe('fig4_mu_phase_map', {'colour': 1.0})


@pytest.mark.slow
class TestFigureTrends(unittest.TestCase):
    def test_cooling_optimum_near_first_ep(self):
        result = figure_recipe('fig4_mu_phase_map', {'points_2d': 31})
        best = result.argmin('nbar2')
        self.assertGreater(best['mu_over_ep1'], 1.0)
        self.assertLess(best['mu_over_ep1'], 80.45 / EP1_MU_OVER_GAMMA_SUM)
        self.assertLess(best['nbar2'], 1.0)

    def test_occupancy_grows_with_temperature(self):
        result = figure_recipe('fig6_temperature', {'points_1d': 12})
        for phi in (0.25, 0.5, 0.75):
            rows = [r for r in result.values if r['phi_over_pi'] == phi]
            nbar = [r['nbar2'] for r in rows]
            self.assertTrue(np.all(np.diff(nbar) > 0))

    def test_squeezing_needs_depth(self):
        result = figure_recipe('fig8_squeezing', {'points_1d': 11})
        phase = [r for r in result.values if r['panel'] == 'phase']
        self.assertTrue(all(not r['sq_db_2'] > 0 for r in phase if r['depth'] == 0.0))
        self.assertGreater(np.nanmax([r['sq_db_2'] for r in phase if r['depth'] == 0.7]), 0.0)


if __name__ == '__main__':
    unittest.main()
