import unittest
from unittest import mock

import numpy as np

from config import DEFAULTS
from core import QUADRATURE_NAMES, Simulator, evaluate_node, run_nodes
from errors import Unstable
from params import DEFAULT, preset


class TestRunNodes(unittest.TestCase):
    def test_sequential_keeps_order(self):
        self.assertEqual(run_nodes(abs, [-3, 1, -2]), [3, 1, 2])

    def test_pool_matches_sequential(self):
        nodes = list(range(-20, 20))
        self.assertEqual(run_nodes(abs, nodes, workers=2), run_nodes(abs, nodes, workers=1))

    def test_empty(self):
        self.assertEqual(run_nodes(abs, [], workers=4), [])


class TestSimulator(unittest.TestCase):
    def test_pipeline_is_cached(self):
        sim = Simulator(DEFAULT)
        self.assertIs(sim.classical, sim.classical)
        self.assertIs(sim.harmonics, sim.harmonics)
        self.assertEqual(sim.harmonics.m0.shape, (6, 6))
        self.assertTrue(sim.stability[0])

    def test_config_reaches_floquet(self):
        sim = Simulator(preset('squeezing'), DEFAULTS)
        fc = sim.floquet(n_zones=1)
        self.assertEqual(fc.n_zones, 1)
        self.assertIsNone(fc.v2)


class TestEvaluateNode(unittest.TestCase):
    def test_stationary_record(self):
        record = evaluate_node((DEFAULT, DEFAULTS, 'stationary'))
        self.assertTrue(record['stable'])
        self.assertEqual(record['failure'], '')
        self.assertTrue(np.isfinite(record['nbar1']))
        self.assertTrue(np.isfinite(record['nbar2']))
        self.assertLess(record['max_real'], 0.0)

    def test_floquet_record(self):
        record = evaluate_node((preset('squeezing'), DEFAULTS, 'floquet'))
        for name in QUADRATURE_NAMES:
            self.assertIn(f'vmin_{name}', record)
            self.assertIn(f'sq_db_{name}', record)
        self.assertLessEqual(record['convergence'], DEFAULTS.floquet.rel_tol)

    def test_numerical_failure_is_captured(self):
        with mock.patch.object(Simulator, 'lyapunov', side_effect=Unstable('forced', max_real=1.0)):
            record = evaluate_node((DEFAULT, DEFAULTS, 'stationary'))
        self.assertEqual(record['failure'], 'Unstable')
        self.assertEqual(record['message'], 'forced')
        self.assertTrue(np.isnan(record['nbar1']))

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            evaluate_node((DEFAULT, DEFAULTS, 'transient'))


if __name__ == '__main__':
    unittest.main()
