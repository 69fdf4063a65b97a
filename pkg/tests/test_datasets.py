import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from config import DEFAULTS, load_config
from datasets import RunManifest, read_csv, versions, write_csv, write_json
from observables import (AXIS_SETTERS, COLUMN_UNITS, FLOQUET_COLUMNS, LOCI_COLUMNS,
                         STATIONARY_COLUMNS, SURFACE_COLUMNS, SURFACE_RESULT_COLUMNS, SweepResult)
from spectral import EpPoint

SCHEMAS = Path(__file__).resolve().parent.parent / 'schemas'


def required(schema_name):
    return set(json.loads((SCHEMAS / schema_name).read_text(encoding='utf-8'))['required'])


class TestCsv(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.result = SweepResult(
            name='t', axes=[], columns=('x', 'nbar', 'stable'),
            values=[{'x': 0.1, 'nbar': np.nan, 'stable': True, 'extra': 'dropped'},
                    {'x': 1.0, 'nbar': 2.5, 'stable': False}],
            preset_fingerprint='0' * 16)

    def tearDown(self):
        self.tmp.cleanup()

    def test_format(self):
        path = write_csv(self.result, self.dir / 'sub' / 't.csv')
        raw = path.read_bytes()
        self.assertNotIn(b'\r', raw)
        self.assertEqual(raw.decode('utf-8'),
                         'x,nbar,stable[bool]\n0.10000000000000001,nan,1\n1,2.5,0\n')

    def test_full_precision_survives(self):
        path = write_csv(self.result, self.dir / 't.csv')
        frame = read_csv(path)
        self.assertEqual(frame['x'][0], 0.1)
        self.assertTrue(np.isnan(frame['nbar'][0]))

    def test_headers_name_units(self):
        result = SweepResult(
            name='t', axes=[], columns=('panel', 'temperature_k', 'phi_over_pi', 'nbar2', 'sq_db_2'),
            values=[{'panel': 'phase', 'temperature_k': 1.9, 'phi_over_pi': 0.5,
                     'nbar2': 0.6, 'sq_db_2': 1.5}],
            preset_fingerprint='0' * 16)
        path = write_csv(result, self.dir / 'units.csv')
        header = path.read_text(encoding='utf-8').splitlines()[0]
        self.assertEqual(header,
                         'panel,temperature_k[K],phi_over_pi[pi rad],nbar2[quanta],sq_db_2[dB]')
        frame = read_csv(path)
        self.assertEqual(list(frame.columns), list(result.columns))
        self.assertEqual(frame['sq_db_2'][0], 1.5)

    def test_every_recipe_column_has_a_unit(self):
        labels = {'panel', 'branch', 'locus'}
        for columns in (STATIONARY_COLUMNS, FLOQUET_COLUMNS, LOCI_COLUMNS, SURFACE_RESULT_COLUMNS,
                        tuple(AXIS_SETTERS), tuple(SURFACE_COLUMNS.values())):
            for name in columns:
                if name not in labels:
                    self.assertIn(name, COLUMN_UNITS)


class TestJson(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_conversion(self):
        path = write_json({'z': 1 + 2j, 'a': np.array([1.0, np.inf]), 'b': np.bool_(True),
                           'n': np.int64(3)}, self.dir / 'doc.json')
        text = path.read_text(encoding='utf-8')
        self.assertTrue(text.endswith('}\n'))
        self.assertLess(text.index('"a"'), text.index('"z"'))
        self.assertEqual(json.loads(text), {'z': [1.0, 2.0], 'a': [1.0, None], 'b': True, 'n': 3})

    def test_ep_point_document(self):
        point = EpPoint(mu_mag=1.0, mu_over_gamma_sum=52.5, phi=1.2, chirality='clockwise',
                        branch='upper', residual=1e-6, omega_ep=1.04, overlap=0.999999,
                        eigenvalue=-1.0 + 2.0j)
        self.assertTrue(required('ep_point.json') <= set(point.to_dict()))


class TestManifest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_document(self):
        manifest = RunManifest('figure', DEFAULTS, ['figure', 'fig4_mu_phase_map'])
        manifest.add_output(self.dir / 'fig4_mu_phase_map.csv')
        manifest.add_failures([{'index': 3, 'failure': 'Unstable', 'message': 'x'}])
        data = manifest.to_dict()
        self.assertEqual(set(data), required('manifest.json'))
        self.assertEqual(set(versions()), {'optoloop', 'python', 'numpy', 'scipy', 'pandas'})
        self.assertGreaterEqual(data['wall_time_s'], 0.0)
        self.assertEqual(data['status'], 'ok')

    def test_manifest_reproduces_config(self):
        path = RunManifest('steady', DEFAULTS).write(self.dir)
        self.assertEqual(path.name, 'steady_manifest.json')
        self.assertEqual(load_config(path), DEFAULTS)


if __name__ == '__main__':
    unittest.main()
