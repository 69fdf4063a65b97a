"""
Dataset Output
--------------
CSV tables for sweeps, JSON documents for EP points and reports, and the run
manifest that echoes the configuration so a run can be reproduced exactly.

CSV format: header row of name[unit] column labels, decimal numbers with 17
significant digits, '.' separator, LF line endings.
"""

import json
import platform
import re
import time
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from config import RunConfig, VERSION
from observables import SweepResult, unit_header

FLOAT_FORMAT = '%.17g'
UNIT_TAG = re.compile(r'\[[^\]]*\]$')


def _jsonable(value):
    """Convert numpy scalars/arrays and complex numbers for json.dump"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = result.to_frame().rename(columns=unit_header)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', na_rep='nan')
    return path


def read_csv(path) -> pd.DataFrame:
    """Dataset with the unit tags stripped from the column names"""
    frame = pd.read_csv(path, float_precision='round_trip')
    return frame.rename(columns=lambda header: UNIT_TAG.sub('', header))


def write_json(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(_jsonable(document), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def versions() -> dict:
    return {'optoloop': VERSION, 'python': platform.python_version(),
            'numpy': np.__version__, 'scipy': scipy.__version__, 'pandas': pd.__version__}


class RunManifest:
    """Collects outputs and failures of one CLI run, timed from creation"""

    def __init__(self, command: str, cfg: RunConfig, argv=None):
        self.command = command
        self.cfg = cfg
        self.argv = list(argv or [])
        self.outputs = []
        self.failures = []
        self.status = 'ok'
        self._start = time.perf_counter()

    def add_output(self, path: Path):
        self.outputs.append(str(path))

    def add_failures(self, failures):
        self.failures.extend(failures)

    def to_dict(self) -> dict:
        return {
            'command': self.command,
            'argv': self.argv,
            'config': self.cfg.to_dict(),
            'versions': versions(),
            'wall_time_s': time.perf_counter() - self._start,
            'outputs': self.outputs,
            'failures': self.failures,
            'status': self.status,
        }

    def write(self, directory) -> Path:
        return write_json(self.to_dict(), Path(directory) / f'{self.command}_manifest.json')
