"""
Core Simulation Engine
----------------------
Point pipeline (derived quantities -> classical sidebands -> drift and noise
-> covariance) and the sweep engine that maps it over parameter nodes.

Sweeps run on a process pool; results are collected in submission order, so
the assembled output does not depend on scheduling or worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from functools import cached_property

import numpy as np

from classical import ClassicalSteadyState, solve_classical
from config import RunConfig, DEFAULTS
from debug import DEBUG
from drift import DriftHarmonics, NoiseMatrices, build_drift, build_noise
from errors import NumericalError
from floquet import FloquetCovariance, floquet_covariance
from params import SystemParams, DerivedParams, derive
from steadystate import (StationaryCovariance, covariance_lyapunov, mean_phonon,
                         stability, stationary_covariance)

QUADRATURE_NAMES = ('xa', 'ya', 'x1', 'y1', 'x2', 'y2')


class _SequentialExecutor:
    """Context manager with the ProcessPoolExecutor interface, without new processes"""

    def __init__(self, *args, **kwargs):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        return False

    @staticmethod
    def map(fn, *iterables, **kwargs):
        return map(fn, *iterables)


def run_nodes(fn, nodes, workers: int = 1) -> list:
    """Apply a top-level function to every node, results in node order"""
    nodes = list(nodes)
    if workers <= 1 or len(nodes) <= 1:
        pool, workers = _SequentialExecutor, 1
    else:
        pool = ProcessPoolExecutor
    chunksize = max(1, len(nodes) // (4 * workers))
    DEBUG.log(f"run_nodes: {len(nodes)} nodes on {workers} worker(s)")
    with pool(max_workers=workers) as executor:
        return list(executor.map(fn, nodes, chunksize=chunksize))


class Simulator:
    """Lazily evaluated pipeline for one parameter point"""

    def __init__(self, params: SystemParams, cfg: RunConfig = DEFAULTS):
        self.params = params
        self.cfg = cfg

    @cached_property
    def derived(self) -> DerivedParams:
        return derive(self.params)

    @cached_property
    def classical(self) -> ClassicalSteadyState:
        return solve_classical(self.params, self.derived, self.cfg.classical)

    @cached_property
    def harmonics(self) -> DriftHarmonics:
        return build_drift(self.params, self.derived, self.classical)

    @cached_property
    def noise(self) -> NoiseMatrices:
        return build_noise(self.params, self.derived)

    @cached_property
    def stability(self):
        return stability(self.harmonics.m0)

    @cached_property
    def stationary(self) -> StationaryCovariance:
        return stationary_covariance(self.harmonics.m0, self.noise.c_mat)

    def lyapunov(self, method: str = 'auto') -> np.ndarray:
        return covariance_lyapunov(self.harmonics.m0, self.noise.d_mat, method)

    def floquet(self, l_max: int = None, n_zones: int = None) -> FloquetCovariance:
        return floquet_covariance(self.harmonics, self.noise, self.params.Omega_mod,
                                  N=n_zones, quadrature_cfg=self.cfg.floquet,
                                  kappa=self.params.kappa, l_max=l_max)


def _failure(record: dict, exc: NumericalError) -> dict:
    record['failure'] = type(exc).__name__
    record['message'] = str(exc)
    return record


def evaluate_node(task) -> dict:
    """Observables at one sweep node.

    task = (params, cfg, mode) with mode 'stationary' (mean phonon numbers
    from the Lyapunov solve) or 'floquet' (variance harmonics and squeezing).
    """
    params, cfg, mode = task
    record = {'stable': False, 'nbar1': np.nan, 'nbar2': np.nan, 'failure': '', 'message': ''}
    sim = Simulator(params, cfg)
    try:
        stable, eigvals = sim.stability
        record['stable'] = stable
        record['max_real'] = float(np.max(eigvals.real))
        if mode == 'stationary':
            v_sym = sim.lyapunov()
            record['nbar1'] = mean_phonon(v_sym, 1)
            record['nbar2'] = mean_phonon(v_sym, 2)
        elif mode == 'floquet':
            fc = sim.floquet()
            record['nbar1'] = float((fc.v0[2] + fc.v0[3] - 1.0) / 2.0)
            record['nbar2'] = float((fc.v0[4] + fc.v0[5] - 1.0) / 2.0)
            for name, v, db in zip(QUADRATURE_NAMES, fc.v_min, fc.squeezing_db):
                record[f'vmin_{name}'] = float(v)
                record[f'sq_db_{name}'] = float(db)
            record['convergence'] = fc.convergence
        else:
            raise ValueError(f"unknown evaluation mode {mode!r}")
    except NumericalError as exc:
        DEBUG.log(f"node failed: {type(exc).__name__}: {exc}")
        return _failure(record, exc)
    return record
