"""
Observables and Figure Recipes
------------------------------
Reported quantities (squeezing in dB, mean phonon numbers) and the named
sweeps that regenerate each figure's dataset.

A recipe is data: one or more panels, each with fixed settings and swept
axes. Nodes of a panel are the cartesian product of its axes, first axis
slowest. Every setting is applied through AXIS_SETTERS, so any fixed value
can be forked with an override of the same name.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import RunConfig, DEFAULTS, PARAM_KEYS, resolve_params
from core import evaluate_node, run_nodes
from debug import DEBUG
from errors import ConfigError
from floquet import FloquetCovariance
from params import (SystemParams, EP1_MU_OVER_GAMMA_SUM, EP2_MU_OVER_GAMMA_SUM,
                    EP1_MODULATED_D04, EP1_MODULATED_D05, with_depth,
                    with_loop_phase, with_mu_over_gamma_sum, with_temperature)
from spectral import SurfaceAxis, apply_axis, eigen_loci, trace_surface

VACUUM = 0.5
RESONATOR_QUADRATURES = {1: (2, 3), 2: (4, 5)}


def squeezing_db(v_min: float) -> float:
    """-10 log10(v_min / 0.5); positive below the vacuum variance"""
    v_min = float(v_min)
    if not v_min > 0:
        raise ValueError(f"variance must be positive, got {v_min!r}")
    return -10.0 * np.log10(v_min / VACUUM)


def min_variance_db(fc: FloquetCovariance, resonator: int) -> float:
    """Squeezing of the better quadrature of resonator 1 or 2"""
    ix, iy = RESONATOR_QUADRATURES[resonator]
    return squeezing_db(min(fc.v_min[ix], fc.v_min[iy]))


def fingerprint(params: SystemParams) -> str:
    """Stable hash of the full parameter set"""
    text = json.dumps(params.to_dict(), sort_keys=True, default=repr)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


# -- axis settings ----------------------------------------------------------

def _set_delta(params, value, panel):
    return replace(params, delta=value * params.omega_m)


AXIS_SETTERS = {
    'phi_over_pi': lambda p, v, panel: with_loop_phase(p, v * np.pi),
    'mu_over_gamma_sum': lambda p, v, panel: with_mu_over_gamma_sum(p, v),
    'mu_over_ep1': lambda p, v, panel: with_mu_over_gamma_sum(p, v * panel.mu_ref),
    'temperature_k': lambda p, v, panel: with_temperature(p, v),
    'depth': lambda p, v, panel: with_depth(p, v, 1),
    'delta_over_omega_m': _set_delta,
    'kappa_over_kappa_c': lambda p, v, panel: apply_axis(p, 'kappa', v),
    'power_over_power_c': lambda p, v, panel: apply_axis(p, 'power', v),
}

# surface axis name -> CSV column
SURFACE_COLUMNS = {
    'kappa': 'kappa_over_kappa_c',
    'power': 'power_over_power_c',
    'gamma': 'gamma_over_gamma_c',
    'g1': 'g1_over_g1_c',
    'g2': 'g2_over_g2_c',
    'delta': 'delta_over_omega_m',
}


@dataclass(frozen=True)
class AxisSpec:
    """Swept setting: explicit levels, or `points` samples of span (log spaced if log)"""
    name: str
    levels: Optional[Tuple[float, ...]] = None
    span: Optional[Tuple[float, float]] = None
    points: str = 'points_1d'
    log: bool = False

    def values(self, resolution: Dict[str, int]) -> np.ndarray:
        if self.levels is not None:
            return np.asarray(self.levels, dtype=float)
        n = int(resolution[self.points])
        if self.log:
            return np.geomspace(self.span[0], self.span[1], n)
        return np.linspace(self.span[0], self.span[1], n)


@dataclass(frozen=True)
class Panel:
    label: str
    mode: str                                   # stationary | floquet | loci | surface
    axes: Tuple[AxisSpec, ...]
    fixed: Dict[str, float] = field(default_factory=dict)
    mu_ref: float = EP1_MU_OVER_GAMMA_SUM


@dataclass(frozen=True)
class Recipe:
    name: str
    preset: str
    panels: Tuple[Panel, ...]
    description: str = ''


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: np.ndarray
    unit: str = ''


@dataclass
class SweepResult:
    name: str
    axes: List[SweepAxis]
    columns: Tuple[str, ...]
    values: List[dict]
    preset_fingerprint: str
    failures: List[dict] = field(default_factory=list)

    def column(self, name: str, panel: str = None) -> np.ndarray:
        rows = self.values if panel is None else [r for r in self.values if r.get('panel') == panel]
        return np.array([r.get(name, np.nan) for r in rows])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values).reindex(columns=list(self.columns))
        for name in self.columns:
            if frame[name].dtype == bool:
                frame[name] = frame[name].astype(int)
        return frame

    def argmin(self, name: str, panel: str = None, **where) -> dict:
        """Record with the smallest finite `name`, optionally filtered by column values"""
        rows = [r for r in self.values
                if (panel is None or r.get('panel') == panel)
                and all(np.isclose(r.get(k, np.nan), v) for k, v in where.items())
                and np.isfinite(r.get(name, np.nan))]
        if not rows:
            raise ValueError(f"no finite values of {name!r}")
        return min(rows, key=lambda r: r[name])


# CSV header units; columns without an entry are labels or indices
COLUMN_UNITS = {
    'phi_over_pi': 'pi rad', 'phi_ep_over_pi': 'pi rad',
    'temperature_k': 'K',
    'mu_over_gamma_sum': 'gamma1+gamma2', 'mu_ep_over_gamma_sum': 'gamma1+gamma2',
    'mu_over_ep1': '|mu_EP1|',
    'delta_over_omega_m': 'omega_m', 'damping_over_omega_m': 'omega_m',
    'frequency_over_omega_m': 'omega_m', 'omega_ep_over_omega_m': 'omega_m',
    'kappa_over_kappa_c': 'kappa_c', 'power_over_power_c': 'P_c',
    'gamma_over_gamma_c': 'gamma_c', 'g1_over_g1_c': 'g1_c', 'g2_over_g2_c': 'g2_c',
    'depth': '1', 'residual': '1',
    'nbar1': 'quanta', 'nbar2': 'quanta',
    'vmin_x1': 'vacuum/2', 'vmin_y1': 'vacuum/2', 'vmin_x2': 'vacuum/2', 'vmin_y2': 'vacuum/2',
    'sq_db_1': 'dB', 'sq_db_2': 'dB',
    'stable': 'bool', 'found': 'bool',
}


def unit_header(name: str) -> str:
    """CSV header of a column: name[unit], or the bare name without a unit"""
    unit = COLUMN_UNITS.get(name)
    return f'{name}[{unit}]' if unit else name


STATIONARY_COLUMNS = ('nbar1', 'nbar2', 'stable')
FLOQUET_COLUMNS = ('nbar1', 'nbar2', 'vmin_x1', 'vmin_y1', 'vmin_x2', 'vmin_y2',
                   'sq_db_1', 'sq_db_2', 'stable')
LOCI_COLUMNS = ('locus', 'damping_over_omega_m', 'frequency_over_omega_m')
SURFACE_RESULT_COLUMNS = ('branch', 'found', 'mu_ep_over_gamma_sum', 'phi_ep_over_pi',
                          'omega_ep_over_omega_m', 'residual')

_PHI_HALF = {'phi_over_pi': 0.5}

RECIPES = {
    'fig3_phase_sweep': Recipe(
        'fig3_phase_sweep', 'default',
        (Panel('phase', 'stationary',
               (AxisSpec('mu_over_gamma_sum', levels=(EP1_MU_OVER_GAMMA_SUM, EP2_MU_OVER_GAMMA_SUM)),
                AxisSpec('phi_over_pi', span=(0.0, 2.0)))),),
        'mean phonon numbers against loop phase at both EP couplings'),
    'fig4_mu_phase_map': Recipe(
        'fig4_mu_phase_map', 'default',
        (Panel('map', 'stationary',
               (AxisSpec('mu_over_ep1', span=(0.8, 1.7), points='points_2d'),
                AxisSpec('phi_over_pi', span=(0.0, 1.0), points='points_2d'))),),
        'mean phonon numbers over |mu| and loop phase'),
    'fig5_loci': Recipe(
        'fig5_loci', 'default',
        (Panel('loci', 'loci',
               (AxisSpec('mu_over_gamma_sum',
                         levels=tuple(f * EP1_MU_OVER_GAMMA_SUM for f in (0.95, 1.0, 1.05))
                         + tuple(f * EP2_MU_OVER_GAMMA_SUM for f in (0.95, 1.0, 1.05))),
                AxisSpec('phi_over_pi', span=(0.0, 1.0)))),),
        'upper half-plane eigenvalues of M(0) along the loop phase'),
    'kappa_power_sweep': Recipe(
        'kappa_power_sweep', 'default',
        (Panel('kappa', 'stationary', (AxisSpec('kappa_over_kappa_c', span=(0.2, 3.0)),),
               dict(_PHI_HALF)),
         Panel('power', 'stationary', (AxisSpec('power_over_power_c', span=(0.2, 3.0)),),
               dict(_PHI_HALF))),
        'mean phonon numbers against cavity decay rate and pump power'),
    'fig6_temperature': Recipe(
        'fig6_temperature', 'default',
        (Panel('temperature', 'stationary',
               (AxisSpec('phi_over_pi', levels=(0.25, 0.5, 0.75)),
                AxisSpec('temperature_k', span=(1.0, 300.0), log=True))),),
        'mean phonon numbers from cryogenic to room temperature'),
    'fig7_surfaces': Recipe(
        'fig7_surfaces', 'default',
        tuple(Panel(f'{a}-{b}', 'surface',
                    (AxisSpec(a, span=span_a, points='surface_points'),
                     AxisSpec(b, span=span_b, points='surface_points')))
              for a, b, span_a, span_b in (
                  ('kappa', 'power', (0.5, 1.5), (0.5, 1.5)),
                  ('kappa', 'gamma', (0.5, 1.5), (0.5, 1.5)),
                  ('g1', 'g2', (0.5, 1.5), (0.5, 1.5)),
                  ('delta', 'power', (0.8, 1.2), (0.5, 1.5)))),
        'EP magnitudes traced over two-parameter grids'),
    'fig8_squeezing': Recipe(
        'fig8_squeezing', 'squeezing',
        (Panel('phase', 'floquet',
               (AxisSpec('depth', levels=(0.0, 0.3, 0.5, 0.7)),
                AxisSpec('phi_over_pi', span=(0.0, 1.0))),
               {'mu_over_gamma_sum': EP1_MODULATED_D05, 'temperature_k': 1.9}),
         Panel('coupling', 'floquet',
               (AxisSpec('depth', levels=(0.0, 0.3, 0.5, 0.7)),
                AxisSpec('mu_over_ep1', span=(0.0, 2.0))),
               {'phi_over_pi': 0.5, 'temperature_k': 1.9}, mu_ref=EP1_MODULATED_D05)),
        'minimum variances under upper-sideband modulation'),
    'fig9_detuning': Recipe(
        'fig9_detuning', 'default',
        (Panel('cooling', 'stationary',
               (AxisSpec('mu_over_ep1', levels=(0.0, 0.5, 1.0, 1.5)),
                AxisSpec('delta_over_omega_m', span=(0.8, 1.3))),
               {'depth': 0.0, 'temperature_k': 18.1, 'phi_over_pi': 0.5}),
         Panel('squeezing', 'floquet',
               (AxisSpec('mu_over_ep1', levels=(0.0, 0.5, 1.0, 1.5)),
                AxisSpec('delta_over_omega_m', span=(0.8, 1.3))),
               {'depth': 0.4, 'temperature_k': 1.9, 'phi_over_pi': 0.5}, mu_ref=EP1_MODULATED_D04)),
        'cooling and squeezing against detuning'),
}

RESOLUTION_KEYS = ('points_1d', 'points_2d', 'surface_points')


def _split_overrides(recipe: Recipe, overrides: Dict[str, float]):
    """[params] keys, recipe settings and resolution keys"""
    params, settings, resolution = {}, {}, {}
    for key, value in (overrides or {}).items():
        if key in RESOLUTION_KEYS:
            resolution[key] = int(value)
        elif key in AXIS_SETTERS:
            settings[key] = float(value)
        elif key in PARAM_KEYS:
            params[key] = float(value)
        else:
            raise ConfigError(f"unknown override {key!r} for recipe {recipe.name!r}")
    return params, settings, resolution


def _apply(params: SystemParams, settings: Dict[str, float], panel: Panel) -> SystemParams:
    for key, value in settings.items():
        params = AXIS_SETTERS[key](params, value, panel)
    return params


def _mode_columns(mode: str) -> Tuple[str, ...]:
    return {'stationary': STATIONARY_COLUMNS, 'floquet': FLOQUET_COLUMNS,
            'loci': LOCI_COLUMNS, 'surface': SURFACE_RESULT_COLUMNS}[mode]


def _finish_floquet(record: dict):
    for resonator, (qx, qy) in (('1', ('x1', 'y1')), ('2', ('x2', 'y2'))):
        v = min(record.get(f'vmin_{qx}', np.nan), record.get(f'vmin_{qy}', np.nan))
        record[f'sq_db_{resonator}'] = squeezing_db(v) if v > 0 else np.nan


def _loci_node(task):
    params, phis, classical_cfg = task
    return eigen_loci(params, phis * np.pi, classical_cfg).eigvals_per_phi


def _grid_panel(base, panel, settings, resolution, cfg, workers, index_offset):
    grids = [axis.values(resolution) for axis in panel.axes]
    fixed = {k: v for k, v in panel.fixed.items() if k not in settings}
    fixed.update({k: v for k, v in settings.items() if k not in [a.name for a in panel.axes]})
    panel_base = _apply(base, fixed, panel)

    coords = list(product(*grids))
    nodes = []
    for point in coords:
        params = panel_base
        for axis, value in zip(panel.axes, point):
            params = AXIS_SETTERS[axis.name](params, float(value), panel)
        nodes.append((params, cfg, panel.mode))
    records, failures = [], []
    for k, (point, out) in enumerate(zip(coords, run_nodes(evaluate_node, nodes, workers))):
        record = {'panel': panel.label}
        record.update(fixed)
        record.update({axis.name: float(v) for axis, v in zip(panel.axes, point)})
        record.update(out)
        if panel.mode == 'floquet':
            _finish_floquet(record)
        if record.get('failure'):
            failures.append({'index': index_offset + k, 'panel': panel.label,
                             'failure': record['failure'], 'message': record['message']})
        records.append(record)
    return records, failures, grids


def _loci_panel(base, panel, settings, resolution, cfg, workers):
    levels_axis, phi_axis = panel.axes
    levels, phis = levels_axis.values(resolution), phi_axis.values(resolution)
    fixed = {k: v for k, v in {**panel.fixed, **settings}.items()
             if k not in (levels_axis.name, phi_axis.name)}
    panel_base = _apply(base, fixed, panel)
    tasks = [(AXIS_SETTERS[levels_axis.name](panel_base, float(level), panel), phis, cfg.classical)
             for level in levels]
    records = []
    for level, loci in zip(levels, run_nodes(_loci_node, tasks, workers)):
        for j, phi in enumerate(phis):
            for locus in range(loci.shape[1]):
                z = loci[j, locus]
                records.append({'panel': panel.label, levels_axis.name: float(level),
                                phi_axis.name: float(phi), 'locus': locus,
                                'damping_over_omega_m': float(z.real / base.omega_m),
                                'frequency_over_omega_m': float(z.imag / base.omega_m)})
    return records, [], [levels, phis]


def _surface_panel(base, panel, settings, resolution, cfg, workers, index_offset):
    a1, a2 = panel.axes
    fixed = {**panel.fixed, **settings}
    panel_base = _apply(base, fixed, panel)
    axis1 = SurfaceAxis(a1.name, a1.values(resolution))
    axis2 = SurfaceAxis(a2.name, a2.values(resolution))
    surface = trace_surface(panel_base, axis1, axis2, branches=('upper', 'lower'),
                            cfg=cfg.search, classical_cfg=cfg.classical, workers=workers)
    c1, c2 = SURFACE_COLUMNS[a1.name], SURFACE_COLUMNS[a2.name]
    records = []
    for i, v1 in enumerate(axis1.values):
        for j, v2 in enumerate(axis2.values):
            points = {p.branch: p for p in surface.ep_points.get((i, j), [])}
            for branch in ('upper', 'lower'):
                p = points.get(branch)
                records.append({
                    'panel': panel.label, c1: float(v1), c2: float(v2), 'branch': branch,
                    'found': p is not None,
                    'mu_ep_over_gamma_sum': p.mu_over_gamma_sum if p else np.nan,
                    'phi_ep_over_pi': p.phi / np.pi if p else np.nan,
                    'omega_ep_over_omega_m': p.omega_ep if p else np.nan,
                    'residual': p.residual if p else np.nan,
                })
    failures = [{'index': index_offset + i * len(axis2.values) + j, 'panel': panel.label,
                 'failure': 'NotFound', 'message': message}
                for i, j, message in surface.gaps]
    return records, failures, [axis1.values, axis2.values], (c1, c2)


def figure_recipe(name: str, overrides: Dict[str, float] = None, cfg: RunConfig = DEFAULTS,
                  workers: int = 1) -> SweepResult:
    """Run a named recipe. Per-node numerical failures are recorded, not raised"""
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; available: {sorted(RECIPES)}")
    recipe = RECIPES[name]
    param_overrides, settings, resolution_overrides = _split_overrides(recipe, overrides)
    param_overrides = {**cfg.params, **param_overrides}
    base = resolve_params(recipe.preset, param_overrides)
    resolution = {key: getattr(cfg.sweep, key) for key in RESOLUTION_KEYS}
    resolution.update(resolution_overrides)

    records, failures, axes = [], [], []
    axis_columns: List[str] = []
    result_columns: List[str] = []
    for panel in recipe.panels:
        DEBUG.info(f"{recipe.name}: panel {panel.label} ({panel.mode})")
        if panel.mode == 'loci':
            rows, bad, grids = _loci_panel(base, panel, settings, resolution, cfg, workers)
            names = [a.name for a in panel.axes]
        elif panel.mode == 'surface':
            rows, bad, grids, names = _surface_panel(base, panel, settings, resolution, cfg,
                                                    workers, len(records))
        else:
            rows, bad, grids = _grid_panel(base, panel, settings, resolution, cfg, workers,
                                           len(records))
            names = [a.name for a in panel.axes]
            names += [k for k in {**panel.fixed, **settings} if k not in names]
        for axis_name, grid in zip(names, grids):
            axes.append(SweepAxis(axis_name, np.asarray(grid), COLUMN_UNITS.get(axis_name, '')))
        axis_columns += [n for n in names if n not in axis_columns]
        result_columns += [c for c in _mode_columns(panel.mode) if c not in result_columns]
        records.extend(rows)
        failures.extend(bad)

    columns = tuple(axis_columns + result_columns)
    if len(recipe.panels) > 1:
        columns = ('panel',) + columns
    DEBUG.info(f"{recipe.name}: {len(records)} records, {len(failures)} failures")
    return SweepResult(name=recipe.name, axes=axes, columns=columns, values=records,
                       preset_fingerprint=fingerprint(base), failures=failures)
