"""
Configuration Management
------------------------
Run configuration: solver tolerances, quadrature and search settings, sweep
layout, and the parameter override grammar of config files and `--set`.
"""

import json
import os
from dataclasses import dataclass, field, fields, replace, asdict
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from errors import ConfigError
from params import (SystemParams, TWO_PI, preset, with_loop_phase,
                    with_mu_over_gamma_sum, validate)

VERSION = '1.0.0'
WORKERS_ENV = 'OPTOLOOP_WORKERS'


@dataclass(frozen=True)
class ClassicalConfig:
    """Damped fixed-point iteration for the mean-field sidebands"""
    beta: float = 0.5
    tol: float = 1e-12
    max_iter: int = 10000
    stagnation_window: int = 200
    newton_max_iter: int = 50


@dataclass(frozen=True)
class FloquetConfig:
    """Frequency-domain integration of the covariance harmonics"""
    n_zones: int = 2
    l_max: int = 1
    gl_order: int = 8
    panel_fraction: float = 0.25      # uniform panel width in units of kappa
    grading_ratio: float = 1.5
    tail_nodes: int = 48
    rel_tol: float = 1e-6
    richardson: bool = True


@dataclass(frozen=True)
class SearchConfig:
    """Exceptional point search box and acceptance"""
    mu_box: Tuple[float, float] = (40.0, 65.0)     # units of gamma1 + gamma2
    phi_box: Tuple[float, float] = (0.0, float(np.pi))
    grid: int = 64
    accept: float = 1e-4
    xatol: float = 1e-12
    fatol: float = 1e-12
    max_evals: int = 4000
    branch: Optional[str] = None


@dataclass(frozen=True)
class OracleConfig:
    """Fixed-step time-domain reference integration"""
    steps_per_period: int = 200
    settle_rates: float = 50.0        # t_end = settle_rates / min(gamma1, gamma2)
    blowup: float = 1e12
    shooting_tol: float = 1e-12
    shooting_max_iter: int = 20


@dataclass(frozen=True)
class SweepConfig:
    points_1d: int = 201
    points_2d: int = 101
    surface_points: int = 21
    workers: Optional[int] = None
    output_dir: str = 'out'


@dataclass(frozen=True)
class RunConfig:
    preset: str = 'default'
    params: Dict[str, float] = field(default_factory=dict)
    classical: ClassicalConfig = field(default_factory=ClassicalConfig)
    floquet: FloquetConfig = field(default_factory=FloquetConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def system_params(self) -> SystemParams:
        return resolve_params(self.preset, self.params)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['params'] = dict(self.params)
        return data


# Global configuration instance
DEFAULTS = RunConfig()

_SECTIONS = {
    'classical': ClassicalConfig,
    'floquet': FloquetConfig,
    'search': SearchConfig,
    'oracle': OracleConfig,
    'sweep': SweepConfig,
}

# [params] key -> (SystemParams field, scale to internal units)
_DIRECT_KEYS = {
    'omega_m_hz': ('omega_m', TWO_PI),
    'kappa_hz': ('kappa', TWO_PI),
    'gamma1_hz': ('gamma1', TWO_PI),
    'gamma2_hz': ('gamma2', TWO_PI),
    'g1_hz': ('g1_mag', TWO_PI),
    'g2_hz': ('g2_mag', TWO_PI),
    'mu_hz': ('mu_mag', TWO_PI),
    'delta_hz': ('delta', TWO_PI),
    'omega_mod_hz': ('Omega_mod', TWO_PI),
    'phi1_rad': ('phi1', 1.0),
    'phi2_rad': ('phi2', 1.0),
    'phi_mu_rad': ('phi_mu', 1.0),
    'eta': ('eta', 1.0),
    'power_w': ('power', 1.0),
    'lambda_laser_m': ('lambda_laser', 1.0),
    't_cavity_k': ('T_cavity', 1.0),
    't_mech_k': ('T_mech', 1.0),
}
_RELATIVE_KEYS = ('mu_over_gamma_sum', 'delta_over_omega_m',
                  'omega_mod_over_omega_m', 'loop_phase_rad')
_DEPTH_KEYS = {'depth_p1': 1, 'depth_m1': -1}
_EXCLUSIVE = (('mu_hz', 'mu_over_gamma_sum'),
              ('delta_hz', 'delta_over_omega_m'),
              ('omega_mod_hz', 'omega_mod_over_omega_m'),
              ('phi_mu_rad', 'loop_phase_rad'))

PARAM_KEYS = tuple(_DIRECT_KEYS) + _RELATIVE_KEYS + tuple(_DEPTH_KEYS)


def resolve_params(preset_name: str, overrides: Dict[str, float]) -> SystemParams:
    """Apply [params] overrides on top of a named preset.

    Absolute keys are applied first, then keys expressed relative to other
    parameters, so `mu_over_gamma_sum` sees an overridden gamma.
    """
    for key in overrides:
        if key not in PARAM_KEYS:
            raise ConfigError(f"unknown [params] key {key!r}")
    for a, b in _EXCLUSIVE:
        if a in overrides and b in overrides:
            raise ConfigError(f"[params] keys {a!r} and {b!r} are mutually exclusive")

    params = preset(preset_name)
    changes = {}
    for key, (name, scale) in _DIRECT_KEYS.items():
        if key in overrides:
            changes[name] = float(overrides[key]) * scale
    depths = dict(params.depths)
    for key, n in _DEPTH_KEYS.items():
        if key in overrides:
            depths[n] = float(overrides[key])
    changes['depths'] = depths
    params = replace(params, **changes)

    if 'delta_over_omega_m' in overrides:
        params = replace(params, delta=float(overrides['delta_over_omega_m']) * params.omega_m)
    if 'omega_mod_over_omega_m' in overrides:
        params = replace(params, Omega_mod=float(overrides['omega_mod_over_omega_m']) * params.omega_m)
    if 'mu_over_gamma_sum' in overrides:
        params = with_mu_over_gamma_sum(params, overrides['mu_over_gamma_sum'])
    if 'loop_phase_rad' in overrides:
        params = with_loop_phase(params, overrides['loop_phase_rad'])
    validate(params)
    return params


def _coerce(value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ('true', 'false'):
            return value.lower() == 'true'
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = value.split(':')
        if len(value) != len(default):
            raise ConfigError(f"expected {len(default)} values, got {value!r}")
        return tuple(float(v) for v in value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def _build_section(cls, table: dict):
    base = cls()
    known = {f.name: f for f in fields(cls)}
    changes = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{cls.__name__}]")
        default = getattr(base, key)
        try:
            changes[key] = value if default is None else _coerce(value, default)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return replace(base, **changes)


def build_run_config(raw: dict) -> RunConfig:
    """Validate a parsed config document and return a RunConfig"""
    raw = dict(raw)
    unknown = set(raw) - {'preset', 'params'} - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config table(s): {sorted(unknown)}")
    preset_name = raw.get('preset', DEFAULTS.preset)
    params = {k: _as_number(k, v) for k, v in dict(raw.get('params', {})).items()}
    sections = {name: _build_section(cls, raw.get(name, {})) for name, cls in _SECTIONS.items()}
    cfg = RunConfig(preset=preset_name, params=params, **sections)
    cfg.system_params()
    if cfg.floquet.l_max not in (1, 2):
        raise ConfigError("floquet.l_max must be 1 or 2")
    if cfg.floquet.n_zones < 0:
        raise ConfigError("floquet.n_zones must be >= 0")
    if cfg.search.branch not in (None, 'upper', 'lower'):
        raise ConfigError("search.branch must be 'upper' or 'lower'")
    return cfg


def _as_number(key, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[params] {key!r} must be numeric, got {value!r}") from None


def load_config(path) -> RunConfig:
    """Read a TOML file, or a JSON file such as a run manifest's config echo"""
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    try:
        if path.suffix.lower() == '.json':
            raw = json.loads(text)
            raw = raw.get('config', raw)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return build_run_config(raw)


def parse_overrides(items) -> Dict[str, float]:
    """Parse `--set key=value` items into [params] overrides"""
    overrides = {}
    for item in items or ():
        key, sep, value = item.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        if key not in PARAM_KEYS:
            raise ConfigError(f"unknown [params] key {key!r}")
        overrides[key] = _as_number(key, value.strip())
    return overrides


def with_params(cfg: RunConfig, overrides: Dict[str, float]) -> RunConfig:
    merged = dict(cfg.params)
    merged.update(overrides)
    new = replace(cfg, params=merged)
    new.system_params()
    return new


def default_workers(cfg: RunConfig = DEFAULTS) -> int:
    """Worker count: config, then $OPTOLOOP_WORKERS, then available cores"""
    if cfg.sweep.workers:
        return max(1, int(cfg.sweep.workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1
