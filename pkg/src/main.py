"""
Main Application Entry
----------------------
- Configuration loading and parameter overrides
- Subcommand dispatch
- Dataset and manifest output
- Error categorization into exit codes
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from config import (RunConfig, DEFAULTS, VERSION, build_run_config, default_workers,
                    load_config, parse_overrides, with_params)
from core import QUADRATURE_NAMES, Simulator
from datasets import RunManifest, write_csv, write_json
from debug import DEBUG
from errors import ConfigError, NumericalError, OptoloopError
from observables import (RECIPES, SURFACE_COLUMNS, SweepAxis, SweepResult, figure_recipe,
                         fingerprint, min_variance_db)
from oracle import periodic_orbit, propagate_covariance, settle_time
from floquet import reconstruct_variance
from spectral import SURFACE_AXES, SurfaceAxis, eigen_loci, find_ep, find_ep_pair, trace_surface
from steadystate import lyapunov_residual, physicality_check

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

COMMANDS = ('steady', 'floquet', 'loci', 'ep-find', 'ep-surface', 'figure', 'oracle-check', 'validate')

# cross-method tolerances of oracle-check
RESIDUE_LYAPUNOV_TOL = 1e-8
ORACLE_COVARIANCE_TOL = 1e-6
ORACLE_CLASSICAL_TOL = 1e-6
ORACLE_FLOQUET_TOL = 1e-4


def _pair(text: str, label: str):
    try:
        lo, hi = (float(v) for v in text.split(':'))
    except ValueError:
        raise ConfigError(f"{label} expects lo:hi, got {text!r}") from None
    if not lo < hi:
        raise ConfigError(f"{label} needs lo < hi, got {text!r}")
    return lo, hi


def _surface_axis(text: str, points: int) -> SurfaceAxis:
    """name:lo:hi with factors on the base value (delta in units of omega_m)"""
    name, _, span = text.partition(':')
    if name not in SURFACE_AXES:
        raise ConfigError(f"surface axis must be one of {SURFACE_AXES}, got {name!r}")
    lo, hi = _pair(span, f'axis {name}')
    return SurfaceAxis(name, np.linspace(lo, hi, points))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--preset', help='named parameter preset (default, squeezing)')
    common.add_argument('--config', type=Path, help='TOML config, or JSON run manifest')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='[params] override, e.g. mu_over_gamma_sum=60')
    common.add_argument('--workers', type=int, help='worker processes for sweeps')
    common.add_argument('-o', '--output', type=Path, help='output directory')
    common.add_argument('-v', '--verbose', action='count', default=0)

    parser = argparse.ArgumentParser(prog='optoloop',
                                     description='Closed-loop optomechanics simulator')
    parser.add_argument('--version', action='version', version=f'%(prog)s {VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('steady', parents=[common], help='stationary covariance at one point')
    p = sub.add_parser('floquet', parents=[common], help='variance harmonics under modulation')
    p.add_argument('--l-max', type=int, choices=(1, 2))
    p.add_argument('--zones', type=int)
    p = sub.add_parser('loci', parents=[common], help='eigenvalue loci along the loop phase')
    p.add_argument('--points', type=int)
    p = sub.add_parser('ep-find', parents=[common], help='locate an exceptional point')
    p.add_argument('--box-mu', help='|mu|/(gamma1+gamma2) range lo:hi')
    p.add_argument('--box-phi', help='loop phase range lo:hi in rad')
    p.add_argument('--branch', choices=('upper', 'lower'))
    p.add_argument('--pair', action='store_true', help='both chiralities')
    p = sub.add_parser('ep-surface', parents=[common], help='trace an exceptional surface')
    p.add_argument('--axis1', required=True, help='name:lo:hi')
    p.add_argument('--axis2', required=True, help='name:lo:hi')
    p.add_argument('--points', type=int)
    p.add_argument('--branch', choices=('upper', 'lower'), action='append')
    p = sub.add_parser('figure', parents=[common], help='run a named figure recipe')
    p.add_argument('name', choices=sorted(RECIPES))
    p.add_argument('--fix', action='append', default=[], metavar='KEY=VALUE',
                   help='recipe setting or resolution override, e.g. points_2d=41')
    sub.add_parser('oracle-check', parents=[common], help='cross-check against time-domain propagation')
    sub.add_parser('validate', parents=[common], help='derived quantities and stability')
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else DEFAULTS
    if args.preset:
        cfg = replace(cfg, preset=args.preset)
    cfg = with_params(cfg, parse_overrides(args.set))
    if args.output is not None:
        cfg = replace(cfg, sweep=replace(cfg.sweep, output_dir=str(args.output)))
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = replace(cfg, sweep=replace(cfg.sweep, workers=args.workers))
    # re-run full validation on the merged document
    return build_run_config(cfg.to_dict())


def _fixes(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"--fix expects key=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--fix {key!r} must be numeric") from None
    return out


def _relative(a, b) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / scale)


def _point_summary(sim: Simulator) -> dict:
    params, derived = sim.params, sim.derived
    return {
        'fingerprint': fingerprint(params),
        'params': params.to_dict(),
        'derived': {'omega_L_rad_s': derived.omega_L, 'eps0_sqrt_hz': derived.eps0,
                    'n_cavity': derived.n_a, 'n_mech': derived.n_m,
                    'loop_phase_rad': derived.loop_phase,
                    'mu_over_gamma_sum': params.mu_mag / params.gamma_sum,
                    'resolved_sideband': params.resolved_sideband,
                    'modulated': params.modulated},
    }


# -- subcommands ------------------------------------------------------------

def cmd_validate(sim: Simulator, args, manifest, out: Path):
    report = _point_summary(sim)
    stable, eigvals = sim.stability
    report['command'] = 'validate'
    report['checks'] = [
        {'name': 'stable', 'value': float(np.max(eigvals.real)), 'tolerance': 0.0, 'passed': stable},
        {'name': 'resolved_sideband', 'value': sim.params.kappa / sim.params.omega_m,
         'tolerance': 1.0, 'passed': sim.params.resolved_sideband},
    ]
    report['passed'] = True
    report['classical'] = sim.classical.to_dict()
    if args.output:
        manifest.add_output(write_json(report, out / 'validate.json'))
    for key, value in report['derived'].items():
        print(f"{key:>20}: {value}")
    print(f"{'stable':>20}: {stable} (max Re lambda = {np.max(eigvals.real):.6e} rad/s)")
    return EXIT_OK


def cmd_steady(sim: Simulator, args, manifest, out: Path):
    stationary = sim.stationary
    v_lyap = sim.lyapunov()
    report = _point_summary(sim)
    physicality = physicality_check(v_lyap)
    report.update({
        'nbar_cavity': stationary.mean_phonon(0),
        'nbar1': stationary.mean_phonon(1),
        'nbar2': stationary.mean_phonon(2),
        'stable': stationary.stable,
        'eigenvalues_rad_s': stationary.eigvals,
        'cond_u': stationary.cond_u,
        'v_sym': stationary.v_sym,
        'residue_vs_lyapunov': _relative(stationary.v_sym, v_lyap),
        'lyapunov_residual': lyapunov_residual(sim.harmonics.m0, v_lyap, sim.noise.d_mat),
        'min_physicality_eigenvalue': physicality.min_eigenvalue,
        'heisenberg': physicality.heisenberg,
    })
    manifest.add_output(write_json(report, out / 'steady.json'))
    print(f"nbar1 = {report['nbar1']:.6g}, nbar2 = {report['nbar2']:.6g}")
    return EXIT_OK


def cmd_floquet(sim: Simulator, args, manifest, out: Path):
    fc = sim.floquet(l_max=args.l_max, n_zones=args.zones)
    report = _point_summary(sim)
    report.update({
        'quadratures': QUADRATURE_NAMES,
        'v0': fc.v0, 'v1': fc.v1, 'v2': fc.v2, 'v_min': fc.v_min,
        'squeezing_db': fc.squeezing_db,
        'min_variance_db_1': min_variance_db(fc, 1) if min(fc.v_min[2:4]) > 0 else None,
        'min_variance_db_2': min_variance_db(fc, 2) if min(fc.v_min[4:6]) > 0 else None,
        'n_zones': fc.n_zones, 'nodes': fc.nodes, 'convergence': fc.convergence,
    })
    manifest.add_output(write_json(report, out / 'floquet.json'))
    print(f"resonator 2: v_min = {min(fc.v_min[4:6]):.6g}, "
          f"squeezing = {np.nanmax(fc.squeezing_db[4:6]):.3f} dB")
    return EXIT_OK


def cmd_loci(sim: Simulator, args, manifest, out: Path):
    points = args.points or sim.cfg.sweep.points_1d
    phis = np.linspace(0.0, np.pi, points)
    loci = eigen_loci(sim.params, phis, sim.cfg.classical).eigvals_per_phi
    omega_m = sim.params.omega_m
    records = [{'phi_over_pi': phi / np.pi, 'locus': k,
                'damping_over_omega_m': loci[j, k].real / omega_m,
                'frequency_over_omega_m': loci[j, k].imag / omega_m}
               for j, phi in enumerate(phis) for k in range(loci.shape[1])]
    result = SweepResult(name='loci', axes=[SweepAxis('phi_over_pi', phis / np.pi, 'pi rad')],
                         columns=('phi_over_pi', 'locus', 'damping_over_omega_m',
                                  'frequency_over_omega_m'),
                         values=records, preset_fingerprint=fingerprint(sim.params))
    manifest.add_output(write_csv(result, out / 'loci.csv'))
    return EXIT_OK


def cmd_ep_find(sim: Simulator, args, manifest, out: Path):
    search = sim.cfg.search
    mu_box = _pair(args.box_mu, '--box-mu') if args.box_mu else search.mu_box
    branch = args.branch or search.branch
    if args.pair:
        points = find_ep_pair(sim.params, mu_box, branch, search, sim.cfg.classical)
        document = {'ep_points': [p.to_dict() for p in points]}
    else:
        phi_box = _pair(args.box_phi, '--box-phi') if args.box_phi else search.phi_box
        point = find_ep(sim.params, (mu_box, phi_box), branch, search, sim.cfg.classical)
        points = (point,)
        document = point.to_dict()
    manifest.add_output(write_json(document, out / 'ep_point.json'))
    for p in points:
        print(f"|mu_EP|/(gamma1+gamma2) = {p.mu_over_gamma_sum:.6g}, phi/pi = {p.phi / np.pi:.6g}, "
              f"omega_EP/omega_m = {p.omega_ep:.5f} ({p.branch}, {p.chirality})")
    return EXIT_OK


def cmd_ep_surface(sim: Simulator, args, manifest, out: Path):
    points = args.points or sim.cfg.sweep.surface_points
    axis1, axis2 = _surface_axis(args.axis1, points), _surface_axis(args.axis2, points)
    branches = tuple(args.branch) if args.branch else ('upper', 'lower')
    surface = trace_surface(sim.params, axis1, axis2, branches, sim.cfg.search, sim.cfg.classical,
                            workers=default_workers(sim.cfg))
    c1, c2 = SURFACE_COLUMNS[axis1.name], SURFACE_COLUMNS[axis2.name]
    records = []
    for i, v1 in enumerate(axis1.values):
        for j, v2 in enumerate(axis2.values):
            found = {p.branch: p for p in surface.ep_points.get((i, j), [])}
            for branch in branches:
                p = found.get(branch)
                records.append({c1: v1, c2: v2, 'branch': branch,
                                'found': p is not None,
                                'mu_ep_over_gamma_sum': p.mu_over_gamma_sum if p else np.nan,
                                'phi_ep_over_pi': p.phi / np.pi if p else np.nan,
                                'omega_ep_over_omega_m': p.omega_ep if p else np.nan})
    result = SweepResult(name='ep_surface',
                         axes=[SweepAxis(c1, axis1.values), SweepAxis(c2, axis2.values)],
                         columns=(c1, c2, 'branch', 'found', 'mu_ep_over_gamma_sum',
                                  'phi_ep_over_pi', 'omega_ep_over_omega_m'),
                         values=records, preset_fingerprint=fingerprint(sim.params))
    manifest.add_output(write_csv(result, out / f'ep_surface_{axis1.name}_{axis2.name}.csv'))
    manifest.add_failures([{'index': i * points + j, 'failure': 'NotFound', 'message': message}
                           for i, j, message in surface.gaps])
    return EXIT_OK


def cmd_figure(sim: Simulator, args, manifest, out: Path):
    result = figure_recipe(args.name, _fixes(args.fix), sim.cfg, workers=default_workers(sim.cfg))
    manifest.add_output(write_csv(result, out / f'{args.name}.csv'))
    manifest.add_failures(result.failures)
    print(f"{args.name}: {len(result.values)} records, {len(result.failures)} failed nodes")
    return EXIT_OK


def oracle_checks(sim: Simulator) -> list:
    """Cross-method comparisons at one point"""
    params, derived, cfg = sim.params, sim.derived, sim.cfg
    checks = []

    def check(name, value, tolerance):
        checks.append({'name': name, 'value': float(value), 'tolerance': tolerance,
                       'passed': bool(value <= tolerance)})

    orbit = periodic_orbit(params, derived, cfg=cfg.oracle)
    classical = sim.classical
    amplitudes = np.array([[classical.harmonic(mode, h) for mode in ('a', 'b1', 'b2')]
                           for h in (-1, 0, 1)])
    projected = np.array([orbit.harmonics[h] for h in (-1, 0, 1)])
    check('classical_harmonics', _relative(projected, amplitudes), ORACLE_CLASSICAL_TOL)

    t_end = settle_time(params, cfg.oracle)
    thermal = np.diag([derived.n_a + 0.5] * 2 + [derived.n_m + 0.5] * 4)
    trajectory = propagate_covariance(sim.harmonics, sim.noise.d_mat, thermal, t_end,
                                      kappa=params.kappa, cfg=cfg.oracle)
    if not params.modulated:
        v_lyap = sim.lyapunov()
        check('residue_vs_lyapunov', _relative(sim.stationary.v_sym, v_lyap), RESIDUE_LYAPUNOV_TOL)
        check('oracle_vs_lyapunov', _relative(trajectory.final, v_lyap), ORACLE_COVARIANCE_TOL)
        physicality = physicality_check(v_lyap)
    else:
        fc = sim.floquet(l_max=2)
        times = trajectory.times
        reconstructed = reconstruct_variance(fc, params.Omega_mod, times)
        diagonal = np.diagonal(trajectory.covariances, axis1=1, axis2=2)
        check('oracle_vs_floquet_min',
              _relative(diagonal.min(axis=0), reconstructed.min(axis=0)), ORACLE_FLOQUET_TOL)
        bound = float(np.max(2 * np.abs(fc.v2) / np.abs(fc.v0)))
        check('floquet_vmin_truncation', _relative(fc.v_min, diagonal.min(axis=0)),
              max(bound, ORACLE_FLOQUET_TOL))
        physicality = physicality_check(trajectory.final)
    check('physicality', max(0.0, -physicality.min_eigenvalue), 1e-8)
    check('heisenberg', max(0.0, 0.25 - min(physicality.heisenberg)), 1e-8)
    return checks


def cmd_oracle_check(sim: Simulator, args, manifest, out: Path):
    report = _point_summary(sim)
    report['command'] = 'oracle-check'
    report['checks'] = oracle_checks(sim)
    report['passed'] = all(c['passed'] for c in report['checks'])
    manifest.add_output(write_json(report, out / 'validation_report.json'))
    for c in report['checks']:
        print(f"{c['name']:>26}: {c['value']:.3e} (tol {c['tolerance']:.1e}) "
              f"{'ok' if c['passed'] else 'FAILED'}")
    if not report['passed']:
        manifest.status = 'failed'
        return EXIT_NUMERICAL
    return EXIT_OK


HANDLERS = {
    'steady': cmd_steady,
    'floquet': cmd_floquet,
    'loci': cmd_loci,
    'ep-find': cmd_ep_find,
    'ep-surface': cmd_ep_surface,
    'figure': cmd_figure,
    'oracle-check': cmd_oracle_check,
    'validate': cmd_validate,
}


def run(argv=None) -> int:
    """Parse argv, execute one subcommand and return the exit status"""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    DEBUG.configure(args.verbose)

    manifest = None
    out = None
    try:
        cfg = resolve_config(args)
        out = Path(cfg.sweep.output_dir)
        manifest = RunManifest(args.command, cfg, argv)
        sim = Simulator(cfg.system_params(), cfg)
        status = HANDLERS[args.command](sim, args, manifest, out)
    except ConfigError as exc:
        DEBUG.warn(f"configuration error: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        DEBUG.warn(f"numerical failure: {type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        manifest.status = 'failed'
        manifest.add_failures([{'index': 0, 'failure': type(exc).__name__, 'message': str(exc),
                                'residuals': DEBUG.get_signal_data('classical')[-5:].tolist()}])
        _write_manifest(manifest, out)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OptoloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    if args.command == 'validate' and not args.output:
        return status
    try:
        _write_manifest(manifest, out, strict=True)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def _write_manifest(manifest: RunManifest, out: Path, strict: bool = False):
    try:
        manifest.write(out)
    except OSError:
        if strict:
            raise
        DEBUG.warn(f"could not write the manifest to {out}")


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
