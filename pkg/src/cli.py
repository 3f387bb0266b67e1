"""
Command-line front end.

    gramian    compute one of the six empirical gramians
    reduce     run a state and/or parameter reduction and report its error
    validate   compare empirical and analytical gramians of a random linear system
    benchmark  run the benchmark reduction experiments

Models are linear manifests (see src.data.matrix_io) or the built-in
systems builtin:benchmark, builtin:linear and builtin:scalar.
Exit codes: 0 success, 1 validation failure, 2 usage, 3 I/O,
4 applicability, 5 divergence, 6 rank.
"""
import argparse
import logging
import os
import sys
import time

import numpy as np

from src.data.matrix_io import (
    load_snapshots,
    read_linear_model,
    read_matrix,
    save_snapshots,
    write_error_series,
    write_matrix,
    write_summary,
)
from src.models.bench import (
    BenchmarkConfig,
    ExperimentKind,
    ReductionOrdering,
    check_timing_claims,
    evaluate_reduction,
    generate_benchmark,
    median_summary,
    reduce_pipeline,
    run_suite,
    summarize,
)
from src.models.core import CenteringKind, PerturbationSpec, RotationKind, ScaleKind, TimeGrid
from src.models.gramian import GramianType, empirical_gramian, record_snapshots
from src.models.oracle import random_linear_system, scalar_system
from src.models.sim import InputKind, InputSignal, IntegratorKind
from src.reporting.generate_report import generate_html_report
from src.utils.config import default_jobs, get_config
from src.utils.errors import EmgramError, InvalidArgumentError, ModelIOError

logger = logging.getLogger(__name__)

BUILTIN_PREFIX = 'builtin:'


# --- Argument helpers ---

def _time_grid(text):
    try:
        t0, dt, tf = (float(part) for part in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected t0,dt,tf, got '{text}'")
    try:
        return TimeGrid(t0, dt, tf)
    except EmgramError as err:
        raise argparse.ArgumentTypeError(str(err))


def _choices(enum_cls):
    return [member.value for member in enum_cls]


def _add_model_arguments(parser, config):
    parser.add_argument('--model', default='builtin:benchmark',
                        help="model manifest path or builtin:benchmark|builtin:linear|builtin:scalar")
    parser.add_argument('--time', type=_time_grid, default=None, metavar='T0,DT,TF',
                        help="time grid (default 0,0.01,1)")
    parser.add_argument('--n', type=int, default=None, help="state count of built-in models")
    parser.add_argument('--m', type=int, default=None, help="input count of built-in models")
    parser.add_argument('--o', type=int, default=None, help="output count of builtin:linear (default m)")
    parser.add_argument('--seed', type=int, default=config['benchmark']['seed'])
    parser.add_argument('--integrator', choices=_choices(IntegratorKind), default=config['integrator'])
    parser.add_argument('--jobs', type=int, default=default_jobs(),
                        help="parallel simulation workers (default from EMGRAM_JOBS)")
    parser.add_argument('--deterministic', action='store_true',
                        help="sequential assembly and timing-free output files")


def _add_perturbation_arguments(parser, config):
    perturbation = config['perturbation']
    parser.add_argument('--scales-kind', choices=_choices(ScaleKind), default=perturbation['scale_kind'])
    parser.add_argument('--scale-count', type=int, default=perturbation['scale_count'])
    parser.add_argument('--rotations', choices=_choices(RotationKind), default=perturbation['rotation_kind'])
    parser.add_argument('--input-scale', type=float, default=perturbation['input_scale'])
    parser.add_argument('--state-scale', type=float, default=perturbation['state_scale'])
    parser.add_argument('--param-scale', type=float, default=perturbation['param_scale'])
    parser.add_argument('--centering', choices=_choices(CenteringKind), default=config['centering'])
    parser.add_argument('--pod-rank', type=int, default=config['pod_rank'])
    parser.add_argument('--input', default='impulse',
                        help="impulse, step, zero or a matrix file of input samples (m×T)")
    parser.add_argument('--tol', type=float, default=config['tolerances']['schur'],
                        help="relative pseudo-inverse tolerance of the Schur complement")


def load_model(args, seed=None):
    """Resolves --model to (SystemModel, steady state used as base point)."""
    seed = args.seed if seed is None else seed
    name = args.model
    if not name.startswith(BUILTIN_PREFIX):
        if not os.path.exists(name):
            raise ModelIOError(f"model manifest not found: {name}")
        _, model = read_linear_model(name)
        return model, np.zeros(model.dims.n)
    builtin = name[len(BUILTIN_PREFIX):]
    if builtin == 'benchmark':
        overrides = {'seed': seed}
        if args.n is not None:
            overrides['n'] = args.n
        if args.m is not None:
            overrides['m'] = args.m
        bench = generate_benchmark(BenchmarkConfig.from_config(get_config(), **overrides))
        return bench.model, bench.steady_state
    if builtin == 'linear':
        validate = get_config()['validate']
        n = args.n if args.n is not None else validate['n']
        m = args.m if args.m is not None else validate['m']
        o = args.o if args.o is not None else m
        model = random_linear_system(n, m, o, seed).to_model()
    elif builtin == 'scalar':
        model = scalar_system().to_model()
    else:
        raise InvalidArgumentError(f"unknown built-in model '{name}'")
    return model, np.zeros(model.dims.n)


def build_spec(args, model, steady_state=0.0):
    config = {
        'rotation_kind': args.rotations,
        'scale_kind': args.scales_kind,
        'scale_count': args.scale_count,
        'input_scale': args.input_scale,
        'state_scale': args.state_scale,
        'param_scale': args.param_scale,
    }
    return PerturbationSpec.from_config(model.dims, config, steady_state=steady_state)


def build_input(args, model, grid):
    choice = args.input
    if choice in _choices(InputKind) and choice != InputKind.SAMPLED.value:
        return InputSignal.named(choice, model.dims.m)
    samples = read_matrix(choice)
    signal = InputSignal.sampled(samples)
    signal.sample(grid)
    return signal


def _grid(args):
    return args.time if args.time is not None else TimeGrid.from_config(get_config()['time'])


def _jobs(args):
    return 1 if args.deterministic else max(1, args.jobs)


def _pair_paths(out, gramians):
    stem, ext = os.path.splitext(out)
    return [f"{stem}_{gramian.kind.value}{ext or '.txt'}" for gramian in gramians]


# --- Commands ---

def cmd_gramian(args):
    """Computes the requested gramian (pair) and writes it to --out."""
    model, x_bar = load_model(args)
    grid = _grid(args)
    spec = build_spec(args, model, x_bar)
    u = build_input(args, model, grid)
    jobs = _jobs(args)

    data = load_snapshots(args.data) if args.data else None
    if args.record:
        save_snapshots(args.record, record_snapshots(args.type, model, grid, spec, u, args.integrator, jobs))
        print(f"Snapshots recorded to {args.record}")

    started = time.perf_counter()
    result = empirical_gramian(args.type, model, grid, spec, u, integrator=args.integrator,
                               centering=args.centering, data=data, jobs=jobs, pod_rank=args.pod_rank,
                               tol=args.tol, input_average=args.input_average, approximate=args.approximate)
    elapsed = time.perf_counter() - started
    gramians = list(result) if isinstance(result, tuple) else [result]

    for gramian in gramians:
        rows, cols = gramian.shape
        print(f"{gramian.kind.value}: {rows}x{cols}")
    print(f"Assembly time: {elapsed:.3f} s")
    if args.out:
        paths = [args.out] if len(gramians) == 1 else _pair_paths(args.out, gramians)
        for gramian, path in zip(gramians, paths):
            write_matrix(path, gramian)
            print(f"Wrote {path}")
    return 0


def _reduce_once(args, seed):
    model, x_bar = load_model(args, seed)
    grid = _grid(args)
    spec = build_spec(args, model, x_bar)
    u = build_input(args, model, grid)
    order = args.order if args.order is not None else model.dims.m
    param_order = args.param_order if args.param_order is not None else min(order, max(model.dims.P, 1))
    result = reduce_pipeline(args.method, model, grid, spec, u, order, param_order,
                             integrator=args.integrator, centering=args.centering, jobs=_jobs(args),
                             tol=args.tol, ordering=args.ordering)
    errors, aggregate, reduced_seconds, _ = evaluate_reduction(model, result, grid, u, args.integrator, x0=x_bar)
    return grid, errors, aggregate, result, reduced_seconds


def cmd_reduce(args):
    """Runs one reduction method and reports its output error."""
    seeds = range(args.seed, args.seed + max(1, args.seeds))
    aggregates = []
    for index, seed in enumerate(seeds):
        grid, errors, aggregate, result, reduced_seconds = _reduce_once(args, seed)
        aggregates.append(aggregate)
        print(f"seed={seed} method={args.method} aggregate_error={aggregate:.6e} "
              f"gramian_seconds={result.gramian_seconds:.3f} reduction_seconds={result.reduction_seconds:.3f} "
              f"simulation_seconds={reduced_seconds:.3f}")
        if index == 0 and args.report:
            write_error_series(args.report, grid.times, errors)
            print(f"Wrote {args.report}")
    if len(aggregates) > 1:
        print(f"median aggregate_error={float(np.median(aggregates)):.6e} over {len(aggregates)} seeds")
    return 0


def cmd_validate(args):
    """Compares empirical gramians of a random linear system with the analytical ones."""
    config = get_config()['validate']
    if args.scalar:
        system = scalar_system()
    else:
        n = args.n if args.n is not None else config['n']
        m = args.m if args.m is not None else config['m']
        o = args.o if args.o is not None else config['o']
        system = random_linear_system(n, m, o, args.seed)
    tf = args.tf if args.tf is not None else 10.0 / system.slowest_rate()
    if not args.dt > 0:
        raise InvalidArgumentError(f"time step must be positive, got {args.dt}")
    grid = TimeGrid(0.0, args.dt, tf)
    model = system.to_model()
    spec = PerturbationSpec.default(model.dims)
    u = InputSignal.impulse(np.ones(model.dims.m))
    options = dict(integrator=args.integrator, jobs=_jobs(args))

    checks = [('controllability', 'c', system.ctrb), ('observability', 'o', system.obsv)]
    if model.dims.is_square:
        checks.append(('cross', 'x', system.cross))
    print(f"Linear system n={model.dims.n}, m={model.dims.m}, o={model.dims.o}, dt={args.dt}, tf={tf:.4g}")

    passed = True
    for name, kind, oracle in checks:
        analytic = oracle()
        empirical = empirical_gramian(kind, model, grid, spec, u, **options).matrix
        discrepancy = float(np.linalg.norm(empirical - analytic) / np.linalg.norm(analytic))
        ok = discrepancy <= args.tol
        passed = passed and ok
        print(f"{name:16s} discrepancy={discrepancy:.3e} {'ok' if ok else 'FAIL'}")
        if model.dims.n == 1:
            print(f"{name:16s} analytic={analytic[0, 0]:.6g} empirical={empirical[0, 0]:.6g}")
    return 0 if passed else 1


def cmd_benchmark(args):
    """Runs the selected benchmark experiments and writes error series plus a summary."""
    overrides = {'seed': args.seed, 'ordering': args.ordering, 'integrator': args.integrator,
                 'jobs': _jobs(args)}
    for key in ('n', 'm', 'order', 'param_order'):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.time is not None:
        overrides['grid'] = args.time
    cfg = BenchmarkConfig.from_config(get_config(), **overrides)
    experiments = list(ExperimentKind) if args.experiment == 'all' else [ExperimentKind.parse(args.experiment)]
    seeds = list(range(args.seed, args.seed + max(1, args.seeds)))

    reports = run_suite(cfg, experiments, seeds)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_files = []
    for report in reports:
        name = f"{report.experiment.value}.csv" if len(seeds) == 1 else \
            f"{report.experiment.value}_seed{report.seed}.csv"
        write_error_series(os.path.join(args.out_dir, name), report.times, report.errors)
        csv_files.append(name)
        print(f"{report.experiment.value} seed={report.seed} aggregate_error={report.aggregate_error:.6e} "
              f"gramian={report.gramian_seconds:.3f}s reduction={report.reduction_seconds:.3f}s "
              f"simulation={report.simulation_seconds:.3f}s")

    summary = summarize(reports, deterministic=args.deterministic)
    summary_path = os.path.join(args.out_dir, 'summary.csv')
    write_summary(summary_path, summary)
    print(f"Wrote {summary_path}")

    medians = None
    if len(seeds) > 1:
        medians = median_summary(reports)
        print("Medians over seeds:")
        print(medians.to_string())
    ratios = check_timing_claims(reports)
    for name, ratio in ratios.items():
        print(f"{name}: {ratio:.3f}")

    if args.html:
        generate_html_report({
            'config': {'n': cfg.n, 'm': cfg.m, 'order': cfg.order, 'param_order': cfg.param_order,
                       'seeds': f"{seeds[0]}..{seeds[-1]}", 'grid': f"{cfg.grid.t0},{cfg.grid.dt},{cfg.grid.tf}"},
            'summary': summary,
            'medians': medians,
            'timing_ratios': ratios,
            'csv_files': csv_files,
        }, args.html)
        print(f"Wrote {args.html}")
    return 0


# --- Parser ---

def build_parser():
    config = get_config()
    parser = argparse.ArgumentParser(prog='emgram', description="Empirical gramians and model reduction")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="warnings only")
    commands = parser.add_subparsers(dest='command', required=True)

    gramian = commands.add_parser('gramian', help="compute an empirical gramian")
    _add_model_arguments(gramian, config)
    _add_perturbation_arguments(gramian, config)
    gramian.add_argument('--type', required=True, choices=_choices(GramianType))
    gramian.add_argument('--data', help="snapshot archive replacing simulation")
    gramian.add_argument('--record', help="write the simulated snapshots to this archive")
    gramian.add_argument('--out', help="output matrix file (pairs get _<kind> suffixes)")
    gramian.add_argument('--input-average', action='store_true', help="divide cross gramians by m")
    gramian.add_argument('--approximate', action='store_true',
                         help="use the parameter block instead of the Schur complement")
    gramian.set_defaults(handler=cmd_gramian)

    reduce = commands.add_parser('reduce', help="reduce a model and report the output error")
    _add_model_arguments(reduce, config)
    _add_perturbation_arguments(reduce, config)
    reduce.add_argument('--method', required=True, choices=_choices(ExperimentKind))
    reduce.add_argument('--order', type=int, default=None, help="reduced state order (default m)")
    reduce.add_argument('--param-order', type=int, default=None, help="reduced parameter order")
    reduce.add_argument('--ordering', choices=_choices(ReductionOrdering),
                        default=config['benchmark']['ordering'])
    reduce.add_argument('--seeds', type=int, default=1, help="number of consecutive seeds")
    reduce.add_argument('--report', help="error-series CSV path")
    reduce.set_defaults(handler=cmd_reduce)

    validate = commands.add_parser('validate', help="check empirical against analytical gramians")
    validate.add_argument('--n', type=int, default=None)
    validate.add_argument('--m', type=int, default=None)
    validate.add_argument('--o', type=int, default=None)
    validate.add_argument('--seed', type=int, default=config['validate']['seed'])
    validate.add_argument('--dt', type=float, default=config['validate']['dt'])
    validate.add_argument('--tf', type=float, default=config['validate']['tf'])
    validate.add_argument('--integrator', choices=_choices(IntegratorKind), default=config['integrator'])
    validate.add_argument('--tol', type=float, default=config['validate']['tol'])
    validate.add_argument('--scalar', action='store_true', help="use the scalar system A=-1, B=1, C=1")
    validate.add_argument('--jobs', type=int, default=default_jobs())
    validate.add_argument('--deterministic', action='store_true')
    validate.set_defaults(handler=cmd_validate)

    benchmark = commands.add_parser('benchmark', help="run the benchmark experiments")
    benchmark.add_argument('--experiment', choices=_choices(ExperimentKind) + ['all'], default='all')
    benchmark.add_argument('--n', type=int, default=None)
    benchmark.add_argument('--m', type=int, default=None)
    benchmark.add_argument('--order', type=int, default=None)
    benchmark.add_argument('--param-order', type=int, default=None)
    benchmark.add_argument('--seed', type=int, default=config['benchmark']['seed'])
    benchmark.add_argument('--seeds', type=int, default=1, help="number of consecutive seeds")
    benchmark.add_argument('--time', type=_time_grid, default=None, metavar='T0,DT,TF')
    benchmark.add_argument('--integrator', choices=_choices(IntegratorKind), default=config['integrator'])
    benchmark.add_argument('--ordering', choices=_choices(ReductionOrdering),
                           default=config['benchmark']['ordering'])
    benchmark.add_argument('--out-dir', default='results')
    benchmark.add_argument('--html', help="also render an HTML report to this path")
    benchmark.add_argument('--jobs', type=int, default=default_jobs())
    benchmark.add_argument('--deterministic', action='store_true')
    benchmark.set_defaults(handler=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.handler(args)
    except EmgramError as err:
        print(f"Error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == '__main__':
    sys.exit(main())
