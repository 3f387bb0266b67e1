"""
Randomized nonlinear benchmark and the five reduction experiments.

The benchmark is the symmetric MIMO system

    x' = A·arsinh(x) + B·u + p,    y = C·x,    C = Bᵀ,

with a random symmetric negative definite A and an elementwise source
term p (one parameter per state). Each experiment assembles gramians,
reduces states and/or parameters, and compares full and reduced outputs
under an impulse input.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
import scipy.linalg as la

from src.models.core import PerturbationSpec, SystemDims, SystemModel, TimeGrid, _ParsableEnum, column_term
from src.models.gramian import empirical_gramian
from src.models.reduce import (
    balance,
    project_model,
    reduce_parameters_project,
    reduce_parameters_select,
    relative_output_error,
    truncate_cross,
)
from src.models.sim import InputSignal, IntegratorKind, integrate, output_trajectory
from src.utils.config import get_config
from src.utils.errors import EmgramError, InvalidArgumentError, InvalidDimensionError

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['experiment', 'seed', 'order', 'aggregate_error',
                   'gramian_seconds', 'reduction_seconds', 'simulation_seconds']


class ExperimentKind(_ParsableEnum):
    BT = 'bt'
    WX = 'wx'
    WS = 'ws'
    WI = 'wi'
    WJ = 'wj'


class ReductionOrdering(_ParsableEnum):
    PARAMS_FIRST = 'params_first'
    STATES_FIRST = 'states_first'


@dataclass
class BenchmarkConfig:
    """Benchmark size, seed, grid and reduction targets."""
    n: int = 100
    m: int = 10
    seed: int = 1
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 0.01, 1.0))
    order: Optional[int] = None
    param_order: Optional[int] = None
    integrator: IntegratorKind = IntegratorKind.EULER
    experiment: ExperimentKind = ExperimentKind.BT
    param_range: tuple = (0.0, 0.1)
    ordering: ReductionOrdering = ReductionOrdering.PARAMS_FIRST
    perturbation_scale: float = 0.1
    jobs: int = 1

    def __post_init__(self):
        self.integrator = IntegratorKind.parse(self.integrator)
        self.experiment = ExperimentKind.parse(self.experiment)
        self.ordering = ReductionOrdering.parse(self.ordering)
        if self.n < 1 or self.m < 1:
            raise InvalidDimensionError(f"benchmark needs n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.m > self.n:
            raise InvalidDimensionError(f"benchmark needs m <= n, got m={self.m}, n={self.n}")
        if self.order is None:
            self.order = self.m
        if self.param_order is None:
            self.param_order = self.order
        for name in ('order', 'param_order'):
            value = getattr(self, name)
            if not 1 <= value <= self.n:
                raise InvalidArgumentError(f"{name} {value} outside 1..{self.n}")
        low, high = self.param_range
        if not low <= high:
            raise InvalidArgumentError(f"invalid parameter range {self.param_range}")
        if not self.perturbation_scale > 0:
            raise InvalidArgumentError(f"perturbation scale must be positive, got {self.perturbation_scale}")

    @classmethod
    def from_config(cls, config=None, **overrides):
        """Builds a config from the 'benchmark' and 'time' sections of a config dict."""
        config = config or get_config()
        bench = config.get('benchmark', {})
        values = dict(
            n=bench.get('n', 100),
            m=bench.get('m', 10),
            seed=bench.get('seed', 1),
            grid=TimeGrid.from_config(config.get('time', {})),
            order=bench.get('order'),
            param_order=bench.get('param_order'),
            integrator=config.get('integrator', 'euler'),
            param_range=tuple(bench.get('param_range', (0.0, 0.1))),
            ordering=bench.get('ordering', 'params_first'),
            perturbation_scale=bench.get('perturbation_scale', 0.1),
        )
        values.update(overrides)
        return cls(**values)

    def replace(self, **changes):
        values = dict(self.__dict__)
        values.update(changes)
        return BenchmarkConfig(**values)


class Benchmark(NamedTuple):
    model: SystemModel
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    p: np.ndarray
    steady_state: np.ndarray


def generate_benchmark(cfg):
    """
    Draws the benchmark system from a PCG64 generator seeded with cfg.seed.

    The steady state under zero input solves A·arsinh(x̄) = -p, so
    x̄ = sinh(-A⁻¹p); gramians are centered on it and experiments start there.

    Returns:
        Benchmark: (model, A, B, C, nominal p, x̄); A is symmetric with largest eigenvalue -1.
    """
    n, m = cfg.n, cfg.m
    rng = np.random.default_rng(cfg.seed)
    M = rng.uniform(-1.0, 1.0, (n, n))
    S = (M + M.T) / 2.0
    A = S - (la.eigvalsh(S)[-1] + 1.0) * np.eye(n)
    A = (A + A.T) / 2.0
    B = rng.uniform(-1.0, 1.0, (n, m))
    C = B.T.copy()
    low, high = cfg.param_range
    p = rng.uniform(low, high, n)

    def f(x, u, p_):
        return A @ np.arcsinh(x) + B @ u + column_term(p_, x)

    def g(x, _u, _p):
        return C @ x

    model = SystemModel(SystemDims(m=m, n=n, o=m, P=n), f, g, p, vectorized=True)
    x_bar = np.sinh(-la.solve(A, p, assume_a='sym'))
    return Benchmark(model, A, B, C, p, x_bar)


@dataclass
class ReductionResult:
    """Reduced model (or parameter-reduced full model) produced by a pipeline."""
    model: SystemModel
    params: np.ndarray
    lift: Optional[np.ndarray]
    reduce_state: Optional[np.ndarray]
    gramian_seconds: float
    reduction_seconds: float
    hankel: Optional[np.ndarray] = None
    kept_params: Optional[list] = None


def _state_reduced(model, pair, provenance):
    reduced = project_model(model, pair, provenance)
    return reduced.model, pair.right, pair.left


def reduce_pipeline(method, model, grid, spec, u, order, param_order=None,
                    integrator=IntegratorKind.EULER, centering='steady', jobs=1, tol=1e-12,
                    ordering=ReductionOrdering.PARAMS_FIRST):
    """
    Runs one reduction method end to end.

    Args:
        method (ExperimentKind): bt, wx (state reduction), ws, wi (parameter
            reduction) or wj (combined state and parameter reduction).
        order (int): Reduced state order (bt, wx, wj).
        param_order (int): Reduced parameter order (ws, wi, wj).
        ordering (ReductionOrdering): For wj, whether the parameter projection is
            taken from the full-order joint gramian (params_first) or from the
            joint gramian of the state-reduced model (states_first).

    Returns:
        ReductionResult: Reduced model, reconstructed parameters and timings.
    """
    method = ExperimentKind.parse(method)
    ordering = ReductionOrdering.parse(ordering)
    param_order = order if param_order is None else param_order
    options = dict(integrator=integrator, centering=centering, jobs=jobs, tol=tol)
    p = model.p

    started = time.perf_counter()
    if method is ExperimentKind.BT:
        W_C = empirical_gramian('c', model, grid, spec, u, **options)
        W_O = empirical_gramian('o', model, grid, spec, u, **options)
        gramian_seconds = time.perf_counter() - started
        started = time.perf_counter()
        pair, hankel = balance(W_C, W_O, order)
        reduced, lift, restrict = _state_reduced(model, pair, (W_C.kind, W_O.kind))
        return ReductionResult(reduced, p, lift, restrict, gramian_seconds,
                               time.perf_counter() - started, hankel=hankel)

    if method is ExperimentKind.WX:
        W_X = empirical_gramian('x', model, grid, spec, u, **options)
        gramian_seconds = time.perf_counter() - started
        started = time.perf_counter()
        pair = truncate_cross(W_X, order)
        reduced, lift, restrict = _state_reduced(model, pair, (W_X.kind,))
        return ReductionResult(reduced, p, lift, restrict, gramian_seconds, time.perf_counter() - started)

    if method is ExperimentKind.WS:
        _, W_S = empirical_gramian('s', model, grid, spec, u, **options)
        gramian_seconds = time.perf_counter() - started
        started = time.perf_counter()
        kept, pmap = reduce_parameters_select(W_S, param_order)
        params = pmap(p)
        return ReductionResult(model.with_parameters(params), params, None, None, gramian_seconds,
                               time.perf_counter() - started, kept_params=kept)

    if method is ExperimentKind.WI:
        _, W_I = empirical_gramian('i', model, grid, spec, u, **options)
        gramian_seconds = time.perf_counter() - started
        started = time.perf_counter()
        _, pmap = reduce_parameters_project(W_I, param_order)
        params = pmap(p)
        return ReductionResult(model.with_parameters(params), params, None, None, gramian_seconds,
                               time.perf_counter() - started)

    W_X, W_JI = empirical_gramian('j', model, grid, spec, u, **options)
    gramian_seconds = time.perf_counter() - started
    started = time.perf_counter()
    pair = truncate_cross(W_X, order)
    reduced, lift, restrict = _state_reduced(model, pair, (W_X.kind, W_JI.kind))
    reduction_seconds = time.perf_counter() - started
    if ordering is ReductionOrdering.STATES_FIRST:
        # reduced coordinates share the largest full-order state scale
        reduced_spec = spec.replace(state_scales=np.full(pair.r, spec.state_scales.max()),
                                    steady_state=restrict @ spec.steady_state)
        started = time.perf_counter()
        _, W_JI = empirical_gramian('j', reduced, grid, reduced_spec, u, **options)
        gramian_seconds += time.perf_counter() - started
    started = time.perf_counter()
    _, pmap = reduce_parameters_project(W_JI, param_order, definite=False)
    params = pmap(p)
    reduced = reduced.with_parameters(params)
    reduction_seconds += time.perf_counter() - started
    return ReductionResult(reduced, params, lift, restrict, gramian_seconds, reduction_seconds)


@dataclass
class ExperimentReport:
    """Error series and timings of one benchmark experiment."""
    experiment: ExperimentKind
    seed: int
    order: int
    param_order: int
    times: np.ndarray
    errors: np.ndarray
    aggregate_error: float
    gramian_seconds: float
    reduction_seconds: float
    simulation_seconds: float
    full_simulation_seconds: float = 0.0
    hankel: Optional[np.ndarray] = None

    def error_frame(self):
        return pd.DataFrame({'t': self.times, 'relative_error': self.errors})

    def summary_row(self, deterministic=False):
        timings = (0.0, 0.0, 0.0) if deterministic else (
            self.gramian_seconds, self.reduction_seconds, self.simulation_seconds)
        return dict(zip(SUMMARY_COLUMNS, (self.experiment.value, self.seed, self.order,
                                          self.aggregate_error) + timings))


def simulate_outputs(model, grid, u, x0=None, integrator=IntegratorKind.EULER):
    """Outputs of a model started at x0 (default zero) under input u."""
    x0 = np.zeros(model.dims.n) if x0 is None else x0
    states = integrate(model, integrator, grid, x0, u)
    return output_trajectory(model, states, u)


def evaluate_reduction(model, result, grid, u, integrator=IntegratorKind.EULER, x0=None):
    """
    Simulates full and reduced models and compares their outputs.

    Returns:
        tuple: (pointwise errors, aggregate error, reduced simulation seconds, full simulation seconds).
    """
    x0 = np.zeros(model.dims.n) if x0 is None else np.asarray(x0, dtype=float)
    started = time.perf_counter()
    y_full = simulate_outputs(model, grid, u, x0, integrator)
    full_seconds = time.perf_counter() - started
    x0_r = x0 if result.reduce_state is None else result.reduce_state @ x0
    started = time.perf_counter()
    y_red = simulate_outputs(result.model, grid, u, x0_r, integrator)
    reduced_seconds = time.perf_counter() - started
    errors, aggregate = relative_output_error(y_full, y_red)
    return errors, aggregate, reduced_seconds, full_seconds


def run_experiment(cfg, benchmark=None):
    """
    Generates the benchmark for cfg.seed and runs cfg.experiment on it.

    Returns:
        ExperimentReport
    """
    benchmark = benchmark or generate_benchmark(cfg)
    model = benchmark.model
    x_bar = benchmark.steady_state
    # states and parameters are perturbed within the width of the parameter range
    scale = cfg.perturbation_scale
    spec = PerturbationSpec.from_config(model.dims, {'state_scale': scale, 'param_scale': scale},
                                        steady_state=x_bar)
    u = InputSignal.impulse(np.ones(cfg.m))
    logger.info("Running experiment %s (n=%d, m=%d, seed=%d, r=%d)",
                cfg.experiment.value, cfg.n, cfg.m, cfg.seed, cfg.order)
    try:
        result = reduce_pipeline(cfg.experiment, model, cfg.grid, spec, u, cfg.order, cfg.param_order,
                                 integrator=cfg.integrator, jobs=cfg.jobs, ordering=cfg.ordering)
        errors, aggregate, reduced_seconds, full_seconds = evaluate_reduction(
            model, result, cfg.grid, u, cfg.integrator, x0=x_bar)
    except EmgramError as err:
        logger.error("Experiment %s failed: %s", cfg.experiment.value, err)
        raise
    logger.info("Experiment %s: aggregate error %.3e", cfg.experiment.value, aggregate)
    return ExperimentReport(
        experiment=cfg.experiment, seed=cfg.seed, order=cfg.order, param_order=cfg.param_order,
        times=cfg.grid.times, errors=errors, aggregate_error=aggregate,
        gramian_seconds=result.gramian_seconds, reduction_seconds=result.reduction_seconds,
        simulation_seconds=reduced_seconds, full_simulation_seconds=full_seconds, hankel=result.hankel)


def run_suite(cfg, experiments=None, seeds=None):
    """Runs every (seed, experiment) combination; reports are ordered seed-major."""
    experiments = [ExperimentKind.parse(e) for e in (experiments or list(ExperimentKind))]
    seeds = list(seeds) if seeds is not None else [cfg.seed]
    reports = []
    for seed in seeds:
        seeded = cfg.replace(seed=seed)
        benchmark = generate_benchmark(seeded)
        for experiment in experiments:
            reports.append(run_experiment(seeded.replace(experiment=experiment), benchmark))
    return reports


def summarize(reports, deterministic=False):
    return pd.DataFrame([r.summary_row(deterministic) for r in reports], columns=SUMMARY_COLUMNS)


def median_summary(reports):
    frame = summarize(reports)
    return frame.drop(columns=['seed']).groupby('experiment', sort=False).median()


def check_timing_claims(reports):
    """
    Compares median timings of the experiments present in reports.

    Logs a warning when the sensitivity gramian is not cheaper than the
    identifiability gramian, or when cross-gramian reduction is not faster
    than balanced truncation. Returns the ratios that could be computed.
    """
    medians = median_summary(reports)
    ratios = {}
    names = set(medians.index)
    if {'ws', 'wi'} <= names:
        ratio = medians.loc['ws', 'gramian_seconds'] / max(medians.loc['wi', 'gramian_seconds'], 1e-300)
        ratios['ws_over_wi_gramian'] = float(ratio)
        if ratio >= 1.0:
            logger.warning("Sensitivity gramian not faster than identifiability gramian (ratio %.2f)", ratio)
    if {'wx', 'bt'} <= names:
        wx = medians.loc['wx', 'gramian_seconds'] + medians.loc['wx', 'reduction_seconds']
        bt = medians.loc['bt', 'gramian_seconds'] + medians.loc['bt', 'reduction_seconds']
        ratio = wx / max(bt, 1e-300)
        ratios['wx_over_bt_reduction'] = float(ratio)
        if ratio >= 1.0:
            logger.warning("Cross-gramian reduction not faster than balanced truncation (ratio %.2f)", ratio)
    return ratios
