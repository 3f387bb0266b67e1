import numpy as np
import pytest

from src.models.bench import (
    SUMMARY_COLUMNS,
    BenchmarkConfig,
    ExperimentKind,
    ReductionOrdering,
    check_timing_claims,
    evaluate_reduction,
    generate_benchmark,
    median_summary,
    reduce_pipeline,
    run_experiment,
    run_suite,
    summarize,
)
from src.models.core import PerturbationSpec, TimeGrid
from src.models.sim import InputSignal, find_steady_state
from src.utils.config import get_config
from src.utils.errors import InvalidArgumentError, InvalidDimensionError


def _median_error(cfg, experiment, seeds=range(1, 11)):
    reports = run_suite(cfg, [experiment], seeds)
    return float(np.median([r.aggregate_error for r in reports]))


def test_benchmark_structure():
    bench = generate_benchmark(BenchmarkConfig(n=12, m=3, seed=5))
    np.testing.assert_array_equal(bench.A, bench.A.T)
    assert np.linalg.eigvalsh(bench.A).max() == pytest.approx(-1.0, abs=1e-10)
    np.testing.assert_array_equal(bench.C, bench.B.T)
    assert np.linalg.eigvalsh(bench.C @ bench.B).min() >= -1e-12
    assert np.all((bench.p >= 0.0) & (bench.p <= 0.1))
    assert (bench.model.dims.n, bench.model.dims.m, bench.model.dims.o, bench.model.dims.P) == (12, 3, 3, 12)


def test_benchmark_is_deterministic_per_seed():
    first = generate_benchmark(BenchmarkConfig(n=10, m=2, seed=3))
    second = generate_benchmark(BenchmarkConfig(n=10, m=2, seed=3))
    other = generate_benchmark(BenchmarkConfig(n=10, m=2, seed=4))
    for a, b in zip(first[1:], second[1:]):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(first.A, other.A)


def test_benchmark_vector_field():
    bench = generate_benchmark(BenchmarkConfig(n=6, m=2, seed=1))
    x = np.linspace(-1.0, 1.0, 6)
    u = np.array([0.5, -0.5])
    expected = bench.A @ np.arcsinh(x) + bench.B @ u + bench.p
    np.testing.assert_allclose(bench.model.f(x, u, bench.p), expected, rtol=1e-14)
    np.testing.assert_allclose(bench.model.g(x, u, bench.p), bench.C @ x, rtol=1e-14)


def test_benchmark_steady_state_is_a_fixed_point():
    bench = generate_benchmark(BenchmarkConfig(n=8, m=2, seed=4))
    residual = bench.model.f(bench.steady_state, np.zeros(2), bench.p)
    np.testing.assert_allclose(residual, np.zeros(8), atol=1e-10)
    marched = find_steady_state(bench.model, np.zeros(2), None, np.zeros(8), TimeGrid(0.0, 0.01, 100.0), 1e-11)
    assert marched.converged
    np.testing.assert_allclose(marched.state, bench.steady_state, atol=1e-9)


def test_config_validation_and_defaults():
    cfg = BenchmarkConfig.from_config(get_config())
    assert (cfg.n, cfg.m, cfg.order, cfg.param_order) == (100, 10, 10, 10)
    assert cfg.grid == TimeGrid(0.0, 0.01, 1.0)
    assert cfg.ordering is ReductionOrdering.PARAMS_FIRST
    assert cfg.perturbation_scale == 0.1
    with pytest.raises(InvalidDimensionError):
        BenchmarkConfig(n=2, m=3)
    with pytest.raises(InvalidArgumentError):
        BenchmarkConfig(n=4, m=2, order=5)
    with pytest.raises(InvalidArgumentError):
        BenchmarkConfig(n=4, m=2, param_range=(0.2, 0.1))
    with pytest.raises(InvalidArgumentError):
        BenchmarkConfig(n=4, m=2, perturbation_scale=0.0)
    assert cfg.replace(seed=7).seed == 7


@pytest.mark.parametrize("experiment", list(ExperimentKind))
def test_full_order_reduction_is_exact(experiment):
    cfg = BenchmarkConfig(n=20, m=10, seed=2, order=20, param_order=20, experiment=experiment)
    report = run_experiment(cfg)
    assert report.aggregate_error <= 1e-8
    assert report.errors.shape == (cfg.grid.steps,)


def test_parameter_selection_drops_parameters():
    cfg = BenchmarkConfig(n=8, m=2, seed=1)
    model = generate_benchmark(cfg).model
    u = InputSignal.impulse(np.ones(2))
    result = reduce_pipeline('ws', model, cfg.grid, PerturbationSpec.default(model.dims), u,
                             order=2, param_order=3)
    assert len(result.kept_params) == 3
    dropped = [k for k in range(8) if k not in result.kept_params]
    np.testing.assert_array_equal(result.params[dropped], 0.0)
    np.testing.assert_array_equal(result.params[result.kept_params], model.p[result.kept_params])
    assert result.lift is None


def test_state_reduction_pipelines_report_shapes():
    cfg = BenchmarkConfig(n=8, m=2, seed=1)
    model = generate_benchmark(cfg).model
    spec = PerturbationSpec.default(model.dims)
    u = InputSignal.impulse(np.ones(2))
    for method in ('bt', 'wx', 'wj'):
        result = reduce_pipeline(method, model, cfg.grid, spec, u, order=3, param_order=4)
        assert result.model.dims.n == 3
        assert result.lift.shape == (8, 3) and result.reduce_state.shape == (3, 8)
        errors, aggregate, reduced_seconds, full_seconds = evaluate_reduction(model, result, cfg.grid, u)
        assert errors.shape == (cfg.grid.steps,)
        assert np.isfinite(aggregate) and aggregate >= 0.0
        assert reduced_seconds >= 0.0 and full_seconds >= 0.0


def test_states_first_ordering_reduces_parameters():
    cfg = BenchmarkConfig(n=8, m=2, seed=3, order=4, param_order=2, experiment='wj')
    params_first = run_experiment(cfg)
    states_first = run_experiment(cfg.replace(ordering='states_first'))
    assert np.isfinite(states_first.aggregate_error)
    assert states_first.aggregate_error != params_first.aggregate_error


def test_reports_are_deterministic():
    cfg = BenchmarkConfig(n=10, m=2, seed=4, order=3)
    first = run_suite(cfg, ['bt', 'ws'], seeds=[1, 2])
    second = run_suite(cfg, ['bt', 'ws'], seeds=[1, 2])
    assert [(r.seed, r.experiment) for r in first] == [
        (1, ExperimentKind.BT), (1, ExperimentKind.WS), (2, ExperimentKind.BT), (2, ExperimentKind.WS)]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.errors, b.errors)
    frame = summarize(first, deterministic=True)
    assert list(frame.columns) == SUMMARY_COLUMNS
    assert (frame[['gramian_seconds', 'reduction_seconds', 'simulation_seconds']] == 0.0).all().all()
    assert frame.equals(summarize(second, deterministic=True))


def test_error_frame_columns():
    report = run_experiment(BenchmarkConfig(n=6, m=2, seed=1, experiment='wx'))
    frame = report.error_frame()
    assert list(frame.columns) == ['t', 'relative_error']
    assert len(frame) == 101
    assert frame['t'].iloc[-1] == pytest.approx(1.0)


def test_timing_ratios_are_computed():
    cfg = BenchmarkConfig(n=8, m=2, seed=1)
    reports = run_suite(cfg, seeds=[1, 2])
    ratios = check_timing_claims(reports)
    assert set(ratios) == {'ws_over_wi_gramian', 'wx_over_bt_reduction'}
    assert all(value > 0.0 for value in ratios.values())
    medians = median_summary(reports)
    assert list(medians.index) == [e.value for e in ExperimentKind]


@pytest.mark.slow
def test_cross_truncation_error_decreases_with_order():
    cfg = BenchmarkConfig(n=8, m=2, experiment='wx')
    assert _median_error(cfg.replace(order=6), 'wx') <= _median_error(cfg.replace(order=2), 'wx')


@pytest.mark.slow
@pytest.mark.parametrize("experiment", ['bt', 'wx'])
def test_default_benchmark_error_decreases_with_order(experiment):
    cfg = BenchmarkConfig.from_config(get_config())
    assert _median_error(cfg.replace(order=20), experiment) <= _median_error(cfg.replace(order=5), experiment)


@pytest.mark.slow
def test_identifiability_reduction_beats_sensitivity_reduction():
    cfg = BenchmarkConfig.from_config(get_config())
    reports = run_suite(cfg, ['ws', 'wi'], seeds=range(1, 11))
    ratios = [ws.aggregate_error / wi.aggregate_error for ws, wi in zip(reports[::2], reports[1::2])]
    assert np.median(ratios) >= 10.0
