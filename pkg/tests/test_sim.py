import numpy as np
import pytest

from src.models.core import SnapshotMatrix, SystemDims, SystemModel, TimeGrid
from src.models.sim import (
    InputKind,
    InputSignal,
    IntegratorKind,
    find_steady_state,
    integrate,
    integrate_array,
    integrate_batch,
    output_trajectory,
)
from src.utils.errors import InvalidArgumentError, InvalidDimensionError, SimulationDivergenceError


def _decay(rate=1.0):
    return SystemModel(SystemDims(m=1, n=1, o=1),
                       lambda x, u, p: -rate * x + u, lambda x, u, p: 2.0 * x)


def test_euler_steps_by_hand():
    grid = TimeGrid(0.0, 0.1, 0.3)
    X = integrate(_decay(), 'euler', grid, [1.0], InputSignal.zero(1))
    np.testing.assert_allclose(X.data[0], [1.0, 0.9, 0.81, 0.729], rtol=1e-14)


def test_impulse_has_unit_time_integral():
    grid = TimeGrid(0.0, 0.01, 1.0)
    U = InputSignal.impulse([2.0, 1.0]).sample(grid)
    np.testing.assert_allclose(grid.dt * U.sum(axis=1), [2.0, 1.0])
    assert np.all(U[:, 1:] == 0.0)


def test_step_and_sampled_inputs():
    grid = TimeGrid(0.0, 0.5, 1.0)
    np.testing.assert_array_equal(InputSignal.step([3.0]).sample(grid), [[3.0, 3.0, 3.0]])
    samples = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(InputSignal.sampled(samples).sample(grid), samples)
    with pytest.raises(InvalidDimensionError):
        InputSignal.sampled(np.ones((1, 4))).sample(grid)
    with pytest.raises(InvalidArgumentError):
        InputSignal.named('sampled', 1)


def test_extended_input_channels():
    grid = TimeGrid(0.0, 0.5, 1.0)
    extended = InputSignal.impulse([1.0]).extended(2)
    assert extended.kind is InputKind.IMPULSE and extended.channels == 3
    assert InputSignal.zero(1).extended(2).channels == 3
    sampled = InputSignal.sampled(np.ones((1, 3))).extended(1, grid)
    np.testing.assert_array_equal(sampled.sample(grid)[1], [2.0, 0.0, 0.0])


@pytest.mark.parametrize("kind, low, high", [
    (IntegratorKind.EULER, 1.7, 2.3),
    (IntegratorKind.ADAMS_BASHFORTH2, 3.3, 4.7),
])
def test_integrator_convergence_order(kind, low, high):
    model = _decay()
    errors = []
    for dt in (0.01, 0.005):
        grid = TimeGrid(0.0, dt, 1.0)
        X = integrate(model, kind, grid, [1.0], InputSignal.zero(1))
        errors.append(abs(X.data[0, -1] - np.exp(-grid.times[-1])))
    assert low <= errors[0] / errors[1] <= high


def test_leapfrog_tracks_decay_on_short_horizon():
    grid = TimeGrid(0.0, 0.001, 1.0)
    X = integrate(_decay(), 'leapfrog', grid, [1.0], InputSignal.zero(1))
    assert X.data[0, -1] == pytest.approx(np.exp(-1.0), rel=1e-4)


def test_integrate_checks_dimensions():
    grid = TimeGrid(0.0, 0.1, 1.0)
    with pytest.raises(InvalidDimensionError):
        integrate(_decay(), 'euler', grid, [1.0, 2.0], InputSignal.zero(1))
    with pytest.raises(InvalidDimensionError):
        integrate(_decay(), 'euler', grid, [1.0], InputSignal.zero(2))


def test_divergence_reports_step():
    model = SystemModel(SystemDims(m=1, n=1, o=1), lambda x, u, p: x * x, lambda x, u, p: x)
    grid = TimeGrid(0.0, 0.5, 50.0)
    with pytest.raises(SimulationDivergenceError) as info:
        integrate(model, 'euler', grid, [1.0], InputSignal.zero(1))
    assert 0 < info.value.step < grid.steps
    assert info.value.exit_code == 5


@pytest.mark.parametrize("kind", list(IntegratorKind))
def test_batch_integration_matches_single_runs(kind):
    rng = np.random.default_rng(5)
    A = -np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))

    def f(x, u, p):
        return A @ np.tanh(x) + B @ u

    X0 = rng.standard_normal((3, 4))
    U = rng.standard_normal((2, 4, 50))
    batch = integrate_batch(f, kind, 0.01, X0, U, None)
    assert len(batch) == 4
    for col, X in enumerate(batch):
        single = integrate_array(f, kind, 0.01, X0[:, col], U[:, col, :], None)
        np.testing.assert_allclose(X, single, rtol=1e-12, atol=1e-14)


def test_batch_divergence_names_the_run():
    X0 = np.array([[-0.1, 1.0]])
    with pytest.raises(SimulationDivergenceError) as info:
        integrate_batch(lambda x, u, p: x * x, 'euler', 0.5, X0, np.zeros((1, 2, 100)), None,
                        labels=[('first',), ('second',)])
    assert info.value.context == ('second',)


def test_output_trajectory_applies_output_map():
    grid = TimeGrid(0.0, 0.1, 0.3)
    model = _decay()
    u = InputSignal.zero(1)
    Y = output_trajectory(model, integrate(model, 'euler', grid, [1.0], u), u)
    np.testing.assert_allclose(Y.data[0], [2.0, 1.8, 1.62, 1.458], rtol=1e-14)
    with pytest.raises(InvalidDimensionError):
        output_trajectory(model, SnapshotMatrix(np.zeros((2, 4)), grid), u)


def test_steady_state_converges():
    model = SystemModel(SystemDims(m=1, n=1, o=1), lambda x, u, p: -(x - 2.0) + u, lambda x, u, p: x)
    steady = find_steady_state(model, [0.0], None, [0.0], TimeGrid(0.0, 0.1, 100.0), 1e-8)
    assert steady.converged
    assert steady.state[0] == pytest.approx(2.0, abs=1e-7)


def test_steady_state_reports_non_convergence():
    model = SystemModel(SystemDims(m=1, n=1, o=1), lambda x, u, p: -(x - 2.0) + u, lambda x, u, p: x)
    steady = find_steady_state(model, [0.0], None, [0.0], TimeGrid(0.0, 0.1, 1.0), 1e-8)
    assert not steady.converged
    assert steady.steps == 10
    with pytest.raises(InvalidArgumentError):
        find_steady_state(model, [0.0], None, [0.0], TimeGrid(0.0, 0.1, 1.0), 0.0)
