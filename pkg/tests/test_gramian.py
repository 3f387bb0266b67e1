import dataclasses
import time

import numpy as np
import pytest

from src.models.core import GramianKind, PerturbationSpec, SystemDims, SystemModel, TimeGrid
from src.models.gramian import (
    SnapshotData,
    empirical_controllability,
    empirical_cross,
    empirical_gramian,
    empirical_observability,
    input_runs,
    record_snapshots,
    state_runs,
)
from src.models.oracle import hankel_values, random_linear_system
from src.models.sim import InputSignal
from src.utils.errors import (
    InvalidDimensionError,
    InvalidSnapshotError,
    NoParametersError,
    SimulationDivergenceError,
    SquareSystemRequiredError,
)


def _rel(empirical, analytic):
    return np.linalg.norm(empirical - analytic) / np.linalg.norm(analytic)


def _long_grid(system, dt):
    return TimeGrid(0.0, dt, 10.0 / system.slowest_rate())


def test_run_plan_order():
    spec = PerturbationSpec.from_config(SystemDims(m=2, n=3, o=1), {'rotation_kind': 'signed', 'scale_count': 2})
    runs = input_runs(spec, range(2))
    assert [(r.h, r.i, r.j) for r in runs[:4]] == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]
    assert len(runs) == 8
    assert [r.scale for r in runs[:2]] == [0.5, 0.5]
    assert len(state_runs(spec, range(3))) == 12


def test_scalar_gramians_approach_one_half(scalar_model):
    grid = TimeGrid(0.0, 1e-3, 10.0)
    spec = PerturbationSpec.default(scalar_model.dims)
    u = InputSignal.impulse([1.0])
    for gramian_type in ('c', 'o', 'x'):
        W = empirical_gramian(gramian_type, scalar_model, grid, spec, u)
        assert W.matrix.shape == (1, 1)
        assert W.matrix[0, 0] == pytest.approx(0.5, rel=2e-3)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_linear_correspondence_with_lyapunov_oracles(seed):
    system = random_linear_system(6, 2, 2, seed=seed)
    model = system.to_model()
    spec = PerturbationSpec.default(model.dims)
    u = InputSignal.impulse(np.ones(2))
    errors = {}
    for dt in (2e-3, 1e-3):
        grid = _long_grid(system, dt)
        errors[dt] = (
            _rel(empirical_controllability(model, grid, spec, u).matrix, system.ctrb()),
            _rel(empirical_observability(model, grid, spec).matrix, system.obsv()),
            _rel(empirical_cross(model, grid, spec, u).matrix, system.cross()),
        )
    wc, wo, wx = errors[1e-3]
    assert wc <= 2e-2 and wo <= 2e-2 and wx <= 3e-2
    for coarse, fine in zip(errors[2e-3], errors[1e-3]):
        assert fine < coarse


def test_cross_gramian_eigenvalues_match_hankel_values():
    system = random_linear_system(8, 2, 2, seed=21, symmetric=True)
    model = system.to_model()
    grid = _long_grid(system, 5e-4)
    Wx = empirical_cross(model, grid, PerturbationSpec.default(model.dims), InputSignal.impulse(np.ones(2)))
    empirical = np.sort(np.abs(np.linalg.eigvals(Wx.matrix)))[::-1][:4]
    analytic = hankel_values(system.ctrb(), system.obsv())[:4]
    np.testing.assert_allclose(empirical, analytic, rtol=5e-2)


def test_linear_gramians_do_not_depend_on_scales_or_rotations(linear_model, grid):
    u = InputSignal.impulse(np.ones(2))
    plain = PerturbationSpec.default(linear_model.dims)
    rich = PerturbationSpec.from_config(linear_model.dims, {
        'rotation_kind': 'signed', 'scale_kind': 'geom', 'scale_count': 3,
        'input_scale': 0.5, 'state_scale': 2.0})
    for gramian_type in ('c', 'o', 'x'):
        W1 = empirical_gramian(gramian_type, linear_model, grid, plain, u).matrix
        W2 = empirical_gramian(gramian_type, linear_model, grid, rich, u).matrix
        np.testing.assert_allclose(W2, W1, rtol=1e-9, atol=1e-12 * np.abs(W1).max())


def test_gramians_are_symmetric_and_psd():
    rng = np.random.default_rng(0)
    configs = [
        {'rotation_kind': 'single', 'scale_kind': 'linear', 'scale_count': 1},
        {'rotation_kind': 'signed', 'scale_kind': 'log', 'scale_count': 2},
        {'rotation_kind': 'signed', 'scale_kind': 'geom', 'scale_count': 2},
    ]
    centerings = ['steady', 'mean', 'median', 'pod']
    grid = TimeGrid(0.0, 0.01, 0.5)
    for trial in range(12):
        n = int(rng.integers(2, 5))
        A = -np.eye(n) + 0.3 * rng.standard_normal((n, n))
        B = rng.standard_normal((n, 2))
        C = rng.standard_normal((1, n))
        model = SystemModel(SystemDims(m=2, n=n, o=1),
                            lambda x, u, p, A=A, B=B: A @ np.tanh(x) + B @ u,
                            lambda x, u, p, C=C: C @ x + 0.1 * (C @ x) ** 2)
        spec = PerturbationSpec.from_config(model.dims, configs[trial % 3])
        centering = centerings[trial % 4]
        for W in (empirical_controllability(model, grid, spec, InputSignal.impulse(np.ones(2)), centering=centering),
                  empirical_observability(model, grid, spec, centering=centering)):
            np.testing.assert_array_equal(W.matrix, W.matrix.T)
            assert np.linalg.eigvalsh(W.matrix).min() >= -1e-10 * np.linalg.norm(W.matrix)


def test_recorded_snapshots_reproduce_gramians(linear_model, grid):
    spec = PerturbationSpec.from_config(linear_model.dims, {'rotation_kind': 'signed'})
    u = InputSignal.impulse(np.ones(2))
    for gramian_type in ('c', 'o', 'x'):
        data = record_snapshots(gramian_type, linear_model, grid, spec, u)
        simulated = empirical_gramian(gramian_type, linear_model, grid, spec, u)
        replayed = empirical_gramian(gramian_type, linear_model, grid, spec, u, data=data)
        np.testing.assert_array_equal(replayed.matrix, simulated.matrix)


def test_snapshot_data_is_validated(linear_model, grid):
    spec = PerturbationSpec.default(linear_model.dims)
    data = SnapshotData(states=[np.zeros((4, grid.steps))])
    with pytest.raises(InvalidSnapshotError):
        empirical_gramian('c', linear_model, grid, spec, data=data)
    data = SnapshotData(states=[np.zeros((4, 3)), np.zeros((4, 3))])
    with pytest.raises(InvalidSnapshotError):
        empirical_gramian('c', linear_model, grid, spec, data=data)


def test_parallel_assembly_is_bit_identical(linear_model, grid):
    model = dataclasses.replace(linear_model, vectorized=False)
    spec = PerturbationSpec.from_config(model.dims, {'rotation_kind': 'signed', 'scale_count': 2})
    u = InputSignal.impulse(np.ones(2))
    for gramian_type in ('c', 'o', 'x'):
        serial = empirical_gramian(gramian_type, model, grid, spec, u, jobs=1)
        parallel = empirical_gramian(gramian_type, model, grid, spec, u, jobs=3)
        np.testing.assert_array_equal(parallel.matrix, serial.matrix)


def test_batched_assembly_matches_per_run_assembly(linear_model, grid):
    per_run = dataclasses.replace(linear_model, vectorized=False)
    spec = PerturbationSpec.from_config(linear_model.dims, {'rotation_kind': 'signed'},
                                        steady_state=[0.1, -0.2, 0.0, 0.3])
    u = InputSignal.impulse(np.ones(2))
    for gramian_type in ('c', 'o', 'x'):
        batched = empirical_gramian(gramian_type, linear_model, grid, spec, u).matrix
        single = empirical_gramian(gramian_type, per_run, grid, spec, u).matrix
        assert np.linalg.norm(batched - single) <= 1e-12 * np.linalg.norm(single)


def test_cross_gramian_input_average(linear_model, grid):
    spec = PerturbationSpec.default(linear_model.dims)
    u = InputSignal.impulse(np.ones(2))
    summed = empirical_cross(linear_model, grid, spec, u)
    averaged = empirical_cross(linear_model, grid, spec, u, input_average=True)
    np.testing.assert_allclose(averaged.matrix * 2.0, summed.matrix, rtol=1e-14)
    assert summed.kind is GramianKind.CROSS


def test_applicability_checks(grid):
    system = random_linear_system(3, 2, 1, seed=1)
    model = system.to_model()
    spec = PerturbationSpec.default(model.dims)
    with pytest.raises(SquareSystemRequiredError):
        empirical_gramian('x', model, grid, spec)
    with pytest.raises(SquareSystemRequiredError):
        empirical_gramian('j', model, grid, spec)
    with pytest.raises(NoParametersError):
        empirical_gramian('i', model, grid, spec)
    no_output = SystemModel(SystemDims(m=1, n=1, o=0), lambda x, u, p: -x + u, lambda x, u, p: np.zeros(0))
    with pytest.raises(InvalidDimensionError):
        empirical_gramian('o', no_output, grid, PerturbationSpec.default(no_output.dims))


def test_divergence_carries_loop_context():
    model = SystemModel(SystemDims(m=1, n=1, o=1), lambda x, u, p: x * x + u, lambda x, u, p: x)
    grid = TimeGrid(0.0, 0.5, 50.0)
    spec = PerturbationSpec.default(model.dims)
    with pytest.raises(SimulationDivergenceError) as info:
        empirical_gramian('c', model, grid, spec, InputSignal.impulse([1.0]))
    assert info.value.context == ('h=0', 'i=0', 'j=0')
    with pytest.raises(SimulationDivergenceError) as info:
        empirical_gramian('o', model, grid, spec)
    assert info.value.context == ('k=0', 'l=0', 'a=0')


@pytest.mark.slow
def test_linear_correspondence_at_full_resolution():
    started = time.perf_counter()
    for seed in range(1, 11):
        system = random_linear_system(6, 2, 2, seed=seed)
        model = system.to_model()
        spec = PerturbationSpec.default(model.dims)
        u = InputSignal.impulse(np.ones(2))
        grid = _long_grid(system, 1e-4)
        assert _rel(empirical_controllability(model, grid, spec, u).matrix, system.ctrb()) <= 2e-2
        assert _rel(empirical_observability(model, grid, spec).matrix, system.obsv()) <= 2e-2
        assert _rel(empirical_cross(model, grid, spec, u).matrix, system.cross()) <= 3e-2
    assert time.perf_counter() - started < 60.0
