"""
Empirical controllability, observability and cross gramians.

Each gramian is assembled from two simulation families:

- input runs (h, i, j): scale c_h, sign s_i, input direction e_j; the
  system starts at the steady state x̄ under u(t) = s_i·c_h·e_j∘u(t) + ū;
- state runs (k, l, a): scale d_k, sign s_l, state direction f_a; the
  system starts at x̄ + s_l·d_k·f_a under the constant steady input ū.

Runs are ordered h (or k) outermost, then the sign, then the direction,
and contributions are accumulated sequentially in that order, so results
are bit-identical whether the simulations run serially or in parallel.
Vectorized models integrate each run family as a single n×K batch.
Time integrals use left-rectangle quadrature dt·Σ over the snapshot grid.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np
from joblib import Parallel, delayed

from src.models.core import (
    CenteringKind,
    Gramian,
    GramianKind,
    _center_array,
    _ParsableEnum,
)
from src.models.sim import IntegratorKind, InputSignal, integrate_array, integrate_batch, output_array
from src.utils.errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidSnapshotError,
    NoParametersError,
    SimulationDivergenceError,
    SquareSystemRequiredError,
)

logger = logging.getLogger(__name__)


class GramianType(_ParsableEnum):
    """Gramian selector of the unified interface."""
    C = 'c'
    O = 'o'
    X = 'x'
    S = 's'
    I = 'i'
    J = 'j'


@dataclass
class SnapshotData:
    """
    Raw (uncentered) trajectories consumed by a gramian assembly.

    ``states`` holds the n×T state trajectories of the input runs in
    (h, i, j) order; ``outputs`` holds the o×T output trajectories of the
    state runs in (k, l, a) order.
    """
    states: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)


@dataclass(frozen=True)
class InputRun:
    h: int
    i: int
    j: int
    scale: float
    sign: float


@dataclass(frozen=True)
class StateRun:
    k: int
    l: int
    a: int
    scale: float
    sign: float


# --- Run plans ---

def input_runs(spec, channels):
    scales = spec.scale_table(spec.input_scales)
    runs = []
    for h in range(spec.scale_count):
        for i, sign in enumerate(spec.signs):
            for j in channels:
                runs.append(InputRun(h, i, j, float(scales[j, h]), float(sign)))
    return runs


def state_runs(spec, directions):
    scales = spec.scale_table(spec.state_scales)
    runs = []
    for k in range(spec.scale_count):
        for l, sign in enumerate(spec.signs):
            for a in directions:
                runs.append(StateRun(k, l, a, float(scales[a, k]), float(sign)))
    return runs


def run_parallel(func, items, jobs=1):
    """Maps func over items, preserving order; threads when jobs > 1."""
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=jobs, prefer='threads')(delayed(func)(item) for item in items)


def _simulate_input_run(model, grid, spec, base, integrator, run):
    U = np.repeat(spec.steady_input[:, None], grid.steps, axis=1)
    U[run.j] += (run.sign * run.scale) * base[run.j]
    try:
        return integrate_array(model.f, integrator, grid.dt, spec.steady_state, U, model.p)
    except SimulationDivergenceError as err:
        raise err.with_context(f"h={run.h}", f"i={run.i}", f"j={run.j}") from err


def _simulate_state_run(model, grid, spec, integrator, run):
    U = np.repeat(spec.steady_input[:, None], grid.steps, axis=1)
    x0 = spec.steady_state.copy()
    x0[run.a] += run.sign * run.scale
    try:
        X = integrate_array(model.f, integrator, grid.dt, x0, U, model.p)
        return output_array(model.g, X, U, model.p)
    except SimulationDivergenceError as err:
        raise err.with_context(f"k={run.k}", f"l={run.l}", f"a={run.a}") from err


def _simulate_input_batch(model, grid, spec, base, integrator, runs):
    gains = np.zeros((model.dims.m, len(runs)))
    for col, run in enumerate(runs):
        gains[run.j, col] = run.sign * run.scale
    U = spec.steady_input[:, None, None] + gains[:, :, None] * base[:, None, :]
    X0 = np.repeat(spec.steady_state[:, None], len(runs), axis=1)
    labels = [(f"h={run.h}", f"i={run.i}", f"j={run.j}") for run in runs]
    return integrate_batch(model.f, integrator, grid.dt, X0, U, model.p, labels)


def _simulate_state_batch(model, grid, spec, integrator, runs):
    X0 = np.repeat(spec.steady_state[:, None], len(runs), axis=1)
    for col, run in enumerate(runs):
        X0[run.a, col] += run.sign * run.scale
    U = np.broadcast_to(spec.steady_input[:, None, None], (model.dims.m, len(runs), grid.steps))
    labels = [(f"k={run.k}", f"l={run.l}", f"a={run.a}") for run in runs]
    states = integrate_batch(model.f, integrator, grid.dt, X0, U, model.p, labels)
    outputs = []
    for X, label in zip(states, labels):
        try:
            outputs.append(output_array(model.g, X, U[:, 0, :], model.p, vectorized=True))
        except SimulationDivergenceError as err:
            raise err.with_context(*label) from err
    return outputs


def simulate_input_runs(model, grid, spec, u, integrator, runs, jobs=1):
    base = u.sample(grid)
    integrator = IntegratorKind.parse(integrator)
    if model.vectorized and runs:
        return _simulate_input_batch(model, grid, spec, base, integrator, runs)
    return run_parallel(lambda run: _simulate_input_run(model, grid, spec, base, integrator, run), runs, jobs)


def simulate_state_runs(model, grid, spec, integrator, runs, jobs=1):
    integrator = IntegratorKind.parse(integrator)
    if model.vectorized and runs:
        return _simulate_state_batch(model, grid, spec, integrator, runs)
    return run_parallel(lambda run: _simulate_state_run(model, grid, spec, integrator, run), runs, jobs)


def _checked(trajectories, expected, rows, grid, what):
    if len(trajectories) != expected:
        raise InvalidSnapshotError(f"{what}: expected {expected} trajectories, got {len(trajectories)}")
    checked = []
    for traj in trajectories:
        traj = np.asarray(traj, dtype=float)
        if traj.shape != (rows, grid.steps):
            raise InvalidSnapshotError(f"{what}: trajectory of shape {traj.shape}, expected {(rows, grid.steps)}")
        checked.append(traj)
    return checked


def _validate(model, spec, u=None):
    spec.check(model.dims)
    if u is not None and u.channels != model.dims.m:
        raise InvalidDimensionError(f"input signal has {u.channels} channels, expected {model.dims.m}")


def _steady_output(model, spec):
    return output_array(model.g, spec.steady_state[:, None], spec.steady_input[:, None], model.p)[:, 0]


# --- Assembly kernels ---

def controllability_parts(model, grid, spec, u, integrator=IntegratorKind.EULER,
                          centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """
    Per-channel controllability contributions.

    Returns:
        dict: channel j -> n×n partial gramian, already normalized by q·|signs|;
              the sum over channels is the empirical controllability gramian.
    """
    dims = model.dims
    if dims.m < 1:
        raise InvalidDimensionError("controllability requires at least one input (m >= 1)")
    _validate(model, spec, u)
    centering = CenteringKind.parse(centering)
    runs = input_runs(spec, range(dims.m))
    if data is not None:
        trajectories = _checked(data.states, len(runs), dims.n, grid, "state snapshots")
    else:
        trajectories = simulate_input_runs(model, grid, spec, u, integrator, runs, jobs)

    parts = {j: np.zeros((dims.n, dims.n)) for j in range(dims.m)}
    for run, X in zip(runs, trajectories):
        dX, _ = _center_array(X, centering, spec.steady_state, pod_rank)
        parts[run.j] += (grid.dt / run.scale ** 2) * (dX @ dX.T)
    norm = spec.scale_count * spec.signs.size
    for j in parts:
        parts[j] = parts[j] / norm
    return parts


def _symmetrized(W):
    return (W + W.T) / 2.0


def observability_factor(model, grid, spec, integrator=IntegratorKind.EULER,
                         centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """
    Stacked snapshot factor Z of the empirical observability gramian, W_O = ZᵀZ.

    Each (k, l) block contributes o·T rows; column a holds the vectorized
    centered output of direction a weighted by sqrt(dt/(q·|signs|))/d_k.
    """
    dims = model.dims
    if dims.o < 1:
        raise InvalidDimensionError("observability requires at least one output (o >= 1)")
    _validate(model, spec)
    centering = CenteringKind.parse(centering)
    runs = state_runs(spec, range(dims.n))
    if data is not None:
        trajectories = _checked(data.outputs, len(runs), dims.o, grid, "output snapshots")
    else:
        trajectories = simulate_state_runs(model, grid, spec, integrator, runs, jobs)
    y_bar = _steady_output(model, spec)

    weight = np.sqrt(grid.dt / (spec.scale_count * spec.signs.size))
    blocks = []
    for start in range(0, len(runs), dims.n):
        Y = np.empty((dims.o * grid.steps, dims.n))
        for a in range(dims.n):
            run = runs[start + a]
            dY, _ = _center_array(trajectories[start + a], centering, y_bar, pod_rank)
            Y[:, a] = dY.ravel(order='F') * (weight / run.scale)
        blocks.append(Y)
    return np.vstack(blocks)


def observability_matrix(model, grid, spec, integrator=IntegratorKind.EULER,
                         centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """Empirical observability gramian as a plain n×n array."""
    Z = observability_factor(model, grid, spec, integrator, centering, data, jobs, pod_rank)
    return _symmetrized(Z.T @ Z)


def cross_matrix(model, grid, spec, u, integrator=IntegratorKind.EULER,
                 centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1, input_average=False):
    """
    Empirical cross gramian as a plain n×n array.

    Entry [b, a] accumulates s_i·s_l/(c_h·d_k) · dt·Σ_t Δx_b^{hij}(t)·Δy_j^{kla}(t),
    which converges to the solution of A W + W Aᵀ = -BC for linear systems.
    """
    dims = model.dims
    if not dims.is_square:
        raise SquareSystemRequiredError(dims.m, dims.o)
    if dims.m < 1:
        raise InvalidDimensionError("cross gramian requires at least one input (m >= 1)")
    _validate(model, spec, u)
    centering = CenteringKind.parse(centering)
    in_runs = input_runs(spec, range(dims.m))
    st_runs = state_runs(spec, range(dims.n))
    if data is not None:
        states = _checked(data.states, len(in_runs), dims.n, grid, "state snapshots")
        outputs = _checked(data.outputs, len(st_runs), dims.o, grid, "output snapshots")
    else:
        states = simulate_input_runs(model, grid, spec, u, integrator, in_runs, jobs)
        outputs = simulate_state_runs(model, grid, spec, integrator, st_runs, jobs)
    y_bar = _steady_output(model, spec)

    # (k, l) blocks of centered outputs, shape (o, T, n), scaled by s_l / d_k
    blocks = []
    for start in range(0, len(st_runs), dims.n):
        block = np.empty((dims.o, grid.steps, dims.n))
        for a in range(dims.n):
            run = st_runs[start + a]
            dY, _ = _center_array(outputs[start + a], centering, y_bar, pod_rank)
            block[:, :, a] = dY * (run.sign / run.scale)
        blocks.append(block)

    W = np.zeros((dims.n, dims.n))
    for run, X in zip(in_runs, states):
        dX, _ = _center_array(X, centering, spec.steady_state, pod_rank)
        dX = dX * (run.sign / run.scale)
        for block in blocks:
            W += grid.dt * (dX @ block[run.j])
    norm = spec.scale_count * spec.signs.size * spec.scale_count * spec.signs.size
    if input_average:
        norm *= dims.m
    return W / norm


# --- Public operations ---

def empirical_controllability(model, grid, spec, u, integrator=IntegratorKind.EULER,
                              centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """
    Empirical controllability gramian W_C (n×n).

    Args:
        model (SystemModel): System with m >= 1 inputs.
        grid (TimeGrid): Simulation grid.
        spec (PerturbationSpec): Rotations, scales and steady point.
        u (InputSignal): Training input, perturbed channel by channel.
        integrator (IntegratorKind): Time stepping scheme.
        centering (CenteringKind): Reference the state snapshots are centered at.
        data (SnapshotData): Optional recorded state trajectories replacing simulation.
        jobs (int): Parallel simulation workers.
        pod_rank (int): Components removed by POD centering.
    """
    started = time.perf_counter()
    parts = controllability_parts(model, grid, spec, u, integrator, centering, data, jobs, pod_rank)
    W = np.zeros((model.dims.n, model.dims.n))
    for j in range(model.dims.m):
        W += parts[j]
    logger.info("Controllability gramian (n=%d) assembled in %.3f s", model.dims.n, time.perf_counter() - started)
    return Gramian(_symmetrized(W), GramianKind.CONTROLLABILITY,
                   {'centering': CenteringKind.parse(centering).value,
                    'simulations': 0 if data is not None else len(input_runs(spec, range(model.dims.m)))})


def empirical_observability(model, grid, spec, integrator=IntegratorKind.EULER,
                            centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1):
    """Empirical observability gramian W_O (n×n) from initial-state perturbations."""
    started = time.perf_counter()
    W = observability_matrix(model, grid, spec, integrator, centering, data, jobs, pod_rank)
    logger.info("Observability gramian (n=%d) assembled in %.3f s", model.dims.n, time.perf_counter() - started)
    return Gramian(W, GramianKind.OBSERVABILITY,
                   {'centering': CenteringKind.parse(centering).value,
                    'simulations': 0 if data is not None else len(state_runs(spec, range(model.dims.n)))})


def empirical_cross(model, grid, spec, u, integrator=IntegratorKind.EULER,
                    centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1, input_average=False):
    """
    Empirical cross gramian W_X (n×n) of a square system.

    ``input_average=True`` additionally divides by the number of inputs m.
    """
    started = time.perf_counter()
    W = cross_matrix(model, grid, spec, u, integrator, centering, data, jobs, pod_rank, input_average)
    logger.info("Cross gramian (n=%d) assembled in %.3f s", model.dims.n, time.perf_counter() - started)
    return Gramian(W, GramianKind.CROSS, {'centering': CenteringKind.parse(centering).value,
                                          'input_average': bool(input_average)})


def record_snapshots(gramian_type, model, grid, spec, u=None, integrator=IntegratorKind.EULER, jobs=1):
    """
    Simulates the trajectories a C, O or X assembly consumes.

    The returned SnapshotData can be passed back as ``data`` to reproduce
    the simulated gramian bit-identically.
    """
    gramian_type = GramianType.parse(gramian_type)
    data = SnapshotData()
    if gramian_type in (GramianType.C, GramianType.X):
        runs = input_runs(spec, range(model.dims.m))
        data.states = simulate_input_runs(model, grid, spec, u, integrator, runs, jobs)
    if gramian_type in (GramianType.O, GramianType.X):
        runs = state_runs(spec, range(model.dims.n))
        data.outputs = simulate_state_runs(model, grid, spec, integrator, runs, jobs)
    if gramian_type not in (GramianType.C, GramianType.O, GramianType.X):
        raise InvalidArgumentError("snapshot recording supports gramian types c, o and x")
    return data


def empirical_gramian(gramian_type, model, grid, spec, u=None, integrator=IntegratorKind.EULER,
                      centering=CenteringKind.STEADY, data=None, jobs=1, pod_rank=1, tol=1e-12,
                      input_average=False, approximate=False):
    """
    Unified interface to all six empirical gramians.

    Args:
        gramian_type (str): 'c', 'o', 'x', 's', 'i' or 'j'.
        data (SnapshotData): Recorded trajectories replacing simulation (the
            augmented system's trajectories for 'i' and 'j', the parameter-input
            system's for 's').

    Returns:
        Gramian for 'c', 'o', 'x'; a pair (W_C, W_S), (W_O, W_I) or
        (W_X, W_Ï) for 's', 'i', 'j'.
    """
    from src.models import pgramian

    gramian_type = GramianType.parse(gramian_type)
    dims = model.dims
    if gramian_type in (GramianType.X, GramianType.J) and not dims.is_square:
        raise SquareSystemRequiredError(dims.m, dims.o)
    if gramian_type in (GramianType.S, GramianType.I, GramianType.J) and dims.P == 0:
        raise NoParametersError(f"gramian type '{gramian_type.value}'")
    if u is None:
        u = InputSignal.impulse(np.ones(dims.m))
    options = dict(integrator=integrator, centering=centering, data=data, jobs=jobs, pod_rank=pod_rank)

    if gramian_type is GramianType.C:
        return empirical_controllability(model, grid, spec, u, **options)
    if gramian_type is GramianType.O:
        return empirical_observability(model, grid, spec, **options)
    if gramian_type is GramianType.X:
        return empirical_cross(model, grid, spec, u, input_average=input_average, **options)
    if gramian_type is GramianType.S:
        return pgramian.sensitivity_gramian(model, grid, spec, u, **options)
    if gramian_type is GramianType.I:
        return pgramian.identifiability_gramian(model, grid, spec, tol=tol, approximate=approximate, **options)
    return pgramian.joint_gramian(model, grid, spec, u, tol=tol, input_average=input_average,
                                  approximate=approximate, **options)
