"""
Fixed-step explicit time integration and snapshot collection.

Inputs are held constant over each step (zero-order hold). Three schemes are
available: first order Euler, second order Adams-Bashforth and the two-step
leapfrog (explicit midpoint) scheme; the two-step schemes are started with
one Euler step.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.models.core import SnapshotMatrix, _ParsableEnum
from src.utils.errors import InvalidArgumentError, InvalidDimensionError, SimulationDivergenceError

logger = logging.getLogger(__name__)


class IntegratorKind(_ParsableEnum):
    EULER = 'euler'
    ADAMS_BASHFORTH2 = 'ab2'
    LEAPFROG = 'leapfrog'


class InputKind(_ParsableEnum):
    ZERO = 'zero'
    IMPULSE = 'impulse'
    STEP = 'step'
    SAMPLED = 'sampled'


@dataclass(frozen=True)
class InputSignal:
    """
    Input signal u(t) on a time grid.

    Impulse inputs take the value amplitude/dt on the first step and zero
    afterwards, so that dt·Σ u_k equals the amplitude for every dt.
    """
    kind: InputKind
    amplitude: np.ndarray
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', InputKind.parse(self.kind))
        object.__setattr__(self, 'amplitude', np.asarray(self.amplitude, dtype=float).reshape(-1))
        if self.kind is InputKind.SAMPLED:
            if self.samples is None:
                raise InvalidArgumentError("sampled input requires a sample matrix")
            samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
            if samples.shape[0] != self.amplitude.size:
                raise InvalidDimensionError(
                    f"sample matrix has {samples.shape[0]} rows, expected {self.amplitude.size}")
            object.__setattr__(self, 'samples', samples)

    @classmethod
    def zero(cls, m):
        return cls(InputKind.ZERO, np.zeros(m))

    @classmethod
    def impulse(cls, amplitude):
        return cls(InputKind.IMPULSE, amplitude)

    @classmethod
    def step(cls, amplitude):
        return cls(InputKind.STEP, amplitude)

    @classmethod
    def sampled(cls, samples):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        return cls(InputKind.SAMPLED, np.ones(samples.shape[0]), samples)

    @classmethod
    def named(cls, kind, m):
        """Unit-amplitude signal of the named kind ('zero', 'impulse', 'step')."""
        kind = InputKind.parse(kind)
        if kind is InputKind.SAMPLED:
            raise InvalidArgumentError("sampled inputs must be built from a sample matrix")
        if kind is InputKind.ZERO:
            return cls.zero(m)
        return cls(kind, np.ones(m))

    @property
    def channels(self):
        return self.amplitude.size

    def sample(self, grid):
        T = grid.steps
        m = self.channels
        if self.kind is InputKind.ZERO:
            return np.zeros((m, T))
        if self.kind is InputKind.STEP:
            return np.repeat(self.amplitude[:, None], T, axis=1)
        if self.kind is InputKind.IMPULSE:
            values = np.zeros((m, T))
            values[:, 0] = self.amplitude / grid.dt
            return values
        if self.samples.shape[1] != T:
            raise InvalidDimensionError(
                f"sampled input has {self.samples.shape[1]} samples, grid has {T}")
        return self.samples

    def extended(self, extra, grid=None):
        """
        Appends ``extra`` impulse channels with unit amplitude.

        Impulse and Step signals extend with the same kind; a sampled signal
        extends with discrete unit impulses (requires the grid); a zero
        signal stays zero.
        """
        if extra == 0:
            return self
        ones = np.ones(extra)
        if self.kind is InputKind.ZERO:
            return InputSignal.zero(self.channels + extra)
        if self.kind in (InputKind.IMPULSE, InputKind.STEP):
            return InputSignal(self.kind, np.concatenate([self.amplitude, ones]))
        if grid is None:
            raise InvalidArgumentError("extending a sampled input requires the time grid")
        impulses = np.zeros((extra, grid.steps))
        impulses[:, 0] = 1.0 / grid.dt
        return InputSignal.sampled(np.vstack([self.sample(grid), impulses]))


@dataclass(frozen=True)
class SteadyState:
    state: np.ndarray
    converged: bool
    steps: int


def _first_bad_column(X):
    bad = ~np.isfinite(X).all(axis=0)
    if bad.any():
        return int(np.argmax(bad))
    return None


def _march(f, kind, dt, x0, U, p):
    # trailing axis of U and of the result is time; x0 is one state or n×K columns
    kind = IntegratorKind.parse(kind)
    x = np.array(x0, dtype=float)
    T = U.shape[-1]
    X = np.empty(x.shape + (T,))
    X[..., 0] = x
    with np.errstate(over='ignore', invalid='ignore'):
        if kind is IntegratorKind.EULER:
            for k in range(T - 1):
                x = x + dt * f(x, U[..., k], p)
                X[..., k + 1] = x
        elif kind is IntegratorKind.ADAMS_BASHFORTH2:
            f_prev = f(x, U[..., 0], p)
            x = x + dt * f_prev
            X[..., 1] = x
            for k in range(1, T - 1):
                f_k = f(x, U[..., k], p)
                x = x + dt * (1.5 * f_k - 0.5 * f_prev)
                f_prev = f_k
                X[..., k + 1] = x
        else:
            x_prev = x
            x = x + dt * f(x, U[..., 0], p)
            X[..., 1] = x
            for k in range(1, T - 1):
                x_next = x_prev + (2.0 * dt) * f(x, U[..., k], p)
                x_prev, x = x, x_next
                X[..., k + 1] = x
    return X


def integrate_array(f, kind, dt, x0, U, p):
    """
    Integrates x' = f(x, u, p) with inputs U (m×T); returns the n×T state array.

    Column 0 is x0; column k approximates x(t0 + k·dt).
    """
    X = _march(f, kind, dt, x0, U, p)
    step = _first_bad_column(X)
    if step is not None:
        raise SimulationDivergenceError(step)
    return X


def integrate_batch(f, kind, dt, X0, U, p, labels=None):
    """
    Integrates K trajectories of a vectorized vector field at once.

    Args:
        X0 (array): Initial states, n×K.
        U (array): Inputs, m×K×T.
        labels (list): Optional per-column context reported on divergence.

    Returns:
        list: K state arrays of shape n×T, in column order of X0.
    """
    X = _march(f, kind, dt, X0, U, p)
    trajectories = [X[:, col, :] for col in range(X.shape[1])]
    for col, traj in enumerate(trajectories):
        step = _first_bad_column(traj)
        if step is not None:
            raise SimulationDivergenceError(step, labels[col] if labels else (f"run={col}",))
    return trajectories


def integrate(model, kind, grid, x0, u, p=None):
    """
    Simulates the model on the grid.

    Args:
        model (SystemModel): System to simulate.
        kind (IntegratorKind): Euler, AdamsBashforth2 or Leapfrog.
        grid (TimeGrid): Uniform time grid.
        x0 (array): Initial state, length n.
        u (InputSignal): Input signal with m channels.
        p (array): Parameter vector; defaults to the model's nominal parameters.

    Returns:
        SnapshotMatrix: States, n×T.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != model.dims.n:
        raise InvalidDimensionError(f"initial state has length {x0.size}, expected {model.dims.n}")
    if u.channels != model.dims.m:
        raise InvalidDimensionError(f"input has {u.channels} channels, expected {model.dims.m}")
    p = model.p if p is None else np.asarray(p, dtype=float)
    X = integrate_array(model.f, kind, grid.dt, x0, u.sample(grid), p)
    return SnapshotMatrix(X, grid)


def output_array(g, X, U, p, vectorized=False):
    """Applies the output map to every column of X; returns the o×T output array."""
    with np.errstate(over='ignore', invalid='ignore'):
        if vectorized:
            Y = np.asarray(g(X, U, p), dtype=float)
        else:
            Y = np.stack([np.asarray(g(X[:, k], U[:, k], p), dtype=float) for k in range(X.shape[1])], axis=1)
    step = _first_bad_column(Y)
    if step is not None:
        raise SimulationDivergenceError(step, ('output',))
    return Y


def output_trajectory(model, states, u, p=None):
    """Output snapshots y_k = g(x_k, u_k, p) for a state trajectory."""
    if states.rows != model.dims.n:
        raise InvalidDimensionError(f"state snapshots have {states.rows} rows, expected {model.dims.n}")
    p = model.p if p is None else np.asarray(p, dtype=float)
    Y = output_array(model.g, states.data, u.sample(states.grid), p, model.vectorized)
    return SnapshotMatrix(Y, states.grid)


def find_steady_state(model, u_bar, p, x_guess, horizon, tol, kind=IntegratorKind.EULER):
    """
    Marches the model under constant input ū until ‖f(x, ū, p)‖∞ ≤ tol.

    Returns the first state meeting the tolerance, or the final state of the
    horizon flagged as not converged.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")
    kind = IntegratorKind.parse(kind)
    u_bar = np.asarray(u_bar, dtype=float).reshape(-1)
    p = model.p if p is None else np.asarray(p, dtype=float)
    x = np.asarray(x_guess, dtype=float).reshape(-1).copy()
    dt = horizon.dt
    x_prev = None
    f_prev = None
    with np.errstate(over='ignore', invalid='ignore'):
        for step in range(horizon.steps):
            dx = np.asarray(model.f(x, u_bar, p), dtype=float)
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(x))):
                raise SimulationDivergenceError(step, ('steady state',))
            if np.max(np.abs(dx), initial=0.0) <= tol:
                logger.debug("Steady state reached after %d steps", step)
                return SteadyState(x, True, step)
            if step == horizon.steps - 1:
                break
            if kind is IntegratorKind.EULER or f_prev is None:
                x_next = x + dt * dx
            elif kind is IntegratorKind.ADAMS_BASHFORTH2:
                x_next = x + dt * (1.5 * dx - 0.5 * f_prev)
            else:
                x_next = x_prev + (2.0 * dt) * dx
            x_prev, f_prev, x = x, dx, x_next
    logger.warning("Steady state not reached within the horizon (residual %.3e)",
                   float(np.max(np.abs(dx), initial=0.0)))
    return SteadyState(x, False, horizon.steps - 1)
