"""
Core domain types and kernels shared by all gramian computations.

Holds the system description (dimensions, vector field, output map), the
time grid, the perturbation configuration (directions, rotations, scales),
snapshot centering and the Schur-complement kernel used to extract
parameter gramians from augmented gramians.
"""
import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la

from src.utils.errors import (
    InvalidArgumentError,
    InvalidBlocksError,
    InvalidDimensionError,
    InvalidSnapshotError,
    MissingReferenceError,
)

logger = logging.getLogger(__name__)


class _ParsableEnum(enum.Enum):
    """Enum that also accepts its (case-insensitive) value or name as a string."""

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if text in (member.value, member.name.lower()):
                return member
        choices = ", ".join(member.value for member in cls)
        raise InvalidArgumentError(f"unknown {cls.__name__} '{value}' (expected one of: {choices})")


class RotationKind(_ParsableEnum):
    SINGLE = 'single'
    SIGNED = 'signed'


class ScaleKind(_ParsableEnum):
    LINEAR = 'linear'
    LOGARITHMIC = 'log'
    GEOMETRIC = 'geom'


class CenteringKind(_ParsableEnum):
    MEAN = 'mean'
    MEDIAN = 'median'
    STEADY = 'steady'
    POD = 'pod'


class GramianKind(_ParsableEnum):
    CONTROLLABILITY = 'controllability'
    OBSERVABILITY = 'observability'
    CROSS = 'cross'
    SENSITIVITY = 'sensitivity'
    IDENTIFIABILITY = 'identifiability'
    CROSS_IDENTIFIABILITY = 'cross_identifiability'


# --- System description ---

@dataclass(frozen=True)
class SystemDims:
    """Numbers of inputs m, states n, outputs o and parameters P."""
    m: int
    n: int
    o: int
    P: int = 0

    def __post_init__(self):
        for name in ('m', 'n', 'o', 'P'):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise InvalidDimensionError(f"dimension {name}={value} must be a nonnegative integer")
        if self.n < 1:
            raise InvalidDimensionError("state dimension n must be at least 1")

    @property
    def is_square(self):
        return self.m == self.o


@dataclass(frozen=True)
class SystemModel:
    """
    Input-state-output system x' = f(x, u, p), y = g(x, u, p).

    Both callables receive 1-D numpy arrays (state, input, parameters) and
    must return 1-D arrays of length n and o respectively. A trial
    evaluation at the origin checks this on construction.

    Models flagged ``vectorized`` also accept n×K states with m×K inputs
    (one column per trajectory) and return n×K and o×K arrays; perturbation
    runs of such models are integrated as a single batch.
    """
    dims: SystemDims
    f: Callable
    g: Callable
    p: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vectorized: bool = False

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if p.size != self.dims.P:
            raise InvalidDimensionError(f"parameter vector has length {p.size}, expected P={self.dims.P}")
        object.__setattr__(self, 'p', p)
        self._check_shapes((), p)
        if self.vectorized:
            self._check_shapes((2,), p)

    def _check_shapes(self, columns, p):
        x = np.zeros((self.dims.n,) + columns)
        u = np.zeros((self.dims.m,) + columns)
        dx = np.asarray(self.f(x, u, p))
        y = np.asarray(self.g(x, u, p))
        if dx.shape != (self.dims.n,) + columns:
            raise InvalidDimensionError(f"f returned shape {dx.shape}, expected {(self.dims.n,) + columns}")
        if y.shape != (self.dims.o,) + columns:
            raise InvalidDimensionError(f"g returned shape {y.shape}, expected {(self.dims.o,) + columns}")

    def with_parameters(self, p):
        """Returns the same model evaluated at a different parameter vector."""
        return dataclasses.replace(self, p=np.asarray(p, dtype=float))

    def steady_output(self, x_steady, u_steady):
        return np.asarray(self.g(x_steady, u_steady, self.p), dtype=float)


def column_term(v, x):
    """Shapes a state-independent term v to broadcast against x (one vector or n×K columns)."""
    v = np.asarray(v, dtype=float)
    return v if np.ndim(x) == 1 else v[:, None]


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    tf: float

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"time step dt={self.dt} must be positive")
        if not self.tf > self.t0:
            raise InvalidArgumentError(f"stop time tf={self.tf} must exceed start time t0={self.t0}")
        if self.steps < 2:
            raise InvalidArgumentError("time grid must hold at least two samples")

    @classmethod
    def from_config(cls, config):
        return cls(float(config.get('t0', 0.0)), float(config.get('dt', 0.01)), float(config.get('tf', 1.0)))

    @property
    def steps(self):
        # Small slack so that e.g. (1 - 0)/0.01 counts 101 samples despite roundoff.
        return int(math.floor((self.tf - self.t0) / self.dt + 1e-9)) + 1

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.steps)


@dataclass(frozen=True)
class SnapshotMatrix:
    data: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise InvalidSnapshotError(f"snapshot data must be two-dimensional, got shape {data.shape}")
        if data.shape[1] != self.grid.steps:
            raise InvalidSnapshotError(
                f"snapshot has {data.shape[1]} columns but the grid has {self.grid.steps} samples")
        object.__setattr__(self, 'data', data)

    @property
    def rows(self):
        return self.data.shape[0]


@dataclass
class Gramian:
    """Dense square gramian matrix tagged with its kind."""
    matrix: np.ndarray
    kind: GramianKind
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise InvalidDimensionError(f"gramian must be square, got shape {self.matrix.shape}")

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class AugmentedBlocks:
    """Partition (W11 | W12 ; W12ᵀ | W22) of an augmented gramian."""
    W11: np.ndarray
    W12: np.ndarray
    W22: np.ndarray

    def __post_init__(self):
        W11, W12, W22 = (np.atleast_2d(np.asarray(b, dtype=float)) for b in (self.W11, self.W12, self.W22))
        n, P = W12.shape
        if W11.shape != (n, n) or W22.shape != (P, P):
            raise InvalidBlocksError(
                f"inconsistent blocks: W11 {W11.shape}, W12 {W12.shape}, W22 {W22.shape}")
        object.__setattr__(self, 'W11', W11)
        object.__setattr__(self, 'W12', W12)
        object.__setattr__(self, 'W22', W22)

    @classmethod
    def from_matrix(cls, W, n):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or not 0 < n < W.shape[0]:
            raise InvalidBlocksError(f"cannot split matrix of shape {W.shape} at {n}")
        return cls(W[:n, :n], W[:n, n:], W[n:, n:])


# --- Perturbation sets ---

def make_directions(dim):
    """
    Standard basis of R^dim used as perturbation directions.

    Args:
        dim (int): Space dimension, at least 1.

    Returns:
        list: ``dim`` unit vectors, pairwise orthogonal.
    """
    if int(dim) != dim or dim < 1:
        raise InvalidDimensionError(f"direction set needs dim >= 1, got {dim}")
    basis = np.eye(int(dim))
    return [basis[i] for i in range(int(dim))]


def make_scales(s_max, q, kind=ScaleKind.LINEAR):
    """
    Subdivides the perturbation range (0, s_max] into q ascending scales.

    Linear:      s_max * k / q
    Geometric:   s_max * 2^(k - q)
    Logarithmic: s_max * 10^(k - q)
    for k = 1..q. The last scale is s_max exactly.
    """
    kind = ScaleKind.parse(kind)
    if not np.isfinite(s_max) or s_max <= 0:
        raise InvalidArgumentError(f"maximum scale must be positive, got {s_max}")
    if int(q) != q or q < 1:
        raise InvalidArgumentError(f"scale count must be a positive integer, got {q}")
    q = int(q)
    k = np.arange(1, q + 1, dtype=float)
    if kind is ScaleKind.LINEAR:
        scales = s_max * (k / q)
    elif kind is ScaleKind.GEOMETRIC:
        scales = s_max * np.power(2.0, k - q)
    else:
        scales = s_max * np.power(10.0, k - q)
    scales[-1] = s_max
    return scales


def rotation_signs(kind=RotationKind.SINGLE):
    """Rotations restricted to ±identity, represented by their scalar signs."""
    kind = RotationKind.parse(kind)
    if kind is RotationKind.SINGLE:
        return np.array([1.0])
    return np.array([-1.0, 1.0])


def _as_vector(values, length, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(length, float(arr))
    arr = arr.reshape(-1)
    if arr.size != length:
        raise InvalidDimensionError(f"{name} has length {arr.size}, expected {length}")
    return arr


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Perturbation configuration: rotation set, scale subdivision, per-channel
    maximum scales and the steady operating point (ū, x̄).
    """
    rotation_kind: RotationKind
    scale_kind: ScaleKind
    scale_count: int
    input_scales: np.ndarray
    state_scales: np.ndarray
    param_scales: np.ndarray
    steady_input: np.ndarray
    steady_state: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'rotation_kind', RotationKind.parse(self.rotation_kind))
        object.__setattr__(self, 'scale_kind', ScaleKind.parse(self.scale_kind))
        if int(self.scale_count) != self.scale_count or self.scale_count < 1:
            raise InvalidArgumentError(f"scale count must be a positive integer, got {self.scale_count}")
        object.__setattr__(self, 'scale_count', int(self.scale_count))
        for name in ('input_scales', 'state_scales', 'param_scales', 'steady_input', 'steady_state'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        for name in ('input_scales', 'state_scales', 'param_scales'):
            values = getattr(self, name)
            if np.any(~np.isfinite(values)) or np.any(values <= 0):
                raise InvalidArgumentError(f"{name} must be strictly positive")

    @classmethod
    def from_config(cls, dims, config=None, steady_input=0.0, steady_state=0.0):
        """
        Builds a spec for the given dimensions from a perturbation config dict.

        Args:
            dims (SystemDims): System dimensions.
            config (dict): Keys 'rotation_kind', 'scale_kind', 'scale_count',
                'input_scale', 'state_scale', 'param_scale' (scalars or vectors).
            steady_input: ū, scalar or length-m vector.
            steady_state: x̄, scalar or length-n vector.
        """
        config = config or {}
        return cls(
            rotation_kind=config.get('rotation_kind', 'single'),
            scale_kind=config.get('scale_kind', 'linear'),
            scale_count=config.get('scale_count', 1),
            input_scales=_as_vector(config.get('input_scale', 1.0), dims.m, 'input_scale'),
            state_scales=_as_vector(config.get('state_scale', 1.0), dims.n, 'state_scale'),
            param_scales=_as_vector(config.get('param_scale', 1.0), dims.P, 'param_scale'),
            steady_input=_as_vector(steady_input, dims.m, 'steady_input'),
            steady_state=_as_vector(steady_state, dims.n, 'steady_state'),
        )

    @classmethod
    def default(cls, dims):
        return cls.from_config(dims)

    def check(self, dims):
        expected = {
            'input_scales': dims.m, 'state_scales': dims.n, 'param_scales': dims.P,
            'steady_input': dims.m, 'steady_state': dims.n,
        }
        for name, length in expected.items():
            if getattr(self, name).size != length:
                raise InvalidDimensionError(
                    f"{name} has length {getattr(self, name).size}, expected {length}")

    @property
    def signs(self):
        return rotation_signs(self.rotation_kind)

    def scale_table(self, maxima):
        """Scale sets for each channel, shape (channels, q)."""
        maxima = np.asarray(maxima, dtype=float).reshape(-1)
        table = np.empty((maxima.size, self.scale_count))
        for j, s_max in enumerate(maxima):
            table[j] = make_scales(s_max, self.scale_count, self.scale_kind)
        return table

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# --- Centering ---

def _center_array(data, kind, reference=None, rank=1):
    """Array-level centering; returns (centered, center)."""
    if not np.all(np.isfinite(data)):
        raise InvalidSnapshotError("snapshot contains NaN or Inf entries")
    if kind is CenteringKind.STEADY:
        if reference is None:
            raise MissingReferenceError("steady centering requires a reference vector")
        reference = np.asarray(reference, dtype=float).reshape(-1)
        if reference.size != data.shape[0]:
            raise InvalidDimensionError(
                f"reference has length {reference.size}, snapshots have {data.shape[0]} rows")
        return data - reference[:, None], reference
    if kind is CenteringKind.MEAN:
        center = data.mean(axis=1)
        return data - center[:, None], center
    if kind is CenteringKind.MEDIAN:
        center = np.median(data, axis=1)
        return data - center[:, None], center
    # POD: remove the leading principal components of the snapshot set
    U, s, Vt = la.svd(data, full_matrices=False)
    r = min(int(rank), s.size)
    center = (U[:, :r] * s[:r]) @ Vt[:r]
    return data - center, center


def center(snapshots, kind=CenteringKind.STEADY, reference=None, rank=1):
    """
    Centers a snapshot matrix.

    Args:
        snapshots (SnapshotMatrix): Trajectory samples.
        kind (CenteringKind): Mean, Median, Steady or POD.
        reference (array): Steady reference, required for Steady centering.
        rank (int): Number of principal components removed by POD centering.

    Returns:
        tuple: (centered SnapshotMatrix, center vector or matrix).
    """
    kind = CenteringKind.parse(kind)
    centered, used = _center_array(snapshots.data, kind, reference, rank)
    return SnapshotMatrix(centered, snapshots.grid), used


# --- Schur complement ---

def schur_complement(blocks, tol=1e-12):
    """
    W22 - W12ᵀ · pinv(W11) · W12 with a truncated-SVD pseudo-inverse.

    Singular values of W11 below tol·σ_max are discarded; tol = 0 keeps every
    nonzero singular value.
    """
    if tol < 0:
        raise InvalidArgumentError(f"tolerance must be nonnegative, got {tol}")
    if not isinstance(blocks, AugmentedBlocks):
        blocks = AugmentedBlocks(*blocks)
    W11_pinv = la.pinv(blocks.W11, atol=0.0, rtol=tol)
    return blocks.W22 - blocks.W12.T @ W11_pinv @ blocks.W12


def gram_schur_complement(Z, n, tol=1e-12):
    """
    Schur complement of the Gram matrix W = ZᵀZ with respect to its leading
    n×n block, computed from the factor Z.

    The trailing columns Z2 are fitted by the leading columns Z1 in the
    least-squares sense and the complement is the Gram matrix RᵀR of the
    residual, which equals schur_complement(W, tol) in exact arithmetic but
    is positive semidefinite by construction. Singular values of Z1 below
    sqrt(tol)·s_max are discarded, the same cut as tol on W11.
    """
    if tol < 0:
        raise InvalidArgumentError(f"tolerance must be nonnegative, got {tol}")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if not 0 <= n <= Z.shape[1]:
        raise InvalidBlocksError(f"leading block size {n} outside 0..{Z.shape[1]}")
    Z1, Z2 = Z[:, :n], Z[:, n:]
    if n == 0:
        return Z2.T @ Z2
    coef, *_ = la.lstsq(Z1, Z2, cond=math.sqrt(tol))
    R = Z2 - Z1 @ coef
    return R.T @ R
