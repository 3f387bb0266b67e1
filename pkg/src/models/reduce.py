"""
Projection-based state and parameter reduction.

State reduction builds a ProjectionPair (left, right) with left·right = I_r,
either by square-root balanced truncation of a controllability/observability
pair or by direct truncation of a cross gramian. Parameter reduction keeps
the most sensitive parameters (diagonal gramian) or projects the parameter
vector onto the dominant eigenspace of an identifiability gramian.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.linalg as la

from src.models.core import GramianKind, SnapshotMatrix, SystemDims, SystemModel
from src.utils.errors import (
    InvalidDimensionError,
    InvalidOrderError,
    RankDeficientError,
    UndefinedRelativeError,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-14


def _as_matrix(W):
    return np.asarray(getattr(W, 'matrix', W), dtype=float)


def _check_order(r, n, what="order"):
    if int(r) != r or not 1 <= r <= n:
        raise InvalidOrderError(f"{what} {r} outside 1..{n}")
    return int(r)


def _fix_signs(U, V=None):
    """Flips columns so that each column's largest-magnitude entry is positive."""
    U = U.copy()
    V = None if V is None else V.copy()
    for col in range(U.shape[1]):
        pivot = np.argmax(np.abs(U[:, col]))
        if U[pivot, col] < 0:
            U[:, col] *= -1.0
            if V is not None:
                V[:, col] *= -1.0
    return U, V


@dataclass(frozen=True)
class ProjectionPair:
    """Left (r×n) and right (n×r) reduction maps."""
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.atleast_2d(np.asarray(self.left, dtype=float))
        right = np.atleast_2d(np.asarray(self.right, dtype=float))
        if left.shape != right.T.shape:
            raise InvalidDimensionError(f"left {left.shape} and right {right.shape} are not compatible")
        _check_order(left.shape[0], left.shape[1])
        object.__setattr__(self, 'left', left)
        object.__setattr__(self, 'right', right)

    @property
    def r(self):
        return self.left.shape[0]

    @property
    def n(self):
        return self.left.shape[1]

    def biorthogonality_error(self):
        return float(np.linalg.norm(self.left @ self.right - np.eye(self.r)))


@dataclass(frozen=True)
class ReducedModel:
    """Galerkin-projected model together with its projection and provenance."""
    model: SystemModel
    pair: ProjectionPair
    provenance: Tuple[GramianKind, ...] = field(default_factory=tuple)

    def reduce_state(self, x0):
        return self.pair.left @ np.asarray(x0, dtype=float)

    def lift_state(self, x_r):
        return self.pair.right @ np.asarray(x_r, dtype=float)


@dataclass(frozen=True)
class ParameterMap:
    """Reconstruction p ↦ basis·basisᵀ·p of a reduced parameter vector."""
    basis: np.ndarray

    @property
    def r(self):
        return self.basis.shape[1]

    def reduce(self, p):
        return self.basis.T @ np.asarray(p, dtype=float)

    def __call__(self, p):
        return self.basis @ self.reduce(p)


def balance(Wc, Wo, r, tol=RANK_TOL):
    """
    Square-root balanced truncation.

    Args:
        Wc (Gramian): Controllability gramian (symmetric PSD).
        Wo (Gramian): Observability gramian (symmetric PSD).
        r (int): Reduced order.
        tol (float): Relative threshold below which Hankel values count as zero.

    Returns:
        tuple: (ProjectionPair, Hankel singular values in descending order).
    """
    Wc = _as_matrix(Wc)
    Wo = _as_matrix(Wo)
    if Wc.shape != Wo.shape or Wc.ndim != 2 or Wc.shape[0] != Wc.shape[1]:
        raise InvalidDimensionError(f"gramian shapes differ or are not square: {Wc.shape}, {Wo.shape}")
    n = Wc.shape[0]
    r = _check_order(r, n)

    lam_c, U_c = la.eigh((Wc + Wc.T) / 2.0)
    lam_o, U_o = la.eigh((Wo + Wo.T) / 2.0)
    L_c = U_c * np.sqrt(np.maximum(lam_c, 0.0))
    L_o = U_o * np.sqrt(np.maximum(lam_o, 0.0))

    U, hankel, Vt = la.svd(L_o.T @ L_c)
    U, V = _fix_signs(U, Vt.T)
    rank = int(np.sum(hankel > tol * hankel[0])) if hankel[0] > 0 else 0
    if r > rank:
        raise RankDeficientError(r, rank)

    scale = 1.0 / np.sqrt(hankel[:r])
    right = (L_c @ V[:, :r]) * scale
    left = (scale[:, None] * U[:, :r].T) @ L_o.T
    logger.debug("Balanced truncation to order %d of %d (numerical rank %d)", r, n, rank)
    return ProjectionPair(left, right), hankel


def truncate_cross(Wx, r):
    """Galerkin projection onto the r leading left singular vectors of the cross gramian."""
    Wx = _as_matrix(Wx)
    if Wx.ndim != 2 or Wx.shape[0] != Wx.shape[1]:
        raise InvalidDimensionError(f"cross gramian must be square, got {Wx.shape}")
    r = _check_order(r, Wx.shape[0])
    U, _, _ = la.svd(Wx)
    U, _ = _fix_signs(U[:, :r])
    return ProjectionPair(U.T, U)


def reduce_parameters_select(Ws, r):
    """
    Keeps the r parameters with the largest diagonal sensitivity entries.

    Ties are broken by the lower index; discarded parameters are set to 0.

    Returns:
        tuple: (sorted list of kept indices, ParameterMap).
    """
    diag = np.diag(_as_matrix(Ws))
    P = diag.size
    r = _check_order(r, P, "parameter order")
    ranked = sorted(range(P), key=lambda k: (-diag[k], k))
    kept = sorted(ranked[:r])
    basis = np.eye(P)[:, kept]
    return kept, ParameterMap(basis)


def reduce_parameters_project(W, r, definite=True):
    """
    Orthogonal parameter projection onto the r dominant eigenvectors of W.

    With ``definite`` (identifiability gramians) eigenpairs are ranked by
    their signed eigenvalue and negative eigenvalues, which are roundoff of
    a semidefinite matrix, rank after every nonnegative one. Otherwise
    (cross-identifiability gramians) they are ranked by |eigenvalue|.

    Returns:
        tuple: (P×r orthonormal basis, ParameterMap).
    """
    W = _as_matrix(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidDimensionError(f"parameter gramian must be square, got {W.shape}")
    r = _check_order(r, W.shape[0], "parameter order")
    eigenvalues, vectors = la.eigh((W + W.T) / 2.0)
    if definite:
        negative = eigenvalues < 0.0
        if negative.any():
            logger.debug("Ranking %d negative eigenvalues last (min %.3e)", int(negative.sum()), eigenvalues.min())
        key = np.where(negative, np.inf, -eigenvalues)
    else:
        key = -np.abs(eigenvalues)
    order = np.argsort(key, kind='stable')
    basis, _ = _fix_signs(vectors[:, order[:r]])
    return basis, ParameterMap(basis)


def project_model(model, pair, provenance=()):
    """
    Galerkin projection f_r = left·f(right·x_r, u, p), g_r = g(right·x_r, u, p).
    """
    if pair.n != model.dims.n:
        raise InvalidDimensionError(f"projection acts on n={pair.n}, model has n={model.dims.n}")
    left, right = pair.left, pair.right
    f, g = model.f, model.g

    def f_r(x_r, u, p):
        return left @ f(right @ x_r, u, p)

    def g_r(x_r, u, p):
        return g(right @ x_r, u, p)

    dims = SystemDims(m=model.dims.m, n=pair.r, o=model.dims.o, P=model.dims.P)
    reduced = SystemModel(dims, f_r, g_r, model.p, vectorized=model.vectorized)
    return ReducedModel(reduced, pair, tuple(GramianKind.parse(kind) for kind in provenance))


def relative_output_error(y_full, y_red):
    """
    Relative output error of a reduced model.

    Returns:
        tuple: (pointwise ‖Δy(t_k)‖₂ / max_k ‖y(t_k)‖₂, aggregate ‖Δy‖_F / ‖y‖_F).
    """
    full = y_full.data if isinstance(y_full, SnapshotMatrix) else np.asarray(y_full, dtype=float)
    red = y_red.data if isinstance(y_red, SnapshotMatrix) else np.asarray(y_red, dtype=float)
    full = np.atleast_2d(full)
    red = np.atleast_2d(red)
    if full.shape != red.shape:
        raise InvalidDimensionError(f"output shapes differ: {full.shape} vs {red.shape}")
    if isinstance(y_full, SnapshotMatrix) and isinstance(y_red, SnapshotMatrix) and y_full.grid != y_red.grid:
        raise InvalidDimensionError("outputs are sampled on different grids")
    peak = np.max(np.linalg.norm(full, axis=0), initial=0.0)
    total = np.linalg.norm(full)
    if peak == 0.0 or total == 0.0:
        raise UndefinedRelativeError("full-model output is identically zero")
    diff = full - red
    return np.linalg.norm(diff, axis=0) / peak, float(np.linalg.norm(diff) / total)
