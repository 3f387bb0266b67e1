"""
Analytical gramians of linear systems x' = Ax + Bu, y = Cx.

Lyapunov and Sylvester equations are solved by Kronecker vectorization as
one dense n²×n² linear system. This is meant for small systems (n ≤ 60)
where the result serves as ground truth for the empirical gramians.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from src.models.core import SystemDims, SystemModel, column_term
from src.utils.errors import (
    InvalidDimensionError,
    SolverError,
    SquareSystemRequiredError,
    UnstableSystemError,
)

logger = logging.getLogger(__name__)

HURWITZ_TOL = 1e-10


def _matrix(values, name):
    M = np.atleast_2d(np.asarray(values, dtype=float))
    if M.ndim != 2:
        raise InvalidDimensionError(f"{name} must be a matrix, got {M.ndim} dimensions")
    return M


def check_hurwitz(A):
    """Raises UnstableSystemError unless every eigenvalue has real part below -1e-10."""
    max_real = float(np.max(la.eigvals(A).real))
    if max_real >= -HURWITZ_TOL:
        raise UnstableSystemError(max_real)
    return max_real


def _kronecker_solve(K, rhs, n):
    try:
        vec = la.solve(K, rhs.reshape(-1, order='F'))
    except (la.LinAlgError, ValueError) as err:
        raise SolverError(f"Kronecker system could not be solved: {err}") from err
    return vec.reshape((n, n), order='F')


def _square(A):
    A = _matrix(A, 'A')
    if A.shape[0] != A.shape[1]:
        raise InvalidDimensionError(f"A must be square, got shape {A.shape}")
    return A


def lyapunov_ctrb(A, B):
    """Solves A W + W Aᵀ = -B Bᵀ for the controllability gramian."""
    A = _square(A)
    B = _matrix(B, 'B')
    n = A.shape[0]
    if B.shape[0] != n:
        raise InvalidDimensionError(f"B has {B.shape[0]} rows, expected {n}")
    check_hurwitz(A)
    I = np.eye(n)
    W = _kronecker_solve(np.kron(I, A) + np.kron(A, I), -(B @ B.T), n)
    return (W + W.T) / 2.0


def lyapunov_obsv(A, C):
    """
    Solves Aᵀ W + W A = -Cᵀ C for the observability gramian.

    This is the equation satisfied by ∫ exp(Aᵀt) CᵀC exp(At) dt; it agrees
    with A W + W Aᵀ = -CᵀC whenever A is symmetric.
    """
    A = _square(A)
    C = _matrix(C, 'C')
    n = A.shape[0]
    if C.shape[1] != n:
        raise InvalidDimensionError(f"C has {C.shape[1]} columns, expected {n}")
    check_hurwitz(A)
    I = np.eye(n)
    W = _kronecker_solve(np.kron(I, A.T) + np.kron(A.T, I), -(C.T @ C), n)
    return (W + W.T) / 2.0


def sylvester_cross(A, B, C):
    """Solves A W + W Aᵀ = -B C for the cross gramian (no symmetrization)."""
    A = _square(A)
    B = _matrix(B, 'B')
    C = _matrix(C, 'C')
    n = A.shape[0]
    if B.shape[0] != n or C.shape[1] != n:
        raise InvalidDimensionError(f"B {B.shape} and C {C.shape} do not match n={n}")
    if B.shape[1] != C.shape[0]:
        raise SquareSystemRequiredError(B.shape[1], C.shape[0])
    check_hurwitz(A)
    I = np.eye(n)
    return _kronecker_solve(np.kron(I, A) + np.kron(A, I), -(B @ C), n)


def hankel_values(Wc, Wo):
    """Square roots of the eigenvalues of Wc·Wo, clamped at zero, in descending order."""
    Wc = _square(getattr(Wc, 'matrix', Wc))
    Wo = _square(getattr(Wo, 'matrix', Wo))
    if Wc.shape != Wo.shape:
        raise InvalidDimensionError(f"gramian shapes differ: {Wc.shape} vs {Wo.shape}")
    eigs = np.maximum(la.eigvals(Wc @ Wo).real, 0.0)
    return np.sort(np.sqrt(eigs))[::-1]


@dataclass(frozen=True)
class LinearSystem:
    """Linear time-invariant system matrices."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _square(self.A)
        B = _matrix(self.B, 'B')
        C = _matrix(self.C, 'C')
        n = A.shape[0]
        if B.shape[0] != n:
            raise InvalidDimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise InvalidDimensionError(f"C has {C.shape[1]} columns, expected {n}")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)
        object.__setattr__(self, 'C', C)

    @property
    def dims(self):
        return SystemDims(m=self.B.shape[1], n=self.A.shape[0], o=self.C.shape[0])

    def is_hurwitz(self):
        try:
            check_hurwitz(self.A)
        except UnstableSystemError:
            return False
        return True

    def slowest_rate(self):
        return float(np.min(np.abs(la.eigvals(self.A).real)))

    def ctrb(self):
        return lyapunov_ctrb(self.A, self.B)

    def obsv(self):
        return lyapunov_obsv(self.A, self.C)

    def cross(self):
        return sylvester_cross(self.A, self.B, self.C)

    def to_model(self, F: Optional[np.ndarray] = None, p=None):
        """
        Wraps the matrices as a SystemModel with f = Ax + Bu (+ F p), g = Cx.

        Args:
            F (array): Optional n×P parameter input matrix.
            p (array): Nominal parameters, required with F.
        """
        A, B, C = self.A, self.B, self.C
        if F is None:
            def f(x, u, _p):
                return A @ x + B @ u
            P = 0
            p = np.zeros(0)
        else:
            F = _matrix(F, 'F')
            if F.shape[0] != A.shape[0]:
                raise InvalidDimensionError(f"F has {F.shape[0]} rows, expected {A.shape[0]}")
            P = F.shape[1]
            p = np.zeros(P) if p is None else p

            def f(x, u, p_):
                return A @ x + B @ u + column_term(F @ p_, x)

        def g(x, _u, _p):
            return C @ x

        dims = SystemDims(m=B.shape[1], n=A.shape[0], o=C.shape[0], P=P)
        return SystemModel(dims, f, g, p, vectorized=True)


def random_linear_system(n, m, o, seed=1, symmetric=False):
    """
    Random symmetric Hurwitz system A = -(M Mᵀ)/n - I with uniform(-1, 1) B and C.

    With ``symmetric=True`` the output matrix is C = Bᵀ (requires m = o).
    """
    if symmetric and m != o:
        raise SquareSystemRequiredError(m, o)
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    A = -(M @ M.T) / n - np.eye(n)
    A = (A + A.T) / 2.0
    B = rng.uniform(-1.0, 1.0, (n, m))
    C = B.T.copy() if symmetric else rng.uniform(-1.0, 1.0, (o, n))
    return LinearSystem(A, B, C)


def scalar_system():
    """The scalar fixture A = -1, B = 1, C = 1 with all gramians equal to 0.5."""
    return LinearSystem(np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
