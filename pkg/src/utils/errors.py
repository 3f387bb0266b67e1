"""
Exception hierarchy for the empirical gramian framework.

Every error carries an ``exit_code`` so the command-line front end can map
failures to stable process exit statuses:
0 success, 1 validation failure, 2 usage, 3 I/O, 4 applicability,
5 divergence, 6 rank.
"""


class EmgramError(Exception):
    """Base class for all framework errors."""
    exit_code = 1


class InvalidArgumentError(EmgramError, ValueError):
    """A scalar argument is outside its admissible range."""
    exit_code = 2


class InvalidDimensionError(EmgramError, ValueError):
    """A dimension is zero, negative or inconsistent with the system."""
    exit_code = 4


class MissingReferenceError(EmgramError, ValueError):
    """Steady centering was requested without a reference vector."""
    exit_code = 2


class InvalidSnapshotError(EmgramError, ValueError):
    """A snapshot matrix holds NaN/Inf entries or has the wrong shape."""
    exit_code = 5


class InvalidBlocksError(EmgramError, ValueError):
    """Augmented gramian blocks have inconsistent dimensions."""
    exit_code = 4


class SquareSystemRequiredError(EmgramError, ValueError):
    """The operation needs as many inputs as outputs."""
    exit_code = 4

    def __init__(self, m, o):
        super().__init__(f"square system required (inputs m={m}, outputs o={o})")
        self.m = m
        self.o = o


class NoParametersError(EmgramError, ValueError):
    """A parameter gramian was requested for a model without parameters."""
    exit_code = 4

    def __init__(self, what="parameter gramian"):
        super().__init__(f"{what} requires at least one parameter (P = 0)")


class SimulationDivergenceError(EmgramError, ArithmeticError):
    """A trajectory produced a non-finite state or output."""
    exit_code = 5

    def __init__(self, step, context=()):
        self.step = step
        self.context = tuple(context)
        super().__init__(self._describe())

    def _describe(self):
        text = f"simulation diverged at step {self.step}"
        if self.context:
            text += " (" + ", ".join(str(c) for c in self.context) + ")"
        return text

    def with_context(self, *context):
        """Returns a copy of this error with extra loop context appended."""
        return SimulationDivergenceError(self.step, self.context + tuple(context))


class RankDeficientError(EmgramError, ValueError):
    """The requested reduced order exceeds the numerical rank."""
    exit_code = 6

    def __init__(self, order, max_order):
        super().__init__(f"order {order} exceeds numerical rank; maximum feasible order is {max_order}")
        self.order = order
        self.max_order = max_order


class InvalidOrderError(EmgramError, ValueError):
    """The requested reduced order is outside 1..n."""
    exit_code = 6


class UndefinedRelativeError(EmgramError, ZeroDivisionError):
    """The reference output is identically zero."""
    exit_code = 1


class UnstableSystemError(EmgramError, ValueError):
    """The system matrix is not Hurwitz."""
    exit_code = 4

    def __init__(self, max_real):
        super().__init__(f"system matrix is not Hurwitz (max real eigenvalue part {max_real:.3e})")
        self.max_real = max_real


class SolverError(EmgramError, ArithmeticError):
    """A dense linear solve failed."""
    exit_code = 1


class ModelIOError(EmgramError, OSError):
    """A model, matrix or snapshot file could not be read or written."""
    exit_code = 3
