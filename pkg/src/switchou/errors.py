"""Exception types raised across the package.

Every error that callers may want to catch has its own class; all of them
derive from :class:`SwitchouError` so ``except SwitchouError`` catches
anything raised deliberately by this library.
"""


class SwitchouError(Exception):
    """Base class for all errors raised by switchou."""


class ModelValidationError(SwitchouError, ValueError):
    """A model instance violates one or more structural invariants.

    ``violations`` lists every failed check, one human-readable entry each.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid model: " + "; ".join(self.violations))


class ModelFileError(SwitchouError, ValueError):
    """A model JSON document is malformed or violates the schema."""


class SingularSolveError(SwitchouError, RuntimeError):
    """The generator is numerically rank-deficient beyond its expected
    one-dimensional kernel, so the invariant measure cannot be solved."""


class NotErgodicError(SwitchouError, ValueError):
    """Operation requires an ergodic model (mean drift must be positive)."""


class EigenFailureError(SwitchouError, RuntimeError):
    """Dense eigendecomposition did not converge."""


class BracketFailureError(SwitchouError, RuntimeError):
    """A root bracket could not be established or bisection failed to
    converge within the iteration limit."""


class PoleError(SwitchouError, ValueError):
    """Tilted-chain matrix requested at or beyond a pole
    (some jump rate plus p times drift is not positive)."""


class OutOfDomainError(SwitchouError, ValueError):
    """Laplace argument outside the admissible domain v^2 < 1/beta_bar."""


class NotExponentialRegimeError(SwitchouError, ValueError):
    """Operation requires the exponential-like regime (min drift == 0)."""


class NotGaussianRegimeError(SwitchouError, ValueError):
    """Operation requires the Gaussian-like regime (min drift > 0)."""


class NotTwoStateDegenerateError(SwitchouError, ValueError):
    """Operation requires d == 2 with drift = (positive, zero)."""


class MatrixRangeError(SwitchouError, ValueError):
    """Matrix exponential requested outside the supported norm range."""


class InvalidHorizonError(SwitchouError, ValueError):
    """Simulation horizon must be strictly positive."""


class InvalidOutputTimesError(SwitchouError, ValueError):
    """Requested output times must be sorted and lie in [0, horizon]."""


class EmptySampleError(SwitchouError, ValueError):
    """Estimator called on an empty sample."""


class InsufficientTailError(SwitchouError, ValueError):
    """Not enough (or degenerate) tail data for a tail estimator."""


class SizeMismatchError(SwitchouError, ValueError):
    """Paired-sample operation called on samples of different sizes."""


class MomentOrderError(SwitchouError, ValueError):
    """Moment order p is at or above the critical finite-moment order."""
