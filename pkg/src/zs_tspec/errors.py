"""Exception types shared across the package."""


class ZsTspecError(Exception):
    """Base class for all package errors."""


class NonConvergence(ZsTspecError):
    """A series or step-control budget was exhausted before the tolerance was met.

    Carries the residual that was actually achieved so callers can decide
    whether the partial result is still usable.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateLambda(ZsTspecError):
    """The spectral parameter is too close to zero for the requested expansion."""


class BranchTrackingFailed(ZsTspecError):
    """Continuous branch continuation of a square root hit the step-size floor."""


class ContourTooClose(ZsTspecError):
    """A root sits (numerically) on an integration contour even after dilation."""


class NonIntegerWinding(ZsTspecError):
    """A winding-number integral did not round cleanly to an integer."""


class CountMismatch(ZsTspecError):
    """No admissible localization index satisfies the expected root counts."""


class SignMismatch(ZsTspecError):
    """The discriminant at a periodic eigenvalue is not the expected +/-2."""


class NoCrossingFound(ZsTspecError):
    """No real critical point was found to start a level-set trace from."""


class StepFailure(ZsTspecError):
    """The corrector of a predictor-corrector continuation failed to converge."""


class EndpointMismatch(ZsTspecError):
    """Traced arc endpoints do not match independently refined eigenvalues."""


class MonotonicityViolation(ZsTspecError):
    """The discriminant fails to be strictly monotone along an arc half."""


class NonzeroMean(ZsTspecError):
    """An argument of the zero-mean antiderivative has a nonvanishing mean."""


class BlowupDetected(ZsTspecError):
    """A propagated trajectory left the admissible norm region."""
