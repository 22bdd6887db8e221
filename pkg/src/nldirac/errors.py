"""Exception hierarchy. Every error carries a machine-readable ``code``."""


class NLDiracError(Exception):
    code = "ERROR"


class ValidationError(NLDiracError, ValueError):
    code = "INVALID_CONFIG"


class BetaOrderError(ValidationError):
    code = "BETA_ORDER"


class OmegaOutOfGap(ValidationError):
    code = "OMEGA_OUT_OF_GAP"


class TrivialLambda(ValidationError):
    code = "TRIVIAL_LAMBDA"


class SingularRadius(NLDiracError, ValueError):
    code = "SINGULAR_RADIUS"


class R0TooLarge(ValidationError):
    code = "R0_TOO_LARGE"


class WindowTooShort(NLDiracError, ValueError):
    code = "WINDOW_TOO_SHORT"


class DegenerateProfile(WindowTooShort):
    """All samples in the fit window are numerically zero."""

    code = "DEGENERATE_PROFILE"


class NonDecayingProfile(NLDiracError, ValueError):
    code = "NON_DECAYING_PROFILE"


class NumericalFailure(NLDiracError, RuntimeError):
    code = "NUMERICAL_FAILURE"


class NewtonDivergence(NumericalFailure):
    code = "NEWTON_DIVERGENCE"


class StepUnderflow(NumericalFailure):
    code = "STEP_UNDERFLOW"


class BracketInvalid(NumericalFailure):
    code = "BRACKET_INVALID"


class NoConvergence(NumericalFailure):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket

    code = "NO_CONVERGENCE"
