"""Exception hierarchy; each class carries the CLI exit status it maps to."""


class FxtspError(Exception):
    exit_code = 1


class InvalidParameterError(FxtspError, ValueError):
    """A scalar or matrix argument is outside its admissible range."""


class ShapeError(InvalidParameterError):
    """Array dimensions do not match the model."""


class CapabilityError(FxtspError):
    """An optional evaluator (gradient, compiled kernel) is missing."""


class ConfigError(FxtspError):
    """Malformed or unknown configuration input."""


class InfeasibleCertificateError(FxtspError):
    exit_code = 2


class InadmissibleQError(InfeasibleCertificateError):
    def __init__(self, message, min_q):
        super().__init__(message)
        self.min_q = min_q


class IntegrationError(FxtspError):
    exit_code = 3

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class StiffnessError(IntegrationError):
    """The step size collapsed below the floating-point resolution of t."""


class DivergenceError(IntegrationError):
    """The state became non-finite or exceeded the overflow guard."""
