"""Exception types.  Each carries a stable ``code`` used in reports and CLI output."""


class MarkovFlowError(Exception):
    code = "ERROR"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        base = super().__str__()
        if self.context:
            extra = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
            return f"{self.code}: {base} ({extra})"
        return f"{self.code}: {base}"


class DimensionMismatch(MarkovFlowError, ValueError):
    code = "DIMENSION_MISMATCH"


class QuadratureNotConverged(MarkovFlowError, RuntimeError):
    code = "QUADRATURE_NOT_CONVERGED"


class SeriesNotConverged(MarkovFlowError, RuntimeError):
    code = "SERIES_NOT_CONVERGED"


class PoleProximity(MarkovFlowError, ArithmeticError):
    code = "POLE_PROXIMITY"


class IllConditioned(MarkovFlowError, ArithmeticError):
    code = "ILL_CONDITIONED_NO_FALLBACK"


class InvalidFamily(MarkovFlowError, ValueError):
    code = "INVALID_FAMILY"


class NotCommuting(InvalidFamily):
    code = "NOT_COMMUTING"


class XGeOne(MarkovFlowError, ValueError):
    code = "X_GE_ONE"


class NonpositiveSpectrum(MarkovFlowError, ArithmeticError):
    code = "NONPOSITIVE_SPECTRUM"


class StepUnderflow(MarkovFlowError, RuntimeError):
    code = "STEP_UNDERFLOW"


class SchemaError(MarkovFlowError, ValueError):
    code = "SCHEMA_ERROR"
