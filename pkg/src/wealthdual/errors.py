"""Exception hierarchy shared by all modules."""


class WealthDualError(Exception):
    """Base class for every error raised by this package."""


class DegenerateSupport(WealthDualError, ValueError):
    pass


class NonAdmissible(WealthDualError, ValueError):
    pass


class QuadratureFailure(WealthDualError, ArithmeticError):
    pass


class ZeroDenominator(WealthDualError, ZeroDivisionError):
    pass


class ZeroTotal(WealthDualError, ValueError):
    pass


class SDependentMeasure(WealthDualError, ValueError):
    """Operation requires a redistribution measure that does not depend on s."""


class Degenerate(WealthDualError, ValueError):
    pass


class TruncationOverflow(WealthDualError, ValueError):
    pass


class UnnormalizedTotal(WealthDualError, ValueError):
    pass


class BoundaryUndefined(WealthDualError, ValueError):
    pass


class NonpositiveDensity(WealthDualError, ValueError):
    pass


class StepTooLarge(WealthDualError, ValueError):
    pass


class NonIntegrable(WealthDualError, ArithmeticError):
    pass


class AsymmetricKernel(WealthDualError, ValueError):
    pass


class RowSumViolation(WealthDualError, ValueError):
    pass


class AsymmetricMean(WealthDualError, ValueError):
    pass


class DegenerateVariance(WealthDualError, ValueError):
    pass


class ConfigError(WealthDualError, ValueError):
    """Invalid experiment configuration; the message names the offending key."""
