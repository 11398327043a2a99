class InfeasibleAnalysisError(ValueError):
    """An analysis would exceed a configured size cap."""


class UnsupportedAnalysisError(ValueError):
    """The requested analysis is not defined for these parameters."""
