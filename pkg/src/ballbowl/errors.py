"""Exception types shared across the package."""


class BallBowlError(Exception):
    """Base class for all package errors."""


class ParameterError(BallBowlError, ValueError):
    """Invalid physical or task parameter."""


class ConfigurationError(BallBowlError, ValueError):
    """Invalid session/workspace configuration (e.g. workspace too small)."""


class SimulationFault(BallBowlError):
    """Non-finite state encountered while stepping; trial must be marked invalid."""


class AnalysisError(BallBowlError):
    """A trace or spectrum cannot be analysed (too short, empty window, ...)."""


class DegenerateSpectrumError(AnalysisError):
    """Constant force trace: no non-DC energy to normalize by."""


class RatioUndefinedError(AnalysisError):
    """Zero low-frequency energy: high/low ratio undefined for this trial."""


class MetricUndefinedError(AnalysisError):
    """Metric undefined for this trial (e.g. zero flags collected)."""


class DesignError(BallBowlError, ValueError):
    """Unbalanced or incomplete ANOVA design."""


class DegenerateDataError(BallBowlError):
    """Data has no usable variance for the requested statistic."""
