"""Exception hierarchy shared by the pipeline."""


class StressDetectError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(StressDetectError, ValueError):
    """Missing channel, wrong dimensionality or malformed file."""


class AlignmentError(StressDetectError, ValueError):
    """Streams cannot be put on a common time grid."""


class LabelingError(StressDetectError, ValueError):
    def __init__(self, orphans):
        self.orphans = list(orphans)
        shown = ", ".join(f"{t:.3f}" for t in self.orphans[:5])
        more = "" if len(self.orphans) <= 5 else f" (+{len(self.orphans) - 5} more)"
        super().__init__(f"timestamps outside every task segment: {shown}{more}")


class ConfigurationError(StressDetectError, ValueError):
    """Invalid filter, grid or experiment configuration."""


class StratificationError(StressDetectError, ValueError):
    """A class is missing or too small to stratify."""


class TrainingError(StressDetectError, ValueError):
    """Degenerate training input (e.g. a single class)."""


class ConvergenceError(StressDetectError, RuntimeError):
    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)
