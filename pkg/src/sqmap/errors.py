"""Exception types raised by sqmap."""


class SqmapError(ValueError):
    """Base class for all input and construction errors."""


class DimensionError(SqmapError):
    pass


class GeneralPositionError(SqmapError):
    pass


class ManifoldError(SqmapError):
    """Invalid or degenerate sampled manifold."""


class ClassificationError(SqmapError):
    """The support-function scan and the convexity certificate disagree."""


class SelectionError(SqmapError):
    """An anchor-selection stage failed.

    ``stage`` names the pipeline stage, ``diagnostics`` carries whatever the
    stage recorded before giving up.
    """

    def __init__(self, stage, message, diagnostics=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = list(diagnostics or [])
