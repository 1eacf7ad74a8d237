"""Exception hierarchy shared across the package."""


class SnowlensError(Exception):
    """Base class for domain errors (mapped to CLI exit status 1)."""


class UnknownColorError(SnowlensError, ValueError):
    def __init__(self, color, row, col):
        self.color = tuple(int(c) for c in color)
        self.row = int(row)
        self.col = int(col)
        super().__init__(
            f"unknown mask color RGB{self.color} at pixel (row={self.row}, col={self.col})"
        )


class CorruptMaskError(SnowlensError, ValueError):
    pass


class OrphanFilesError(SnowlensError, ValueError):
    def __init__(self, orphans):
        self.orphans = sorted(orphans)
        super().__init__("unmatched sample ids: " + ", ".join(self.orphans))


class NoRoadError(SnowlensError, ValueError):
    """Raised when the road class is absent, so the hazard index is undefined."""

    def __init__(self, message="no-road: road class not detected", rsl=None):
        self.rsl = rsl
        super().__init__(message)


class TrainingDivergedError(SnowlensError, RuntimeError):
    def __init__(self, message, last_checkpoint=None):
        self.last_checkpoint = last_checkpoint
        super().__init__(message)
