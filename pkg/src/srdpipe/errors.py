"""Exception types shared across the pipeline."""


class SrdError(Exception):
    """Base class for all srdpipe errors."""


class ConfigInvalid(SrdError):
    """A configuration value or combination is not usable."""


class ConfigMismatch(SrdError):
    """Data was produced with a configuration incompatible with the caller's."""


class ShapeMismatch(SrdError):
    """Array arguments do not line up."""


class NumericalFailure(SrdError):
    """A linear solve or factorization failed beyond recovery."""


class NoOverlap(SrdError):
    """Two segments that must share frames do not."""


class InsufficientMaskMass(SrdError):
    """A mask carries too little weight to estimate statistics from."""


class EmptyWindow(SrdError):
    """A direction window contains no grid points."""


class NotNormalized(SrdError):
    """An embedding that must be unit length is not."""


class DegenerateGallery(SrdError):
    """A face gallery is indistinguishable from the background set."""


class CalibrationMissing(SrdError):
    """No score calibration is available."""


class EmptyHypothesisSet(SrdError):
    """Speaker attribution was asked to choose from no candidates."""


class EmptyReference(SrdError):
    """Scoring requires a non-empty reference."""


class SpecInvalid(SrdError):
    """A scene specification violates its invariants."""
