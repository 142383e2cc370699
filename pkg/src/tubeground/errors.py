"""Exception hierarchy shared across the package."""


class TubegroundError(Exception):
    """Base class for all errors raised by this package."""


class AnnotationParseError(TubegroundError):
    """Annotation document is malformed (bad syntax, missing keys, bad types)."""


class AnnotationValidationError(TubegroundError):
    """A parsed record violates an invariant; message names the field."""


class SceneConfigError(TubegroundError):
    """Synthetic scene configuration is unusable."""


class StoreIntegrityError(TubegroundError):
    """Feature payload does not match what the manifest declares."""


class StoreFormatError(TubegroundError):
    """Feature manifest declares an unsupported dtype or layout."""


class MissingFrameError(TubegroundError, KeyError):
    """Requested (video, frame) pair is not in the store."""


class GraphValidationError(TubegroundError):
    """Relation triplet or edge label outside the allowed vocabulary."""


class CheckpointError(TubegroundError):
    """Checkpoint missing, unreadable, or incompatible with the config."""


class TrainingDivergedError(TubegroundError):
    """Loss became non-finite; message names the first offending tensor."""
