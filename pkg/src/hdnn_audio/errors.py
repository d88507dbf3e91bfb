"""Exception hierarchy shared across the package."""


class HdnnError(Exception):
    """Base class for all package errors."""


class ConfigError(HdnnError):
    """Invalid or unknown configuration."""


class DataError(HdnnError):
    """Problems with corpora, annotations or on-disk artifacts."""


class ClipTooShort(DataError):
    pass


class EmptyInput(DataError):
    pass


class DimensionMismatch(HdnnError):
    pass


class LengthMismatch(HdnnError):
    pass


class LabelOutOfRange(HdnnError):
    pass


class TrainingDiverged(HdnnError):
    """Non-finite values appeared during training."""


class NonFiniteGradient(TrainingDiverged):
    pass


class NonFiniteUpdate(TrainingDiverged):
    pass


class DataTooSmall(DataError):
    pass


class ConceptTooSmall(DataError):
    pass


class ParseError(DataError):
    pass


class MissingAudio(DataError):
    pass
