"""Exception hierarchy shared by all loadcycle modules."""


class LoadcycleError(Exception):
    """Base class for every loadcycle error."""


# -- windowing / labeling -------------------------------------------------

class SequenceTooShort(LoadcycleError):
    """Sequence has fewer samples than one window."""


class EvenWindow(LoadcycleError):
    """Majority labeling requires an odd window length."""


class BadTail(LoadcycleError):
    """Tail labeling supports only the last 3 or 5 samples."""


# -- datasets / metrics ---------------------------------------------------

class EmptyDataset(LoadcycleError):
    """No frames / no windows to work with."""


class EmptyInput(LoadcycleError):
    """Empty prediction/truth lists."""


class LengthMismatch(LoadcycleError):
    """Predictions and truths differ in length."""


class EmptyMatrix(LoadcycleError):
    """Confusion matrix has zero total count."""


# -- models ---------------------------------------------------------------

class ShapeMismatch(LoadcycleError):
    """Tensor shapes inconsistent with the layer contract."""


class UnsupportedSpec(LoadcycleError):
    """Unknown architecture variant or invalid size fields."""


class NonPositiveWeight(LoadcycleError):
    """Class weights must be strictly positive."""


class CorruptFile(LoadcycleError):
    """Model file failed checksum or structural parsing."""


class VersionMismatch(LoadcycleError):
    """Model file written by an incompatible format version."""


# -- training -------------------------------------------------------------

class NoValidationCycles(LoadcycleError):
    """Fewer than two cycles: cannot split train/validation by cycle."""


class MissingBaseModel(LoadcycleError):
    """Fine-tuning regime requested without a pre-trained base model."""


# -- service --------------------------------------------------------------

class BindFailure(LoadcycleError):
    """Service could not bind its port."""


class OutOfRange(LoadcycleError):
    """Label interval outside the streamed time range."""


class InvalidInterval(LoadcycleError):
    """Label interval with t_start >= t_end."""


class InsufficientData(LoadcycleError):
    """Session does not hold at least one fully labeled cycle."""


class JobAlreadyRunning(LoadcycleError):
    """At most one training job per session."""


class UnknownVersion(LoadcycleError):
    """Registry has no such model version."""


class UnknownJob(LoadcycleError):
    """No job with this id."""
