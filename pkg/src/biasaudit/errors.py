"""Exception types shared across the toolkit."""


class BiasAuditError(Exception):
    """Base class for all toolkit errors."""


class IngestError(BiasAuditError):
    """Raw dataset could not be parsed into a valid interaction dataset."""


class MalformedLineError(IngestError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


class DuplicateRatingError(IngestError):
    pass


class UnknownItemError(IngestError):
    pass


class UnknownCategoryError(BiasAuditError):
    pass


class EmptyCohortError(BiasAuditError):
    pass


class SplitError(BiasAuditError):
    pass


class TrainingDivergedError(BiasAuditError):
    def __init__(self, algorithm, epoch, learn_rate):
        super().__init__(
            f"{algorithm}: non-finite loss at epoch {epoch} (learn_rate={learn_rate}); "
            "lower the learning rate or increase regularization"
        )
        self.algorithm = algorithm
        self.epoch = epoch
        self.learn_rate = learn_rate


class UndefinedPreferenceError(BiasAuditError):
    """Preference ratio requested for a selection-free group."""


class PipelineError(BiasAuditError):
    """An experiment stage failed; carries the stage name for diagnosis."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
