"""Exception types shared across the package."""


class CtrnetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(CtrnetError, ValueError):
    """Operands have incompatible shapes; the message names both."""


class NonFiniteError(CtrnetError, FloatingPointError):
    """A NaN or Inf appeared where the contract requires finite values."""

    def __init__(self, where: str, detail: str = ""):
        self.where = where
        msg = f"non-finite values in {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class AllMaskedError(CtrnetError, ValueError):
    """Attention was asked to pool over a sequence with no valid positions."""


class OutOfVocabularyError(CtrnetError, ValueError):
    """A categorical value falls outside its field's vocabulary."""

    def __init__(self, field: str, index: int, vocab_size: int):
        self.field = field
        self.index = index
        self.vocab_size = vocab_size
        super().__init__(
            f"field '{field}': index {index} outside vocabulary of size {vocab_size}"
        )


class SchemaError(CtrnetError, ValueError):
    """A schema is invalid or an instance does not conform to it."""


class DatasetFormatError(CtrnetError, ValueError):
    """A dataset file is malformed; carries the offending line number."""

    def __init__(self, line_number: int, detail: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {detail}")


class CheckpointError(CtrnetError, ValueError):
    """A checkpoint file is malformed or incompatible with its consumer."""


class TrainingDivergedError(CtrnetError, RuntimeError):
    """Training hit a non-finite loss; carries the batch index."""

    def __init__(self, epoch: int, batch_index: int, loss_value: float):
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(
            f"non-finite loss {loss_value!r} at epoch {epoch}, batch {batch_index}"
        )
