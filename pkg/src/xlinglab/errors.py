"""Exception types shared across the package.

Every failure mode raised on purpose derives from XlingError so callers can
catch library errors without swallowing genuine bugs.
"""


class XlingError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(XlingError, ValueError):
    """Operand shapes are incompatible for the requested op."""


class VocabIndexError(XlingError, IndexError):
    """A token id or target index is outside the vocabulary."""


class LayerIndexError(XlingError, IndexError):
    """A layer index is outside the recorded hidden-state range."""


class DegenerateMaskError(XlingError, ValueError):
    """A loss mask selects no positions at all."""


class ContractError(XlingError, ValueError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class ConfigError(XlingError, ValueError):
    """A configuration value is out of its legal range."""


class CorpusParseError(XlingError, ValueError):
    """A corpus or vocab file line failed to parse.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class OovError(XlingError, KeyError):
    """A surface form is not in the closed vocabulary."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"word not in vocabulary: {word!r}")

    def __str__(self) -> str:  # KeyError quotes its arg; keep the message readable
        return self.args[0]


class EmptyInputError(XlingError, ValueError):
    """An example builder or metric was handed empty input."""


class SequenceLengthError(XlingError, ValueError):
    """A token sequence exceeds the model's positional range."""


class CheckpointFormatError(XlingError, ValueError):
    """A checkpoint file is malformed; names the byte offset."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"checkpoint error at byte {offset}: {message}")


class DegenerateEmbeddingError(XlingError, ValueError):
    """A sentence embedding has zero norm, so cosine is undefined."""


class NonFiniteLossError(XlingError, ArithmeticError):
    """NaN or Inf surfaced at loss evaluation."""


class DivergenceError(XlingError, RuntimeError):
    """Training loss stayed above the abort threshold for too long."""
