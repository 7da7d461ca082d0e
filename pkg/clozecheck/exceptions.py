"""Exception hierarchy for clozecheck.

Every error raised on purpose by the package derives from ``ClozecheckError``.
Errors that mirror a builtin category inherit from it as well, so callers may
catch either the domain class or the builtin one.
"""


class ClozecheckError(Exception):
    """Base class for all clozecheck errors."""


class ConfigError(ClozecheckError, ValueError):
    """Invalid or unreadable run configuration."""


class UnknownCharError(ClozecheckError, KeyError):
    """A character is not part of the vocabulary."""

    def __init__(self, pos: int, char: str):
        self.pos = pos
        self.char = char
        super().__init__(f"Unknown character {char!r} at position {pos}")

    def __str__(self) -> str:
        return self.args[0]


class NoConfusionError(ClozecheckError, KeyError):
    """A character has no shape-similar substitutes."""

    def __init__(self, char: str):
        self.char = char
        super().__init__(f"No confusion entry for {char!r}")

    def __str__(self) -> str:
        return self.args[0]


class InconsistentScriptError(ClozecheckError, ValueError):
    """Edit payloads do not match the label sequence they accompany."""


class EmptyTextError(ClozecheckError, ValueError):
    """A text line to render is empty."""


class TooWideError(ClozecheckError, ValueError):
    """An image is wider than the configured maximum width."""

    def __init__(self, width: int, max_width: int):
        self.width = width
        self.max_width = max_width
        super().__init__(f"Image width {width} exceeds max_width {max_width}")


class ShapeMismatchError(ClozecheckError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, op: str, shape_a: tuple[int, ...], shape_b: tuple[int, ...]):
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        super().__init__(f"{op}: incompatible shapes {self.shape_a} and {self.shape_b}")


class AllMaskedRowError(ClozecheckError, ValueError):
    """A softmax row has no unmasked entry."""


class MissingGradError(ClozecheckError, RuntimeError):
    """A trainable parameter has no gradient at update time."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Parameter {name!r} has no gradient")


class TargetTooLongError(ClozecheckError, ValueError):
    """No CTC alignment exists for the target in the available frames."""

    def __init__(self, target_len: int, required: int, frames: int):
        self.target_len = target_len
        self.required = required
        self.frames = frames
        super().__init__(
            f"Target of length {target_len} needs at least {required} frames, got {frames}"
        )


class GeometryMismatchError(ClozecheckError, ValueError):
    """Image or checkpoint geometry does not match the configuration."""


class AnswerTooLongError(ClozecheckError, ValueError):
    """An answer does not fit into the text sequence length."""

    def __init__(self, length: int, limit: int):
        self.length = length
        self.limit = limit
        super().__init__(f"Answer of length {length} (+<BLK>) exceeds max_answer_len {limit}")


class LengthMismatchError(ClozecheckError, ValueError):
    """Paired sequences have different lengths."""


class CheckpointCorruptError(ClozecheckError, OSError):
    """A checkpoint file cannot be decoded."""
