"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: user-facing input problems exit with 1,
container integrity problems with 2, partial benchmark failures with 3.
"""


class HolocompError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HolocompError):
    """Input violates a documented precondition (range, finiteness, config)."""


class StructuralError(HolocompError):
    """Shape, count or dimension mismatch between related inputs."""


class InvalidGridError(HolocompError):
    """Patch grid incompatible with the hologram dimensions."""


class UnsupportedShapeError(HolocompError):
    """Array shape outside what an operation supports (e.g. odd FFT sizes)."""


class DegenerateInputError(HolocompError):
    """Input is formally valid but carries no signal (all-zero field/image)."""


class IntegrityError(HolocompError):
    """Corrupt or truncated container stream.

    ``offset`` is the byte position at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedVersionError(HolocompError):
    """Container declares a format version this build does not understand."""
