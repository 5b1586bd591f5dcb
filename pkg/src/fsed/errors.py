"""Exception hierarchy shared across the engine."""


class FsedError(Exception):
    """Base class for all engine errors."""


class ShapeMismatchError(FsedError):
    def __init__(self, primitive, *shapes):
        self.primitive = primitive
        self.shapes = shapes
        super().__init__(f"{primitive}: incompatible shapes {shapes}")


class NonFiniteError(FsedError):
    """A primitive produced NaN/Inf, or an evaluation was non-finite."""

    def __init__(self, primitive, node_index=None, detail=""):
        self.primitive = primitive
        self.node_index = node_index
        msg = f"non-finite value in {primitive}"
        if node_index is not None:
            msg += f" (node {node_index})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TapeError(FsedError):
    """Misuse of the reverse-mode tape (e.g. non-scalar root)."""


class DataFormatError(FsedError):
    """Malformed EMB1/PSC1 file. Carries the byte offset of the problem."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        parts = [message]
        if offset is not None:
            parts.append(f"at byte {offset}")
        if path is not None:
            parts.append(f"in {path}")
        super().__init__(" ".join(parts))


class BadMagicError(DataFormatError):
    pass


class TruncatedRecordError(DataFormatError):
    pass


class LabelRangeError(DataFormatError):
    pass


class NonFiniteValueError(DataFormatError):
    pass


class ValidationError(FsedError):
    """A dataset or episode violates a structural invariant."""


class SamplingError(FsedError):
    """Dataset cannot supply the requested episode shape."""


class LossConfigError(FsedError):
    """A loss was called on an episode that cannot support it."""


class EmptyClassError(FsedError):
    def __init__(self, class_index, where):
        self.class_index = class_index
        super().__init__(f"class {class_index} has no instances in {where}")


class DivergenceError(FsedError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration, last_breakdown=None):
        self.iteration = iteration
        self.last_breakdown = last_breakdown
        super().__init__(f"non-finite loss at iteration {iteration}")
