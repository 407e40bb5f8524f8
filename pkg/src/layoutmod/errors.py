"""Exception hierarchy.

Everything derived from :class:`InvalidInputError` is a validation failure
(CLI exit status 2).
"""


class InvalidInputError(ValueError):
    """Input violates an operation's preconditions."""


class ConsistencyError(InvalidInputError):
    """Two inputs that must agree (token map vs. layout, shapes) do not."""


class LayoutError(InvalidInputError):
    """Base class for layout-condition validation failures."""


class MalformedLayoutError(LayoutError):
    pass


class OverlapError(LayoutError):
    def __init__(self, first: int, second: int, cell: tuple[int, int]):
        self.segments = (first, second)
        self.cell = cell
        super().__init__(
            f"segments {first} and {second} overlap at cell (row={cell[0]}, col={cell[1]})"
        )


class EmptyMaskError(LayoutError):
    def __init__(self, index: int):
        self.segment = index
        super().__init__(f"segment {index} has an empty mask")


class AlignmentError(LayoutError):
    def __init__(self, index: int, text: str, reason: str):
        self.segment = index
        super().__init__(f"segment {index} ({text!r}): {reason}")


class ResolutionError(LayoutError):
    def __init__(self, index: int, resolution: int):
        self.segment = index
        self.resolution = resolution
        super().__init__(f"segment {index} owns no cells at resolution {resolution}")
