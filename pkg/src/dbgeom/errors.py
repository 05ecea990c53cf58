"""Exception hierarchy shared by all dbgeom modules."""


class GeometryError(Exception):
    """Base class for every error raised by dbgeom."""


class ContractError(GeometryError, ValueError):
    """An argument violates an operation's precondition (shape, order, range)."""


class ModelParseError(GeometryError, ValueError):
    """A model file is malformed. ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SingularPointError(GeometryError, ArithmeticError):
    """The gradient of f vanishes (to threshold) at the evaluation point."""


class ChartError(GeometryError, ArithmeticError):
    """The dependent-axis derivative is too small to solve for that coordinate."""


class UnsupportedDimensionError(GeometryError, ValueError):
    pass


class GridTooLargeError(GeometryError, MemoryError):
    pass


class ConstructionError(GeometryError, RuntimeError):
    pass


class TrainingDivergedError(GeometryError, FloatingPointError):
    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"loss became non-finite ({loss}) at iteration {iteration}")
