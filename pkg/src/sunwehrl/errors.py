"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """A dense construction would exceed the configured dimension budget."""

    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"{what}: dimension {size} exceeds limit {limit}")
        self.size = size
        self.limit = limit


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, msg: str, achieved: float):
        super().__init__(f"{msg} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class IllConditionedFit(ArithmeticError):
    """Least-squares system too poorly conditioned to trust the solution."""
