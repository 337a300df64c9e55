class ValidationError(ValueError):
    """Invalid router, state, grid or noise parameters."""


class ConvergenceError(ArithmeticError):
    """Numerical routine met a non-finite value it cannot recover from."""
