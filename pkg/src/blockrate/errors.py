"""Exception types shared across the package."""


class BlockrateError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BlockrateError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ComputationError(BlockrateError, ArithmeticError):
    """A numerical evaluation produced a non-finite or impossible value."""


class EstimationError(BlockrateError, RuntimeError):
    """A statistical estimate cannot be formed from the data provided."""
