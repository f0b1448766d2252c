"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Input has the wrong shape or type to be a covariance matrix or transform."""


class UnphysicalError(ValueError):
    """Covariance matrix violates the uncertainty principle (or is singular)."""


class FilterDomainError(ValueError):
    """Filtered operator is no longer a normalizable Gaussian state."""


class TruncationError(RuntimeError):
    """Fock truncation deficit is larger than the allowed budget."""
