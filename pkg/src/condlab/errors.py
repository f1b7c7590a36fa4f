"""Exception types shared across the package."""


class CondlabError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(CondlabError):
    """A size or refinement guard was exceeded."""


class ResolutionError(CondlabError):
    """The mesh is too coarse to resolve the requested feature."""


class SolverError(CondlabError):
    """A linear solve failed or its residual check did not pass."""


class InversionError(CondlabError):
    """Newton inversion of a coordinate change did not converge."""
