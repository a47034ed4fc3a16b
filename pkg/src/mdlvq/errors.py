"""Exception types shared across the package."""


class MdlvqError(Exception):
    """Base class for all package errors."""


class ConfigError(MdlvqError):
    """Invalid or malformed configuration (CLI exit code 2)."""


class InfeasibleLabelingError(MdlvqError):
    """A labeling could not be constructed (CLI exit code 3)."""


class AdmissibilityError(InfeasibleLabelingError):
    """Requested sublattice index is not admissible for the lattice."""
