"""Exception types shared across the package."""


class EntromapError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EntromapError, ValueError):
    """Malformed or inconsistent data: bad indices, dimension mismatches,
    unparseable files."""


class InvalidParameterError(EntromapError, ValueError):
    """A configuration value or flag outside its admissible range."""


class DegenerateInputError(EntromapError, ValueError):
    """Input that is syntactically fine but leaves the problem undefined,
    e.g. estimating from all-zero counts with no prior."""


class BoundaryError(EntromapError, ValueError):
    """An interior-only quantity was requested at a boundary point."""


class ResourceError(EntromapError, RuntimeError):
    """A guard against unreasonable resource use fired (grid too large)."""


class DegenerateModelError(EntromapError, RuntimeError):
    """A latent-variable model assigns zero probability to an observed cell."""
