"""Exception types raised across the package."""

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible extents."""


class RankDeficiencyError(ValueError):
    """A reduced eigenproblem has fewer usable directions than requested."""


class DefinitenessError(np.linalg.LinAlgError):
    """Right-hand matrix of a generalized problem is not positive definite."""


class DegenerateGeometryError(ValueError):
    """Local reconstruction weights cannot be normalized."""


class DataFormatError(ValueError):
    """A data file is malformed or inconsistent."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
