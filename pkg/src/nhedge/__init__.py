"""Edge modes of non-Hermitian subwavelength dimer chains in the capacitance approximation."""

from .errors import (
    AccuracyError,
    ConfigError,
    NHEdgeError,
    NoFlatBandError,
    NotFoundError,
)
from .geometry import ChainGeometry, build_geometric_defect_array, build_material_defect_array, build_periodic
from .spectra import MaterialConfig

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ChainGeometry",
    "ConfigError",
    "MaterialConfig",
    "NHEdgeError",
    "NoFlatBandError",
    "NotFoundError",
    "__version__",
    "build_geometric_defect_array",
    "build_material_defect_array",
    "build_periodic",
]
