"""Asymptotic directional stiffness of periodic shell-lattice middle
surfaces: evaluation, analytic bounds, and shape optimization."""

from .materials import LameSet, lame_from_engineering
from .mesh import PeriodicMesh, canonicalize, load_mesh, mean_element_size, save_obj
from .stiffness import (
    ads,
    bulk_modulus,
    compute_CA,
    evaluate,
    homogeneous_membrane_tensor,
    optimality_residual,
    tensor_rel_error,
)

__version__ = "0.1.0"

__all__ = [
    "LameSet",
    "lame_from_engineering",
    "PeriodicMesh",
    "canonicalize",
    "load_mesh",
    "mean_element_size",
    "save_obj",
    "ads",
    "bulk_modulus",
    "compute_CA",
    "evaluate",
    "homogeneous_membrane_tensor",
    "optimality_residual",
    "tensor_rel_error",
    "__version__",
]
