"""Spatially-coupled precoded rateless codes on the binary erasure channel."""

from .dd_core import CodeParams, DegreeSystem, Flavor, derive_params

__all__ = ["CodeParams", "DegreeSystem", "Flavor", "derive_params"]
__version__ = "0.1.0"
