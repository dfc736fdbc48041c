"""Finite-volume solver for the coupled phase-field / temperature / nutrient
system, with structure monitors (bounds, energy balance, entropy production,
continuous dependence) exposed from the C++ core."""

from actherm._core import *  # noqa: F401,F403
from actherm._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__doc__ = _core_doc
