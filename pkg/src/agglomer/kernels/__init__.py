"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy
reference implementation. Set AGGLOMER_PURE=1 to force the fallback.
"""

import os

from . import _reference

EARTH_RADIUS_KM = _reference.EARTH_RADIUS_KM

if os.environ.get("AGGLOMER_PURE"):
    _impl = _reference
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _reference

haversine_matrix = _impl.haversine_matrix
proximity_matrix = _impl.proximity_matrix
density_matrix = _impl.density_matrix


def backend_name():
    return "compiled" if _impl.__name__.endswith("_core") else "python"
