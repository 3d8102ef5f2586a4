"""Hot loops. The compiled extension is used when importable; set
``SCENE2VIRT_PURE=1`` to force the numpy fallback."""
import os

from . import pure

BACKENDS = {"pure": pure.fill_triangles}

try:
    from ._raster import fill_triangles as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("SCENE2VIRT_PURE", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "pure"

fill_triangles = BACKENDS[BACKEND]
