"""scene2virt: visual scene analysis, scene-graph description and 3D synthesis."""
from ._kernels import BACKEND as RASTER_BACKEND

__version__ = "0.1.0"
