"""Restricted Delaunay surface remeshing with conventional (circumcentre) and
Frontal-Delaunay (off-centre) refinement."""

__version__ = "0.1.0"

from .delaunay import Tessellation, build  # noqa: E402
from .refine import RefineConfig, run  # noqa: E402
from .sizing import SizeField, build_field, constant_field, estimate_lfs  # noqa: E402
from .surface import SurfacePolyhedron, load_and_validate  # noqa: E402

__all__ = [
    "SizeField", "SurfacePolyhedron", "RefineConfig", "Tessellation",
    "build", "build_field", "constant_field", "estimate_lfs", "load_and_validate", "run",
]
