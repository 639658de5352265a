from .backend import available_backends, backend_name, n_threads, set_backend
from .project import SplatBatch, project_points, project_scene
from .rasterize import (
    per_gaussian_view_colors,
    rasterize_color,
    rasterize_depth,
    rasterize_features,
    rasterize_features_grad,
)

__all__ = [
    "SplatBatch",
    "available_backends",
    "backend_name",
    "n_threads",
    "per_gaussian_view_colors",
    "project_points",
    "project_scene",
    "rasterize_color",
    "rasterize_depth",
    "rasterize_features",
    "rasterize_features_grad",
    "set_backend",
]
