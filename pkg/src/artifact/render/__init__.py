"""Deterministic software renderer: scene assembly, rasterization, PNG out."""

from .raster import Camera, RenderSettings, default_camera, rasterize
from .scene import TriangleBatch, build_scene

__all__ = [
    "Camera",
    "RenderSettings",
    "TriangleBatch",
    "build_scene",
    "default_camera",
    "rasterize",
]
