"""Compose 3D multivariate visualizations from reusable plates and assets.

The pieces: a dataset carries key data (points, lines, surfaces) with
per-vertex variables; plates are typed-slot templates for rendering
algorithms; filling a plate's slots with key data, variables, and scanned
visual assets forms a data impression -- one layer of the composition.
Compositions render deterministically to PNG and can be driven live over
a WebSocket state-sync protocol.
"""

from .assets import AssetLibrary, ImageTexture, VisualAsset
from .colormaps import Colormap
from .composition import Composition, apply_command, load_state, save_state
from .data import Dataset, KeyData, ScalarField, VariableArray, load_dataset
from .mesh import GlyphMesh
from .plates import (
    DataImpression,
    PieceContext,
    PieceRef,
    PlateSpec,
    SlotSpec,
    plate_registry,
)
from .render import Camera, RenderSettings, build_scene, default_camera, rasterize
from .sampling import SamplerConfig, sample_density

__version__ = "0.1.0"

__all__ = [
    "AssetLibrary",
    "Camera",
    "Colormap",
    "Composition",
    "DataImpression",
    "Dataset",
    "GlyphMesh",
    "ImageTexture",
    "KeyData",
    "PieceContext",
    "PieceRef",
    "PlateSpec",
    "RenderSettings",
    "SamplerConfig",
    "ScalarField",
    "SlotSpec",
    "VariableArray",
    "VisualAsset",
    "apply_command",
    "build_scene",
    "default_camera",
    "load_dataset",
    "load_state",
    "plate_registry",
    "rasterize",
    "sample_density",
    "save_state",
]
