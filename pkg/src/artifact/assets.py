"""The visual-asset library: glyphs, colormaps, line textures, surface textures.

Assets live in a local library directory, one subdirectory per asset with a
small JSON manifest pointing at the payload file (OBJ for glyphs, PNG for
textures, JSON control points for colormaps). A handful of builtin assets
(unit sphere glyph, constant light-gray colormap, solid-white textures) are
shipped in code and back every unassigned slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .colormaps import Colormap, ColormapError, constant_colormap, load_colormap
from .mesh import GlyphMesh, MeshError, icosphere, load_obj
from .pngio import PngError, decode_png

ASSET_KINDS = ("glyph", "colormap", "line_texture", "texture")

BUILTIN_SPHERE = "builtin:sphere"
BUILTIN_GRAY = "builtin:gray"
BUILTIN_WHITE_TEXTURE = "builtin:white"
BUILTIN_WHITE_LINE = "builtin:white-line"

class AssetError(ValueError):
    pass


@dataclass(frozen=True)
class ImageTexture:
    width: int
    height: int
    pixels: np.ndarray  # (h, w, 4) uint8, row-major, top-left origin

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageTexture):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


def solid_texture(rgba: tuple[int, int, int, int], size: int = 1) -> ImageTexture:
    pixels = np.full((size, size, 4), rgba, dtype=np.uint8)
    pixels.setflags(write=False)
    return ImageTexture(size, size, pixels)


def texture_from_array(pixels: np.ndarray) -> ImageTexture:
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 4 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise AssetError(f"texture must be (h, w, 4) uint8, got {arr.shape}")
    arr.setflags(write=False)
    return ImageTexture(int(arr.shape[1]), int(arr.shape[0]), arr)


@dataclass(frozen=True)
class VisualAsset:
    id: str
    kind: str  # "glyph" | "colormap" | "line_texture" | "texture"
    name: str
    payload: GlyphMesh | Colormap | ImageTexture


@dataclass(frozen=True)
class AssetDescriptor:
    id: str
    kind: str
    name: str
    path: Path | None  # None for builtins


def builtin_assets() -> dict[str, VisualAsset]:
    return {
        BUILTIN_SPHERE: VisualAsset(
            BUILTIN_SPHERE, "glyph", "Sphere", icosphere(2)
        ),
        BUILTIN_GRAY: VisualAsset(
            BUILTIN_GRAY, "colormap", "Light Gray", constant_colormap((200, 200, 200))
        ),
        BUILTIN_WHITE_TEXTURE: VisualAsset(
            BUILTIN_WHITE_TEXTURE, "texture", "White", solid_texture((255, 255, 255, 255))
        ),
        BUILTIN_WHITE_LINE: VisualAsset(
            BUILTIN_WHITE_LINE, "line_texture", "White Line", solid_texture((255, 255, 255, 255))
        ),
    }


class AssetLibrary:
    """Catalog of a library directory plus the session palette.

    ``scan`` only reads manifests; payloads load lazily on import. Imports
    are idempotent: importing an id twice leaves one palette entry.
    """

    def __init__(self):
        self._catalog: dict[str, AssetDescriptor] = {}
        self._loaded: dict[str, VisualAsset] = dict(builtin_assets())
        self._palette: list[str] = []
        self.scan_warnings: list[str] = []
        for asset in builtin_assets().values():
            self._catalog[asset.id] = AssetDescriptor(asset.id, asset.kind, asset.name, None)

    @classmethod
    def scan(cls, root) -> "AssetLibrary":
        lib = cls()
        root = Path(root)
        if not root.is_dir():
            raise AssetError(f"asset library directory not found: {root}")
        for manifest_path in sorted(root.glob("*/manifest.json")):
            try:
                entry = lib._read_manifest(manifest_path)
            except AssetError as exc:
                lib.scan_warnings.append(str(exc))
                continue
            if entry.id in lib._catalog:
                lib.scan_warnings.append(
                    f"{manifest_path}: duplicate asset id {entry.id!r}, skipped"
                )
                continue
            lib._catalog[entry.id] = entry
        return lib

    def _read_manifest(self, manifest_path: Path) -> AssetDescriptor:
        try:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise AssetError(f"{manifest_path}: unreadable manifest: {exc}") from exc
        asset_id = manifest.get("id")
        kind = manifest.get("kind")
        name = manifest.get("name") or asset_id
        file_name = manifest.get("file")
        if not isinstance(asset_id, str) or not asset_id:
            raise AssetError(f"{manifest_path}: missing asset id")
        if kind not in ASSET_KINDS:
            raise AssetError(f"{manifest_path}: bad kind {kind!r} for {asset_id!r}")
        if not isinstance(file_name, str) or not file_name:
            raise AssetError(f"{manifest_path}: missing payload file for {asset_id!r}")
        payload_path = manifest_path.parent / file_name
        if not payload_path.is_file():
            raise AssetError(
                f"{manifest_path}: asset {asset_id!r} payload missing: {payload_path.name}"
            )
        return AssetDescriptor(asset_id, kind, str(name), payload_path)

    def catalog(self) -> list[AssetDescriptor]:
        return list(self._catalog.values())

    def descriptor(self, asset_id: str) -> AssetDescriptor:
        try:
            return self._catalog[asset_id]
        except KeyError:
            raise AssetError(f"unknown asset id {asset_id!r}") from None

    def kind_of(self, asset_id: str) -> str:
        return self.descriptor(asset_id).kind

    @property
    def palette(self) -> list[str]:
        return list(self._palette)

    def import_asset(self, asset_id: str) -> VisualAsset:
        """Load (if needed) and add the asset to the session palette."""
        asset = self.resolve(asset_id)
        if asset_id not in self._palette:
            self._palette.append(asset_id)
        return asset

    def resolve(self, asset_id: str) -> VisualAsset:
        """Load an asset payload without touching the palette."""
        if asset_id in self._loaded:
            return self._loaded[asset_id]
        entry = self.descriptor(asset_id)
        payload = self._load_payload(entry)
        asset = VisualAsset(entry.id, entry.kind, entry.name, payload)
        self._loaded[asset_id] = asset
        return asset

    def _load_payload(self, entry: AssetDescriptor):
        try:
            if entry.kind == "glyph":
                return load_obj(entry.path)
            if entry.kind == "colormap":
                return load_colormap(entry.path)
            return load_texture(entry.path)
        except (MeshError, ColormapError, PngError, OSError) as exc:
            raise AssetError(f"asset {entry.id!r}: corrupt payload: {exc}") from exc


def load_texture(path) -> ImageTexture:
    with open(path, "rb") as fh:
        data = fh.read()
    rgba = decode_png(data)
    rgba.setflags(write=False)
    return ImageTexture(int(rgba.shape[1]), int(rgba.shape[0]), rgba)


def write_asset(
    root, asset_id: str, kind: str, name: str, payload_file: str, payload_bytes: bytes
) -> None:
    """Write one asset directory (manifest + payload) under the library root."""
    folder = Path(root) / asset_id
    folder.mkdir(parents=True, exist_ok=True)
    (folder / payload_file).write_bytes(payload_bytes)
    manifest = {"id": asset_id, "kind": kind, "name": name, "file": payload_file}
    with open(folder / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
