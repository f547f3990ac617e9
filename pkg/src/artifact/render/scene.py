"""Scene assembly: composition -> world-space triangle batches.

Each visible, renderable impression contributes one batch. Glyph plates
instance their mesh once per key-data vertex; ribbon plates extrude
polylines with a parallel-transport frame so the strip never twists;
surface plates pass their triangles through. Colors come from the
impression's colormap, uv coordinates feed the rasterizer's nearest-
neighbor texture sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import colormaps
from ..assets import AssetError, AssetLibrary, ImageTexture
from ..colormaps import Colormap
from ..composition import Composition
from ..data import Dataset, DatasetError, KeyData, variable_range
from ..mesh import GlyphMesh
from ..plates import (
    NotRenderable,
    PieceContext,
    PieceRef,
    PLATE_GLYPHS,
    PLATE_GLYPH_LINES,
    PLATE_RIBBONS,
    PLATE_SURFACE,
    effective_config,
)

_WORLD_AXES = np.eye(3)


@dataclass
class TriangleBatch:
    impression_id: str
    vertices: np.ndarray  # (v, 3) float64, world space
    normals: np.ndarray  # (v, 3) float64, unit
    colors: np.ndarray  # (v, 3) float64 in [0, 1]
    triangles: np.ndarray  # (t, 3) int32
    uvs: np.ndarray | None = None  # (v, 2) float64
    texture: ImageTexture | None = None

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])


def least_aligned_axis(direction: np.ndarray) -> np.ndarray:
    """World axis least aligned with the direction; ties pick the lowest index."""
    dots = np.abs(_WORLD_AXES @ direction)
    return _WORLD_AXES[int(np.argmin(dots))]


def rotation_aligning(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation matrix taking unit vector a onto unit vector b (Rodrigues)."""
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        # opposite: rotate pi about a deterministic axis perpendicular to a
        p = np.cross(a, least_aligned_axis(a))
        p /= np.linalg.norm(p)
        return 2.0 * np.outer(p, p) - np.eye(3)
    v = np.cross(a, b)
    vx = np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )
    return np.eye(3) + vx + (vx @ vx) / (1.0 + c)


def _scalar_values(kd: KeyData, var_name: str | None) -> tuple[np.ndarray | None, tuple[float, float]]:
    if var_name is None:
        return None, (0.0, 0.0)
    return kd.variable(var_name).values, variable_range(kd, var_name)


def _vertex_colors(
    kd: KeyData, cmap: Colormap, color_var: str | None
) -> np.ndarray:
    values, rng = _scalar_values(kd, color_var)
    n = kd.vertex_count
    if values is None:
        rgb = colormaps.apply_t(cmap, 0.0)
        return np.tile(np.array(rgb, dtype=np.float64) / 255.0, (n, 1))
    out = np.empty((n, 3), dtype=np.float64)
    for i in range(n):
        out[i] = colormaps.apply(cmap, float(values[i]), rng)
    return out / 255.0


def _instance_sizes(
    kd: KeyData,
    size_var: str | None,
    size_range: tuple[float, float],
    uniform_size: float,
    diagonal: float,
) -> np.ndarray:
    """World-unit scale per instance: slot sizes are fractions of the
    dataset diagonal; an assigned size variable maps linearly onto
    size_range."""
    n = kd.vertex_count
    if size_var is None:
        return np.full(n, uniform_size * diagonal)
    values, (lo, hi) = _scalar_values(kd, size_var)
    s_lo, s_hi = size_range
    if hi <= lo:
        t = np.zeros(n)
    else:
        t = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return (s_lo + t * (s_hi - s_lo)) * diagonal


def _orientation_rotations(directions: np.ndarray | None, axis, n: int) -> list[np.ndarray] | None:
    if directions is None:
        return None
    a = np.asarray(axis, dtype=np.float64)
    rotations = []
    for i in range(n):
        d = directions[i]
        norm = float(np.linalg.norm(d))
        if norm < 1e-12:
            rotations.append(np.eye(3))
        else:
            rotations.append(rotation_aligning(a, d / norm))
    return rotations


def _line_tangents(kd: KeyData) -> np.ndarray:
    """Per-vertex tangent along the polylines (unnormalized; zero if unused).

    The first polyline that references a vertex wins; interior vertices
    average their two adjacent segment directions.
    """
    tangents = np.zeros((kd.vertex_count, 3))
    seen = np.zeros(kd.vertex_count, dtype=bool)
    verts = kd.vertices
    for poly in kd.topology:
        for j, vi in enumerate(poly):
            if seen[vi]:
                continue
            seen[vi] = True
            acc = np.zeros(3)
            if j > 0:
                d = verts[vi] - verts[poly[j - 1]]
                norm = np.linalg.norm(d)
                if norm > 1e-12:
                    acc += d / norm
            if j + 1 < len(poly):
                d = verts[poly[j + 1]] - verts[vi]
                norm = np.linalg.norm(d)
                if norm > 1e-12:
                    acc += d / norm
            tangents[vi] = acc
    return tangents


def _glyph_batch(
    imp_id: str,
    kd: KeyData,
    mesh: GlyphMesh,
    cmap: Colormap,
    config: dict[str, PieceRef | None],
    diagonal: float,
    orient_along_lines: bool,
) -> TriangleBatch:
    n = kd.vertex_count
    base_v = mesh.vertices
    base_n = mesh.normals
    base_t = mesh.triangles
    nv = base_v.shape[0]

    color_var = _variable_name(config.get("color_variable"))
    size_var = _variable_name(config.get("size_variable"))
    sizes = _instance_sizes(
        kd,
        size_var,
        _primitive_value(config["size_range"]),
        _primitive_value(config["uniform_size"]),
        diagonal,
    )
    flat_colors = _vertex_colors(kd, cmap, color_var)

    if orient_along_lines:
        directions = _line_tangents(kd)
    else:
        orient_var = _variable_name(config.get("orientation_variable"))
        directions = kd.variable(orient_var).values if orient_var else None
    rotations = _orientation_rotations(directions, mesh.canonical_axis, n)

    verts = np.empty((n * nv, 3))
    norms = np.empty((n * nv, 3))
    colors = np.empty((n * nv, 3))
    if rotations is None:
        verts_view = verts.reshape(n, nv, 3)
        norms_view = norms.reshape(n, nv, 3)
        verts_view[:] = base_v[None, :, :] * sizes[:, None, None]
        verts_view += kd.vertices[:, None, :]
        norms_view[:] = base_n[None, :, :]
    else:
        for i in range(n):
            rotated = base_v @ rotations[i].T
            verts[i * nv : (i + 1) * nv] = rotated * sizes[i] + kd.vertices[i]
            norms[i * nv : (i + 1) * nv] = base_n @ rotations[i].T
    colors_view = colors.reshape(n, nv, 3)
    colors_view[:] = flat_colors[:, None, :]

    tris = (base_t[None, :, :] + (np.arange(n) * nv)[:, None, None]).reshape(-1, 3)
    return TriangleBatch(imp_id, verts, norms, colors, tris.astype(np.int32))


def _dedupe_polyline(verts: np.ndarray, poly: tuple[int, ...]) -> list[int]:
    out = [poly[0]]
    for vi in poly[1:]:
        if np.linalg.norm(verts[vi] - verts[out[-1]]) > 1e-12:
            out.append(vi)
    return out


def _ribbon_batch(
    imp_id: str,
    kd: KeyData,
    cmap: Colormap,
    texture: ImageTexture,
    config: dict[str, PieceRef | None],
) -> TriangleBatch:
    width = _primitive_value(config["width"])
    repeat = _primitive_value(config["texture_repeat"])
    color_var = _variable_name(config.get("color_variable"))
    point_colors = _vertex_colors(kd, cmap, color_var)

    verts_out: list[np.ndarray] = []
    norms_out: list[np.ndarray] = []
    colors_out: list[np.ndarray] = []
    uvs_out: list[np.ndarray] = []
    tris_out: list[np.ndarray] = []
    base = 0
    for poly in kd.topology:
        chain = _dedupe_polyline(kd.vertices, poly)
        if len(chain) < 2:
            continue
        pts = kd.vertices[chain]
        m = len(chain) - 1  # segment count
        tangents = pts[1:] - pts[:-1]
        tangents /= np.linalg.norm(tangents, axis=1)[:, None]

        # parallel-transport the side vector; seeded from the world axis
        # least aligned with the first segment
        sides = np.empty((m, 3))
        seed = least_aligned_axis(tangents[0])
        s = np.cross(seed, tangents[0])
        s /= np.linalg.norm(s)
        sides[0] = s
        for i in range(1, m):
            s = rotation_aligning(tangents[i - 1], tangents[i]) @ s
            sides[i] = s

        arclen = np.concatenate([[0.0], np.cumsum(np.linalg.norm(pts[1:] - pts[:-1], axis=1))])
        count = len(chain)
        v_sides = sides[np.minimum(np.arange(count), m - 1)]
        v_tangents = tangents[np.minimum(np.arange(count), m - 1)]
        half = 0.5 * width
        left = pts - half * v_sides
        right = pts + half * v_sides
        normal = np.cross(v_tangents, v_sides)

        verts_out.append(np.stack([left, right], axis=1).reshape(-1, 3))
        norms_out.append(np.repeat(normal, 2, axis=0))
        colors_out.append(np.repeat(point_colors[chain], 2, axis=0))
        u = arclen * repeat
        uv = np.stack(
            [np.repeat(u, 2), np.tile([0.0, 1.0], count)], axis=1
        )
        uvs_out.append(uv)

        quads = []
        for j in range(m):
            a = base + 2 * j
            quads.append((a, a + 1, a + 2))
            quads.append((a + 1, a + 3, a + 2))
        tris_out.append(np.array(quads, dtype=np.int32))
        base += 2 * count

    if not verts_out:
        empty3 = np.zeros((0, 3))
        return TriangleBatch(
            imp_id, empty3, empty3.copy(), empty3.copy(),
            np.zeros((0, 3), dtype=np.int32), np.zeros((0, 2)), texture,
        )
    return TriangleBatch(
        imp_id,
        np.concatenate(verts_out),
        np.concatenate(norms_out),
        np.concatenate(colors_out),
        np.concatenate(tris_out),
        np.concatenate(uvs_out),
        texture,
    )


def _surface_batch(
    imp_id: str,
    kd: KeyData,
    dataset: Dataset,
    cmap: Colormap,
    texture: ImageTexture,
    config: dict[str, PieceRef | None],
) -> TriangleBatch:
    from ..mesh import vertex_normals

    scale = _primitive_value(config["texture_scale"])
    color_var = _variable_name(config.get("color_variable"))
    colors = _vertex_colors(kd, cmap, color_var)
    tris = np.array(kd.topology, dtype=np.int32)
    normals = vertex_normals(kd.vertices, tris)

    # planar projection onto the two largest-extent dataset axes (u on the
    # larger; ties break toward the lower axis index)
    lo = np.array(dataset.bounds_min)
    hi = np.array(dataset.bounds_max)
    extent = hi - lo
    order = sorted(range(3), key=lambda i: (-extent[i], i))
    au, av = order[0], order[1]
    eu = extent[au] if extent[au] > 0 else 1.0
    ev = extent[av] if extent[av] > 0 else 1.0
    uvs = np.stack(
        [
            (kd.vertices[:, au] - lo[au]) / eu * scale,
            (kd.vertices[:, av] - lo[av]) / ev * scale,
        ],
        axis=1,
    )
    return TriangleBatch(imp_id, kd.vertices.copy(), normals, colors, tris, uvs, texture)


def _variable_name(piece: PieceRef | None) -> str | None:
    return piece.name if piece is not None else None


def _primitive_value(piece: PieceRef | None):
    return piece.value if piece is not None else None


def build_scene(
    comp: Composition, dataset: Dataset | None, assets: AssetLibrary | None
) -> tuple[list[TriangleBatch], list[str]]:
    """One world-space batch per visible, renderable impression.

    Impressions that cannot render (no key data, missing dataset or assets)
    contribute nothing and are reported in the warnings list.
    """
    ctx = PieceContext(dataset=dataset, assets=assets)
    batches: list[TriangleBatch] = []
    warnings: list[str] = []
    for imp in comp.impressions.values():
        if not imp.visible:
            continue
        try:
            config = effective_config(imp, ctx)
            batch = _impression_batch(imp.id, imp.plate_type, config, comp, dataset, assets)
        except (NotRenderable, AssetError, DatasetError) as exc:
            warnings.append(f"impression {imp.id!r} skipped: {exc}")
            continue
        batches.append(batch)
    return batches, warnings


def _impression_batch(
    imp_id: str,
    plate_type: str,
    config: dict[str, PieceRef | None],
    comp: Composition,
    dataset: Dataset | None,
    assets: AssetLibrary | None,
) -> TriangleBatch:
    if dataset is None:
        raise NotRenderable("dataset is not loaded")
    kd_piece = config["key_data"]
    kd = dataset.get_key_data(kd_piece.name)
    cmap = comp.resolve_colormap(assets, config["colormap"].name)

    if plate_type in (PLATE_GLYPHS, PLATE_GLYPH_LINES):
        glyph = _resolve_payload(assets, config["glyph"].name, GlyphMesh, "glyph")
        return _glyph_batch(
            imp_id,
            kd,
            glyph,
            cmap,
            config,
            dataset.diagonal(),
            orient_along_lines=plate_type == PLATE_GLYPH_LINES,
        )
    if plate_type == PLATE_RIBBONS:
        texture = _resolve_payload(
            assets, config["line_texture"].name, ImageTexture, "line texture"
        )
        return _ribbon_batch(imp_id, kd, cmap, texture, config)
    if plate_type == PLATE_SURFACE:
        texture = _resolve_payload(assets, config["texture"].name, ImageTexture, "texture")
        return _surface_batch(imp_id, kd, dataset, cmap, texture, config)
    raise NotRenderable(f"no renderer for plate {plate_type!r}")


def _resolve_payload(assets: AssetLibrary | None, asset_id: str, want, what: str):
    if assets is None:
        from ..assets import builtin_assets

        asset = builtin_assets().get(asset_id)
        if asset is None:
            raise AssetError(f"no asset library to resolve {asset_id!r}")
    else:
        asset = assets.resolve(asset_id)
    if not isinstance(asset.payload, want):
        raise AssetError(f"asset {asset_id!r} is not a {what}")
    return asset.payload
