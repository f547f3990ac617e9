"""Perspective rasterization with a float32 depth buffer.

Everything is plain IEEE arithmetic in a fixed order: same batches, same
camera, same settings give bit-identical pixels on every run. Optional
row-strip parallelism exists purely for speed; each strip walks the full
triangle list in order, so the output never depends on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from .scene import TriangleBatch


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical_fov: float = 45.0
    width: int = 640
    height: int = 480
    background: tuple[int, int, int] = (18, 18, 24)

    def __post_init__(self):
        pos = np.array(self.position, dtype=float)
        tgt = np.array(self.look_at, dtype=float)
        fwd = tgt - pos
        dist = np.linalg.norm(fwd)
        if dist <= 0.0:
            raise CameraError("camera position equals look_at")
        if not (0.0 < self.vertical_fov < 180.0):
            raise CameraError(f"fov {self.vertical_fov} outside (0, 180)")
        if self.width < 1 or self.height < 1:
            raise CameraError("zero-area image")
        up = np.array(self.up, dtype=float)
        if np.linalg.norm(np.cross(fwd / dist, up)) < 1e-9:
            raise CameraError("up vector is parallel to the view direction")


@dataclass(frozen=True)
class RenderSettings:
    ambient: float = 0.3
    diffuse: float = 0.7
    alpha_cutout_threshold: float = 0.5

    def __post_init__(self):
        if abs(self.ambient + self.diffuse - 1.0) > 1e-9:
            raise ValueError("ambient + diffuse must equal 1.0")


def default_camera(dataset: Dataset) -> Camera:
    """Frame the dataset bounds from the (1,1,1) diagonal direction.

    look_at is the bounds center; the eye sits 2x the bounds diagonal away;
    zero-size bounds fall back to framing a unit box around the point.
    """
    lo = np.array(dataset.bounds_min, dtype=float)
    hi = np.array(dataset.bounds_max, dtype=float)
    center = (lo + hi) / 2.0
    diagonal = float(np.linalg.norm(hi - lo))
    if diagonal <= 0.0:
        diagonal = math.sqrt(3.0)
    direction = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
    position = center + direction * (2.0 * diagonal)
    return Camera(tuple(position), tuple(center), (0.0, 1.0, 0.0), 45.0)


def camera_matrices(camera: Camera) -> tuple[np.ndarray, float, float]:
    """Combined clip = P @ V matrix plus (near, far)."""
    pos = np.array(camera.position, dtype=float)
    tgt = np.array(camera.look_at, dtype=float)
    fwd = tgt - pos
    dist = float(np.linalg.norm(fwd))
    fwd /= dist
    up = np.array(camera.up, dtype=float)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    true_up = np.cross(right, fwd)

    view = np.eye(4)
    view[0, :3] = right
    view[1, :3] = true_up
    view[2, :3] = -fwd
    view[:3, 3] = -view[:3, :3] @ pos

    near = 0.01 * dist
    far = 100.0 * dist
    fy = 1.0 / math.tan(math.radians(camera.vertical_fov) / 2.0)
    fx = fy * camera.height / camera.width
    proj = np.zeros((4, 4))
    proj[0, 0] = fx
    proj[1, 1] = fy
    proj[2, 2] = (far + near) / (near - far)
    proj[2, 3] = 2.0 * far * near / (near - far)
    proj[3, 2] = -1.0
    return proj @ view, near, far


def _clip_near(tri_clip: np.ndarray, tri_attr: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sutherland-Hodgman clip against the near plane (z + w >= 0)."""
    dists = tri_clip[:, 2] + tri_clip[:, 3]
    if (dists < 0.0).all():
        return []
    out_pos: list[np.ndarray] = []
    out_attr: list[np.ndarray] = []
    for i in range(3):
        j = (i + 1) % 3
        di, dj = dists[i], dists[j]
        if di >= 0.0:
            out_pos.append(tri_clip[i])
            out_attr.append(tri_attr[i])
        if (di >= 0.0) != (dj >= 0.0):
            t = di / (di - dj)
            out_pos.append(tri_clip[i] + t * (tri_clip[j] - tri_clip[i]))
            out_attr.append(tri_attr[i] + t * (tri_attr[j] - tri_attr[i]))
    pieces = []
    for k in range(1, len(out_pos) - 1):
        pieces.append(
            (
                np.stack([out_pos[0], out_pos[k], out_pos[k + 1]]),
                np.stack([out_attr[0], out_attr[k], out_attr[k + 1]]),
            )
        )
    return pieces


class _ScreenTriangles:
    """Screen-space triangles of one batch, attributes pre-divided by w.

    Attribute layout: [r, g, b, nx, ny, nz, u, v].
    """

    __slots__ = ("screen", "z_ndc", "inv_w", "attr_over_w", "texture", "count")

    def __init__(self, screen, z_ndc, inv_w, attr_over_w, texture):
        self.screen = screen  # (t, 3, 2)
        self.z_ndc = z_ndc  # (t, 3)
        self.inv_w = inv_w  # (t, 3)
        self.attr_over_w = attr_over_w  # (t, 3, 8)
        self.texture = texture
        self.count = screen.shape[0]


def _to_screen(tri_clip: np.ndarray, width: int, height: int):
    """(t, 3, 4) clip coords -> screen xy, ndc z, 1/w."""
    inv_w = 1.0 / tri_clip[..., 3]
    ndc = tri_clip[..., :3] * inv_w[..., None]
    screen = np.stack(
        [
            (ndc[..., 0] + 1.0) * 0.5 * width,
            (1.0 - ndc[..., 1]) * 0.5 * height,
        ],
        axis=-1,
    )
    return screen, ndc[..., 2], inv_w


def _prepare_batch(batch: TriangleBatch, clip_matrix: np.ndarray, width: int, height: int) -> _ScreenTriangles | None:
    if batch.triangle_count == 0:
        return None
    v = batch.vertices
    hom = np.concatenate([v, np.ones((v.shape[0], 1))], axis=1)
    clip = hom @ clip_matrix.T
    uvs = batch.uvs if batch.uvs is not None else np.zeros((v.shape[0], 2))
    attrs = np.concatenate([batch.colors, batch.normals, uvs], axis=1)

    tris = batch.triangles
    tri_clip = clip[tris]  # (t, 3, 4)
    tri_attr = attrs[tris]  # (t, 3, 8)
    crosses_near = ((tri_clip[..., 2] + tri_clip[..., 3]) < 0.0).any(axis=1)

    kept_clip = [tri_clip[~crosses_near]]
    kept_attr = [tri_attr[~crosses_near]]
    for ti in np.flatnonzero(crosses_near):
        for piece_clip, piece_attr in _clip_near(tri_clip[ti], tri_attr[ti]):
            kept_clip.append(piece_clip[None])
            kept_attr.append(piece_attr[None])
    all_clip = np.concatenate(kept_clip)
    all_attr = np.concatenate(kept_attr)
    if all_clip.shape[0] == 0:
        return None
    screen, z_ndc, inv_w = _to_screen(all_clip, width, height)
    return _ScreenTriangles(
        screen, z_ndc, inv_w, all_attr * inv_w[..., None], batch.texture
    )


def _rasterize_strip(
    prepared: list[_ScreenTriangles],
    color: np.ndarray,
    depth: np.ndarray,
    y0: int,
    y1: int,
    width: int,
    settings: RenderSettings,
    light: np.ndarray,
) -> None:
    """Rasterize every prepared triangle into rows [y0, y1).

    color/depth are views covering exactly those rows. Triangles are
    visited in global order, so two strips never disagree with the
    single-strip result.
    """
    cutoff = settings.alpha_cutout_threshold * 255.0
    for block in prepared:
        texture = block.texture
        for ti in range(block.count):
            xy = block.screen[ti]
            min_x = max(int(math.floor(xy[:, 0].min())), 0)
            max_x = min(int(math.ceil(xy[:, 0].max())), width - 1)
            min_y = max(int(math.floor(xy[:, 1].min())), y0)
            max_y = min(int(math.ceil(xy[:, 1].max())), y1 - 1)
            if min_x > max_x or min_y > max_y:
                continue

            ax, ay = xy[0]
            bx, by = xy[1]
            cx, cy = xy[2]
            area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area == 0.0:
                continue

            px = np.arange(min_x, max_x + 1, dtype=np.float64) + 0.5
            py = np.arange(min_y, max_y + 1, dtype=np.float64) + 0.5
            gx, gy = np.meshgrid(px, py)
            w0 = (cx - bx) * (gy - by) - (cy - by) * (gx - bx)
            w1 = (ax - cx) * (gy - cy) - (ay - cy) * (gx - cx)
            w2 = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
            if area > 0.0:
                mask = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
            else:
                mask = (w0 <= 0.0) & (w1 <= 0.0) & (w2 <= 0.0)
            if not mask.any():
                continue

            l0 = w0[mask] / area
            l1 = w1[mask] / area
            l2 = w2[mask] / area
            z_ndc = block.z_ndc[ti]
            z = l0 * z_ndc[0] + l1 * z_ndc[1] + l2 * z_ndc[2]
            zs32 = z.astype(np.float32)

            rows = gy[mask].astype(np.intp) - y0
            cols = gx[mask].astype(np.intp)
            # strict test: equal depth keeps the first-written fragment
            keep = (zs32 < depth[rows, cols]) & (z <= 1.0)
            if not keep.any():
                continue
            rows, cols = rows[keep], cols[keep]
            l0, l1, l2, zs32 = l0[keep], l1[keep], l2[keep], zs32[keep]

            inv_w = block.inv_w[ti]
            aow = block.attr_over_w[ti]
            frag_inv_w = l0 * inv_w[0] + l1 * inv_w[1] + l2 * inv_w[2]
            attrs = (
                l0[:, None] * aow[0] + l1[:, None] * aow[1] + l2[:, None] * aow[2]
            ) / frag_inv_w[:, None]

            if texture is not None:
                u = attrs[:, 6]
                vv = attrs[:, 7]
                tw, th = texture.width, texture.height
                tx = np.floor((u - np.floor(u)) * tw).astype(np.intp)
                np.clip(tx, 0, tw - 1, out=tx)
                ty = np.floor(np.clip(vv, 0.0, 1.0) * th).astype(np.intp)
                np.clip(ty, 0, th - 1, out=ty)
                texels = texture.pixels[ty, tx]
                alive = texels[:, 3].astype(np.float64) >= cutoff
                if not alive.any():
                    continue
                rows, cols, zs32 = rows[alive], cols[alive], zs32[alive]
                attrs = attrs[alive]
                tex_rgb = texels[alive, :3].astype(np.float64) / 255.0
            else:
                tex_rgb = None

            normals = attrs[:, 3:6]
            lengths = np.linalg.norm(normals, axis=1)
            lengths[lengths < 1e-12] = 1.0
            ndotl = (normals @ light) / lengths
            shade = settings.ambient + settings.diffuse * np.maximum(0.0, ndotl)
            rgb = attrs[:, 0:3] * shade[:, None]
            if tex_rgb is not None:
                rgb = rgb * tex_rgb
            rgb = np.clip(rgb, 0.0, 1.0)

            depth[rows, cols] = zs32
            color[rows, cols, :3] = np.floor(rgb * 255.0 + 0.5).astype(np.uint8)
            color[rows, cols, 3] = 255


def rasterize(
    batches: list[TriangleBatch],
    camera: Camera,
    settings: RenderSettings | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Render batches to an (h, w, 4) uint8 RGBA image."""
    settings = settings or RenderSettings()
    w, h = camera.width, camera.height
    clip_matrix, _, _ = camera_matrices(camera)

    pos = np.array(camera.position, dtype=float)
    tgt = np.array(camera.look_at, dtype=float)
    fwd = tgt - pos
    fwd /= np.linalg.norm(fwd)
    light = -fwd  # headlight: from the surface toward the camera

    color = np.empty((h, w, 4), dtype=np.uint8)
    color[..., 0] = camera.background[0]
    color[..., 1] = camera.background[1]
    color[..., 2] = camera.background[2]
    color[..., 3] = 255
    depth = np.full((h, w), np.inf, dtype=np.float32)

    prepared = []
    for batch in batches:
        block = _prepare_batch(batch, clip_matrix, w, h)
        if block is not None:
            prepared.append(block)

    threads = max(1, int(threads))
    if threads == 1 or h < 2 * threads:
        _rasterize_strip(prepared, color, depth, 0, h, w, settings, light)
    else:
        bounds = [(i * h) // threads for i in range(threads + 1)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(
                    _rasterize_strip,
                    prepared,
                    color[bounds[i] : bounds[i + 1]],
                    depth[bounds[i] : bounds[i + 1]],
                    bounds[i],
                    bounds[i + 1],
                    w,
                    settings,
                    light,
                )
                for i in range(threads)
            ]
            for f in futures:
                f.result()
    return color
