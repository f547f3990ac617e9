"""Colormaps: control-point editing and value-to-color application.

Control points are (t, rgb) with t normalized to [0, 1]. Colors interpolate
linearly per channel in 8-bit sRGB space with round-half-up, so the same map
applied to the same values gives identical bytes everywhere. Maps are
immutable values; every edit returns a new map.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

RGB = tuple[int, int, int]


class ColormapError(ValueError):
    pass


@dataclass(frozen=True)
class Colormap:
    """Ordered control points; first t is 0 and last t is 1 by construction."""

    control_points: tuple[tuple[float, RGB], ...]

    def __post_init__(self):
        pts = self.control_points
        if len(pts) < 2:
            raise ColormapError("a colormap needs at least 2 control points")
        for t, rgb in pts:
            if not (0.0 <= t <= 1.0):
                raise ColormapError(f"control point t {t} outside [0, 1]")
            if len(rgb) != 3 or any(not (0 <= c <= 255) for c in rgb):
                raise ColormapError(f"bad rgb {rgb!r}")
        ts = [t for t, _ in pts]
        if any(a > b for a, b in zip(ts, ts[1:])):
            raise ColormapError("control point t values must be non-decreasing")
        if ts[0] != 0.0 or ts[-1] != 1.0:
            raise ColormapError("endpoints must sit at t=0 and t=1")


def _clean_points(points) -> tuple[tuple[float, RGB], ...]:
    return tuple(
        (float(t), (int(r), int(g), int(b))) for t, (r, g, b) in points
    )


def make_colormap(points) -> Colormap:
    """Normalize imported control points: sort by t, rescale t to span [0, 1]."""
    pts = sorted(_clean_points(points), key=lambda p: p[0])
    if len(pts) < 2:
        raise ColormapError("a colormap needs at least 2 control points")
    t0 = pts[0][0]
    t1 = pts[-1][0]
    if t1 > t0:
        pts = [((t - t0) / (t1 - t0), rgb) for t, rgb in pts]
    else:
        # all points at one t: spread endpoints so the map is well-formed
        pts = [(0.0, pts[0][1])] + [(1.0, rgb) for _, rgb in pts[1:]]
    pts[0] = (0.0, pts[0][1])
    pts[-1] = (1.0, pts[-1][1])
    return Colormap(tuple(pts))


def constant_colormap(rgb: RGB) -> Colormap:
    return Colormap(((0.0, tuple(rgb)), (1.0, tuple(rgb))))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def apply(cmap: Colormap, value: float, value_range: tuple[float, float]) -> RGB:
    """Map a data value to a color; total for any finite inputs.

    t = clamp((value - min) / (max - min), 0, 1); a degenerate range maps
    everything to t = 0.
    """
    lo, hi = value_range
    if hi <= lo:
        t = 0.0
    else:
        t = (value - lo) / (hi - lo)
        t = min(max(t, 0.0), 1.0)
    return apply_t(cmap, t)


def apply_t(cmap: Colormap, t: float) -> RGB:
    """Color at normalized position t in [0, 1]."""
    pts = cmap.control_points
    # rightmost point with t_i <= t brackets from the left
    left = 0
    for i in range(len(pts) - 1, -1, -1):
        if pts[i][0] <= t:
            left = i
            break
    if left == len(pts) - 1:
        return pts[left][1]
    t0, c0 = pts[left]
    t1, c1 = pts[left + 1]
    u = 0.0 if t1 <= t0 else (t - t0) / (t1 - t0)
    return tuple(
        _round_half_up(a + (b - a) * u) for a, b in zip(c0, c1)
    )


def add_point(cmap: Colormap, t: float, rgb: RGB) -> Colormap:
    """Insert a control point, keeping order; ties go after existing points."""
    if not (0.0 <= t <= 1.0):
        raise ColormapError(f"t {t} outside [0, 1]")
    pts = list(cmap.control_points)
    index = len(pts)
    for i, (ti, _) in enumerate(pts):
        if ti > t:
            index = i
            break
    pts.insert(index, (float(t), (int(rgb[0]), int(rgb[1]), int(rgb[2]))))
    return Colormap(tuple(pts))


def remove_point(cmap: Colormap, index: int) -> Colormap:
    """Remove one control point; endpoints re-pin to t=0/1 afterwards."""
    pts = list(cmap.control_points)
    if not (0 <= index < len(pts)):
        raise ColormapError(f"no control point at index {index}")
    if len(pts) <= 2:
        raise ColormapError("cannot remove: a colormap keeps at least 2 points")
    del pts[index]
    pts[0] = (0.0, pts[0][1])
    pts[-1] = (1.0, pts[-1][1])
    return Colormap(tuple(pts))


def move_point(cmap: Colormap, index: int, new_t: float) -> Colormap:
    """Move a control point to new_t; endpoints stay pinned at 0/1."""
    pts = list(cmap.control_points)
    if not (0 <= index < len(pts)):
        raise ColormapError(f"no control point at index {index}")
    if not (0.0 <= new_t <= 1.0):
        raise ColormapError(f"t {new_t} outside [0, 1]")
    if index == 0 or index == len(pts) - 1:
        return Colormap(tuple(pts))
    pts[index] = (float(new_t), pts[index][1])
    pts.sort(key=lambda p: p[0])  # Python sort is stable
    pts[0] = (0.0, pts[0][1])
    pts[-1] = (1.0, pts[-1][1])
    return Colormap(tuple(pts))


def to_json_obj(cmap: Colormap) -> dict:
    return {"points": [{"t": t, "rgb": list(rgb)} for t, rgb in cmap.control_points]}


def from_json_obj(obj: dict) -> Colormap:
    try:
        points = [(p["t"], tuple(p["rgb"])) for p in obj["points"]]
    except (KeyError, TypeError) as exc:
        raise ColormapError(f"bad colormap object: {exc}") from exc
    return make_colormap(points)


def load_colormap(path) -> Colormap:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ColormapError(f"cannot parse colormap {path}: {exc}") from exc
    return from_json_obj(obj)
