"""Glyph meshes: OBJ load/save, normalization, and procedural primitives.

Imported glyphs are fit to the unit bounding box centered at the origin
(uniform scale, aspect preserved) and always carry unit per-vertex normals;
missing or broken normals are rebuilt per-face and area-weight averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UP_AXIS = (0.0, 0.0, 1.0)  # canonical glyph axis


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class GlyphMesh:
    vertices: np.ndarray  # (n, 3) float64
    normals: np.ndarray  # (n, 3) float64, unit
    triangles: np.ndarray  # (t, 3) int32
    canonical_axis: tuple[float, float, float] = UP_AXIS

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GlyphMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.triangles, other.triangles)
            and self.canonical_axis == other.canonical_axis
        )


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Per-vertex normals: per-face normals averaged with area weighting."""
    normals = np.zeros_like(vertices)
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    face = np.cross(b - a, c - a)  # length = 2 * area, so summing area-weights
    for k in range(3):
        np.add.at(normals, triangles[:, k], face)
    lengths = np.linalg.norm(normals, axis=1)
    ok = lengths > 1e-12
    normals[ok] /= lengths[ok][:, None]
    normals[~ok] = (0.0, 0.0, 1.0)
    return normals


def _normalize_rows(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.linalg.norm(arr, axis=1)
    out = arr.copy()
    ok = lengths > 1e-12
    out[ok] /= lengths[ok][:, None]
    return out, ok


def build_mesh(vertices, triangles, normals=None) -> GlyphMesh:
    """Validate, fit to the unit box, and attach unit normals."""
    verts = np.asarray(vertices, dtype=np.float64)
    tris = np.asarray(triangles, dtype=np.int32)
    if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] == 0:
        raise MeshError("mesh needs at least one [x,y,z] vertex")
    if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] == 0:
        raise MeshError("mesh needs at least one triangle")
    if tris.min() < 0 or tris.max() >= verts.shape[0]:
        raise MeshError("triangle index out of bounds")
    if not np.isfinite(verts).all():
        raise MeshError("non-finite vertex position")

    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    center = (lo + hi) / 2.0
    extent = float((hi - lo).max())
    scale = 1.0 / extent if extent > 0.0 else 1.0
    verts = (verts - center) * scale

    if normals is not None:
        norm = np.asarray(normals, dtype=np.float64)
        if norm.shape != verts.shape or not np.isfinite(norm).all():
            norm = vertex_normals(verts, tris)
        else:
            norm, ok = _normalize_rows(norm)
            if not ok.all():
                rebuilt = vertex_normals(verts, tris)
                norm[~ok] = rebuilt[~ok]
    else:
        norm = vertex_normals(verts, tris)

    verts.setflags(write=False)
    norm.setflags(write=False)
    tris.setflags(write=False)
    return GlyphMesh(verts, norm, tris)


def load_obj(path) -> GlyphMesh:
    """Load a triangles-only Wavefront OBJ (positions and normals)."""
    positions: list[tuple[float, float, float]] = []
    obj_normals: list[tuple[float, float, float]] = []
    faces: list[tuple[tuple[int, int | None], ...]] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                cmd = parts[0]
                if cmd == "v":
                    if len(parts) < 4:
                        raise MeshError(f"{path}:{lineno}: bad vertex line")
                    positions.append(tuple(float(p) for p in parts[1:4]))
                elif cmd == "vn":
                    if len(parts) < 4:
                        raise MeshError(f"{path}:{lineno}: bad normal line")
                    obj_normals.append(tuple(float(p) for p in parts[1:4]))
                elif cmd == "f":
                    if len(parts) != 4:
                        raise MeshError(
                            f"{path}:{lineno}: only triangular faces are supported"
                        )
                    face = []
                    for token in parts[1:]:
                        fields = token.split("/")
                        vi = int(fields[0])
                        ni = None
                        if len(fields) == 3 and fields[2]:
                            ni = int(fields[2])
                        face.append((vi, ni))
                    faces.append(tuple(face))
                # vt, o, g, s, usemtl etc. are ignored
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    if not positions or not faces:
        raise MeshError(f"{path}: no triangles found")

    def resolve(index: int, count: int, what: str) -> int:
        i = index - 1 if index > 0 else count + index
        if not (0 <= i < count):
            raise MeshError(f"{path}: {what} index {index} out of bounds")
        return i

    # OBJ positions and normals are indexed independently; split vertices
    # per unique (position, normal) pair so the mesh is flat-indexable.
    remap: dict[tuple[int, int | None], int] = {}
    verts: list[tuple[float, float, float]] = []
    norms: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    have_normals = bool(obj_normals)
    for face in faces:
        tri = []
        for vi, ni in face:
            pi = resolve(vi, len(positions), "vertex")
            nio = resolve(ni, len(obj_normals), "normal") if ni is not None else None
            key = (pi, nio)
            if key not in remap:
                remap[key] = len(verts)
                verts.append(positions[pi])
                if have_normals:
                    norms.append(
                        obj_normals[nio] if nio is not None else (0.0, 0.0, 0.0)
                    )
            tri.append(remap[key])
        tris.append(tuple(tri))

    return build_mesh(verts, tris, norms if have_normals else None)


def obj_text(mesh: GlyphMesh) -> str:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for n in mesh.normals:
        lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
    for t in mesh.triangles:
        lines.append(
            f"f {t[0] + 1}//{t[0] + 1} {t[1] + 1}//{t[1] + 1} {t[2] + 1}//{t[2] + 1}"
        )
    return "\n".join(lines) + "\n"


def save_obj(mesh: GlyphMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(obj_text(mesh))


def icosphere(subdivisions: int = 2) -> GlyphMesh:
    """Unit icosphere; subdivisions=2 gives 320 triangles."""
    phi = (1.0 + 5.0**0.5) / 2.0
    raw = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in raw]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new_faces

    points = np.array(verts)
    # sphere normals are radial; build_mesh rescales positions, so pass them in
    return build_mesh(points, faces, normals=points)


def cylinder(segments: int = 16, height: float = 1.0, radius: float = 0.5) -> GlyphMesh:
    """Closed cylinder along +Z (a squat one makes a drum)."""
    ang = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    top = height / 2.0
    ring_lo = np.stack([radius * np.cos(ang), radius * np.sin(ang), np.full(segments, -top)], axis=1)
    ring_hi = np.stack([radius * np.cos(ang), radius * np.sin(ang), np.full(segments, top)], axis=1)
    verts = np.concatenate([ring_lo, ring_hi, [[0, 0, -top]], [[0, 0, top]]])
    lo_center = 2 * segments
    hi_center = 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.append((i, j, segments + i))
        tris.append((j, segments + j, segments + i))
        tris.append((j, i, lo_center))
        tris.append((segments + i, segments + j, hi_center))
    return build_mesh(verts, tris)


def spindle(segments: int = 10, rings: int = 7, aspect: float = 5.0) -> GlyphMesh:
    """Long thin form along +Z: a lathed teardrop, aspect = length / width."""
    profile_z = np.linspace(-0.5, 0.5, rings + 2)
    # sin profile pinched to zero at both tips
    profile_r = np.sin(np.linspace(0.0, np.pi, rings + 2)) * (0.5 / aspect)
    verts = [(0.0, 0.0, float(profile_z[0]) * aspect)]
    for k in range(1, rings + 1):
        for s in range(segments):
            a = 2.0 * np.pi * s / segments
            verts.append(
                (
                    float(profile_r[k] * np.cos(a)),
                    float(profile_r[k] * np.sin(a)),
                    float(profile_z[k]) * aspect,
                )
            )
    verts.append((0.0, 0.0, float(profile_z[-1]) * aspect))
    tip_lo = 0
    tip_hi = len(verts) - 1

    def ring_vertex(k: int, s: int) -> int:
        return 1 + (k - 1) * segments + (s % segments)

    tris = []
    for s in range(segments):
        tris.append((tip_lo, ring_vertex(1, s + 1), ring_vertex(1, s)))
        tris.append((tip_hi, ring_vertex(rings, s), ring_vertex(rings, s + 1)))
    for k in range(1, rings):
        for s in range(segments):
            a = ring_vertex(k, s)
            b = ring_vertex(k, s + 1)
            c = ring_vertex(k + 1, s)
            d = ring_vertex(k + 1, s + 1)
            tris.append((a, b, c))
            tris.append((b, d, c))
    return build_mesh(verts, tris)
