"""Datasets, key data, variables, and scalar fields.

A ``Dataset`` is a named container of registered geometry ("key data":
points, lines, or surfaces with per-vertex variables) plus gridded scalar
fields used as sampling sources. Datasets are immutable after load; all
numpy arrays are frozen so they can be shared read-only across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

GEOMETRY_KINDS = ("points", "lines", "surface")
VARIABLE_KINDS = ("scalar", "vector")

DEFAULT_HISTOGRAM_BINS = 100


class DatasetError(ValueError):
    """Raised on manifest parse errors or invariant violations at load."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VariableArray:
    """Per-vertex scalar or 3-vector values carried by one key data."""

    name: str
    kind: str  # "scalar" | "vector"
    values: np.ndarray  # (n,) float64 or (n, 3) float64
    declared_range: tuple[float, float] | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VariableArray):
            return NotImplemented
        return (
            self.name == other.name
            and self.kind == other.kind
            and self.declared_range == other.declared_range
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class KeyData:
    """Registered geometry with per-vertex variables.

    ``topology`` holds polylines (tuples of vertex indices) for lines,
    triangles (index triples) for surfaces, and is empty for points.
    """

    name: str
    geometry_kind: str  # "points" | "lines" | "surface"
    vertices: np.ndarray  # (n, 3) float64
    topology: tuple[tuple[int, ...], ...] = ()
    variables: dict[str, VariableArray] = field(default_factory=dict)

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    def variable(self, name: str) -> VariableArray:
        try:
            return self.variables[name]
        except KeyError:
            raise DatasetError(
                f"key data {self.name!r} has no variable {name!r}"
            ) from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KeyData):
            return NotImplemented
        return (
            self.name == other.name
            and self.geometry_kind == other.geometry_kind
            and np.array_equal(self.vertices, other.vertices)
            and self.topology == other.topology
            and self.variables == other.variables
        )


@dataclass(frozen=True)
class ScalarField:
    """Regular grid of scalars, x-fastest ordering, used as a sampling source."""

    name: str
    dims: tuple[int, int, int]
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    values: np.ndarray  # (nx * ny * nz,) float64

    def grid(self) -> np.ndarray:
        """Values reshaped to (nz, ny, nx) so index order is [z, y, x]."""
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array(self.origin, dtype=float)
        hi = lo + np.array(self.spacing, dtype=float) * (
            np.array(self.dims, dtype=float) - 1.0
        )
        return lo, hi

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (
            self.name == other.name
            and self.dims == other.dims
            and self.origin == other.origin
            and self.spacing == other.spacing
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class Dataset:
    name: str
    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]
    key_data: dict[str, KeyData] = field(default_factory=dict)
    fields: dict[str, ScalarField] = field(default_factory=dict)

    def diagonal(self) -> float:
        lo = np.array(self.bounds_min)
        hi = np.array(self.bounds_max)
        return float(np.linalg.norm(hi - lo))

    def get_key_data(self, name: str) -> KeyData:
        try:
            return self.key_data[name]
        except KeyError:
            raise DatasetError(f"dataset has no key data {name!r}") from None

    def get_field(self, name: str) -> ScalarField:
        try:
            return self.fields[name]
        except KeyError:
            raise DatasetError(f"dataset has no field {name!r}") from None


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DatasetError(message)


def _as_float_array(values, shape_desc: str, context: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{context}: not a numeric {shape_desc}") from exc
    return arr


def _parse_variable(
    kd_name: str, var_name: str, spec: dict, vertex_count: int
) -> VariableArray:
    context = f"key data {kd_name!r}, variable {var_name!r}"
    _require(isinstance(spec, dict), f"{context}: expected an object")
    kind = spec.get("kind")
    _require(kind in VARIABLE_KINDS, f"{context}: bad kind {kind!r}")
    values = _as_float_array(spec.get("values", []), "array", context)
    if kind == "scalar":
        _require(values.ndim == 1, f"{context}: scalar values must be flat")
    else:
        _require(
            values.ndim == 2 and values.shape[1] == 3,
            f"{context}: vector values must be [x,y,z] triples",
        )
    _require(
        values.shape[0] == vertex_count,
        f"{context}: {values.shape[0]} values for {vertex_count} vertices",
    )
    bad = np.flatnonzero(~np.isfinite(values).reshape(values.shape[0], -1).all(axis=1))
    if bad.size:
        raise DatasetError(f"{context}: non-finite value at index {int(bad[0])}")
    declared = spec.get("range")
    declared_range = None
    if declared is not None:
        _require(kind == "scalar", f"{context}: range only applies to scalars")
        _require(
            isinstance(declared, (list, tuple)) and len(declared) == 2,
            f"{context}: range must be [min, max]",
        )
        lo, hi = float(declared[0]), float(declared[1])
        _require(
            math.isfinite(lo) and math.isfinite(hi) and lo <= hi,
            f"{context}: bad range ({lo}, {hi})",
        )
        declared_range = (lo, hi)
    return VariableArray(var_name, kind, _frozen(values), declared_range)


def _parse_key_data(spec: dict, bounds_min, bounds_max) -> KeyData:
    _require(isinstance(spec, dict), "key data entry: expected an object")
    name = spec.get("name")
    _require(isinstance(name, str) and name != "", "key data entry: missing name")
    kind = spec.get("kind")
    _require(
        kind in GEOMETRY_KINDS, f"key data {name!r}: bad kind {kind!r}"
    )
    vertices = _as_float_array(spec.get("vertices", []), "array", f"key data {name!r}")
    if vertices.size == 0:
        vertices = vertices.reshape(0, 3)
    _require(
        vertices.ndim == 2 and vertices.shape[1] == 3,
        f"key data {name!r}: vertices must be [x,y,z] triples",
    )
    _require(
        bool(np.isfinite(vertices).all()),
        f"key data {name!r}: non-finite vertex position",
    )
    lo = np.asarray(bounds_min, dtype=float)
    hi = np.asarray(bounds_max, dtype=float)
    if vertices.shape[0]:
        inside = (vertices >= lo).all(axis=1) & (vertices <= hi).all(axis=1)
        outside = np.flatnonzero(~inside)
        if outside.size:
            raise DatasetError(
                f"key data {name!r}: vertex {int(outside[0])} outside dataset bounds"
            )
    n = vertices.shape[0]

    topology: tuple[tuple[int, ...], ...] = ()
    if kind == "lines":
        raw = spec.get("lines")
        _require(isinstance(raw, list) and raw, f"key data {name!r}: lines key data needs 'lines'")
        polylines = []
        for li, poly in enumerate(raw):
            _require(
                isinstance(poly, list) and len(poly) >= 2,
                f"key data {name!r}: polyline {li} has fewer than 2 vertices",
            )
            idx = tuple(int(i) for i in poly)
            for i in idx:
                _require(
                    0 <= i < n,
                    f"key data {name!r}: polyline {li} index {i} out of bounds",
                )
            polylines.append(idx)
        topology = tuple(polylines)
    elif kind == "surface":
        raw = spec.get("triangles")
        _require(
            isinstance(raw, list) and raw,
            f"key data {name!r}: surface key data needs 'triangles'",
        )
        triangles = []
        for ti, tri in enumerate(raw):
            _require(
                isinstance(tri, list) and len(tri) == 3,
                f"key data {name!r}: triangle {ti} must have 3 indices",
            )
            idx = tuple(int(i) for i in tri)
            for i in idx:
                _require(
                    0 <= i < n,
                    f"key data {name!r}: triangle {ti} index {i} out of bounds",
                )
            _require(
                len(set(idx)) == 3,
                f"key data {name!r}: triangle {ti} has repeated indices",
            )
            triangles.append(idx)
        topology = tuple(triangles)

    variables: dict[str, VariableArray] = {}
    for var_name, var_spec in (spec.get("variables") or {}).items():
        variables[var_name] = _parse_variable(name, var_name, var_spec, n)

    return KeyData(name, kind, _frozen(vertices), topology, variables)


def _parse_field(spec: dict) -> ScalarField:
    _require(isinstance(spec, dict), "field entry: expected an object")
    name = spec.get("name")
    _require(isinstance(name, str) and name != "", "field entry: missing name")
    dims = spec.get("dims")
    _require(
        isinstance(dims, list) and len(dims) == 3 and all(int(d) >= 1 for d in dims),
        f"field {name!r}: dims must be three positive integers",
    )
    nx, ny, nz = (int(d) for d in dims)
    origin = spec.get("origin")
    spacing = spec.get("spacing")
    for label, triple in (("origin", origin), ("spacing", spacing)):
        _require(
            isinstance(triple, list) and len(triple) == 3,
            f"field {name!r}: {label} must be [x,y,z]",
        )
    values = _as_float_array(spec.get("values", []), "array", f"field {name!r}")
    _require(
        values.ndim == 1 and values.shape[0] == nx * ny * nz,
        f"field {name!r}: expected {nx * ny * nz} values, got {values.size}",
    )
    _require(bool(np.isfinite(values).all()), f"field {name!r}: non-finite value")
    return ScalarField(
        name,
        (nx, ny, nz),
        tuple(float(v) for v in origin),
        tuple(float(v) for v in spacing),
        _frozen(values),
    )


def parse_dataset(manifest: dict) -> Dataset:
    """Build a validated Dataset from an already-decoded manifest object."""
    _require(isinstance(manifest, dict), "manifest: expected a JSON object")
    name = manifest.get("name")
    _require(isinstance(name, str) and name != "", "manifest: missing dataset name")
    bounds = manifest.get("bounds")
    _require(
        isinstance(bounds, dict) and "min" in bounds and "max" in bounds,
        "manifest: bounds must carry min and max",
    )
    bmin = tuple(float(v) for v in bounds["min"])
    bmax = tuple(float(v) for v in bounds["max"])
    _require(
        len(bmin) == 3 and len(bmax) == 3,
        "manifest: bounds min/max must be [x,y,z]",
    )
    _require(
        all(lo <= hi for lo, hi in zip(bmin, bmax)),
        "manifest: bounds min must not exceed max",
    )

    key_data: dict[str, KeyData] = {}
    for entry in manifest.get("key_data", []):
        kd = _parse_key_data(entry, bmin, bmax)
        _require(kd.name not in key_data, f"duplicate key data name {kd.name!r}")
        key_data[kd.name] = kd

    fields: dict[str, ScalarField] = {}
    for entry in manifest.get("fields", []):
        fld = _parse_field(entry)
        _require(fld.name not in fields, f"duplicate field name {fld.name!r}")
        fields[fld.name] = fld

    return Dataset(name, bmin, bmax, key_data, fields)


def load_dataset(path) -> Dataset:
    """Load and validate a dataset manifest (JSON) from disk."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"cannot parse dataset {path}: {exc}") from exc
    return parse_dataset(manifest)


def variable_range(kd: KeyData, var: str) -> tuple[float, float]:
    """Range used for color/size normalization: declared range wins."""
    v = kd.variable(var)
    if v.kind != "scalar":
        raise DatasetError(f"variable {var!r} is not scalar")
    if v.declared_range is not None:
        return v.declared_range
    return float(v.values.min()), float(v.values.max())


def compute_histogram(
    kd: KeyData, var: str, bins: int = DEFAULT_HISTOGRAM_BINS
) -> list[int]:
    """Counts over variable_range; max values land in the last bin.

    A degenerate range (min == max) puts every value in bin 0. Counts
    always sum to the vertex count.
    """
    if bins < 1:
        raise DatasetError(f"bins must be >= 1, got {bins}")
    v = kd.variable(var)
    if v.kind != "scalar":
        raise DatasetError(f"variable {var!r} is not scalar")
    lo, hi = variable_range(kd, var)
    counts = np.zeros(bins, dtype=np.int64)
    if hi <= lo:
        counts[0] = v.values.shape[0]
        return counts.tolist()
    idx = np.floor((v.values - lo) / (hi - lo) * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    np.add.at(counts, idx, 1)
    return counts.tolist()
