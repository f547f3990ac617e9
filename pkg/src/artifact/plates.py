"""Plates, data impressions, and the typed-slot rules.

A plate is a reusable rendering algorithm with an ordered list of typed
slots; instantiating one and filling its slots forms a data impression (one
visual layer). The slot types make illegal connections unrepresentable: a
piece only ever lands in a slot whose kind and subtype it matches, and a
mismatch is a refusal, never a crash.

Every plate has exactly one required key-data slot; everything else falls
back to a default, so an impression renders as soon as key data arrives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .assets import (
    AssetError,
    AssetLibrary,
    BUILTIN_GRAY,
    BUILTIN_SPHERE,
    BUILTIN_WHITE_LINE,
    BUILTIN_WHITE_TEXTURE,
)
from .data import Dataset

PIECE_KINDS = ("key_data", "variable", "asset", "primitive")
PRIMITIVE_SUBTYPES = ("number", "number_pair")

PLATE_GLYPHS = "glyphs"
PLATE_GLYPH_LINES = "glyph_lines"
PLATE_RIBBONS = "ribbons"
PLATE_SURFACE = "surface"


class UnknownSlotError(KeyError):
    pass


class AssignmentRefused(Exception):
    """A piece does not fit a slot; carries the human-readable reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NotRenderable(Exception):
    """The impression cannot produce geometry (no key data, or unresolvable)."""


@dataclass(frozen=True)
class Refusal:
    reason: str


@dataclass(frozen=True)
class PieceRef:
    """A draggable piece: key data, variable, visual asset, or primitive value.

    ``name`` carries the key-data/variable name or the asset id; ``value``
    carries primitive payloads (a number or a (lo, hi) pair).
    """

    kind: str
    dataset: Optional[str] = None
    name: Optional[str] = None
    value: object = None

    def __post_init__(self):
        if self.kind not in PIECE_KINDS:
            raise ValueError(f"bad piece kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "primitive":
            return f"primitive {self.value!r}"
        return f"{self.kind} {self.name!r}"


def key_data_piece(dataset: str, name: str) -> PieceRef:
    return PieceRef("key_data", dataset=dataset, name=name)


def variable_piece(dataset: str, name: str) -> PieceRef:
    return PieceRef("variable", dataset=dataset, name=name)


def asset_piece(asset_id: str) -> PieceRef:
    return PieceRef("asset", name=asset_id)


def primitive_piece(value) -> PieceRef:
    if isinstance(value, (list, tuple)):
        return PieceRef("primitive", value=(float(value[0]), float(value[1])))
    return PieceRef("primitive", value=float(value))


@dataclass(frozen=True)
class SlotSpec:
    name: str
    accepts: tuple[str, str]  # (piece kind, subtype)
    required: bool = False
    default: PieceRef | None = None

    def describe(self) -> str:
        return f"{self.accepts[0]}({self.accepts[1]})"


@dataclass(frozen=True)
class PlateSpec:
    plate_type: str
    slots: tuple[SlotSpec, ...]

    def slot(self, name: str) -> SlotSpec:
        for s in self.slots:
            if s.name == name:
                return s
        raise UnknownSlotError(f"plate {self.plate_type!r} has no slot {name!r}")

    def key_data_slot(self) -> SlotSpec:
        return next(s for s in self.slots if s.accepts[0] == "key_data")


def _glyph_style_slots() -> list[SlotSpec]:
    return [
        SlotSpec("glyph", ("asset", "glyph"), default=asset_piece(BUILTIN_SPHERE)),
        SlotSpec("color_variable", ("variable", "scalar")),
        SlotSpec("colormap", ("asset", "colormap"), default=asset_piece(BUILTIN_GRAY)),
        SlotSpec("size_variable", ("variable", "scalar")),
        SlotSpec(
            "size_range",
            ("primitive", "number_pair"),
            default=primitive_piece((0.02, 0.05)),
        ),
    ]


_REGISTRY: tuple[PlateSpec, ...] = (
    PlateSpec(
        PLATE_GLYPHS,
        tuple(
            [SlotSpec("key_data", ("key_data", "points"), required=True)]
            + _glyph_style_slots()
            + [
                SlotSpec("orientation_variable", ("variable", "vector")),
                SlotSpec(
                    "uniform_size", ("primitive", "number"), default=primitive_piece(0.03)
                ),
            ]
        ),
    ),
    PlateSpec(
        PLATE_RIBBONS,
        (
            SlotSpec("key_data", ("key_data", "lines"), required=True),
            SlotSpec(
                "line_texture",
                ("asset", "line_texture"),
                default=asset_piece(BUILTIN_WHITE_LINE),
            ),
            SlotSpec("color_variable", ("variable", "scalar")),
            SlotSpec("colormap", ("asset", "colormap"), default=asset_piece(BUILTIN_GRAY)),
            SlotSpec("width", ("primitive", "number"), default=primitive_piece(0.01)),
            SlotSpec(
                "texture_repeat", ("primitive", "number"), default=primitive_piece(1.0)
            ),
        ),
    ),
    PlateSpec(
        PLATE_SURFACE,
        (
            SlotSpec("key_data", ("key_data", "surface"), required=True),
            SlotSpec(
                "texture", ("asset", "texture"), default=asset_piece(BUILTIN_WHITE_TEXTURE)
            ),
            SlotSpec("color_variable", ("variable", "scalar")),
            SlotSpec("colormap", ("asset", "colormap"), default=asset_piece(BUILTIN_GRAY)),
            SlotSpec(
                "texture_scale", ("primitive", "number"), default=primitive_piece(1.0)
            ),
        ),
    ),
    # Lines drawn as instanced glyphs, one per line vertex, oriented along
    # the local tangent -- the plate you grab when ribbons should become
    # sculpted forms without touching the data.
    PlateSpec(
        PLATE_GLYPH_LINES,
        tuple(
            [SlotSpec("key_data", ("key_data", "lines"), required=True)]
            + _glyph_style_slots()
            + [
                SlotSpec(
                    "uniform_size", ("primitive", "number"), default=primitive_piece(0.03)
                ),
            ]
        ),
    ),
)


def plate_registry() -> list[PlateSpec]:
    """All available plates, in palette order."""
    return list(_REGISTRY)


def get_plate(plate_type: str) -> PlateSpec:
    for plate in _REGISTRY:
        if plate.plate_type == plate_type:
            return plate
    raise UnknownSlotError(f"unknown plate type {plate_type!r}")


def plate_types() -> list[str]:
    return [p.plate_type for p in _REGISTRY]


@dataclass(frozen=True)
class DataImpression:
    """One instantiated plate: a single visual layer of the composition."""

    id: str
    plate_type: str
    assignments: dict[str, PieceRef] = field(default_factory=dict)
    panel_position: tuple[float, float] = (0.0, 0.0)
    visible: bool = True
    collapsed: bool = False

    def plate(self) -> PlateSpec:
        return get_plate(self.plate_type)

    def assigned(self, slot: str) -> PieceRef | None:
        return self.assignments.get(slot)

    def key_data_ref(self) -> PieceRef | None:
        return self.assignments.get(self.plate().key_data_slot().name)


@dataclass
class PieceContext:
    """Resolution environment for validation: the dataset and asset catalog."""

    dataset: Dataset | None = None
    assets: AssetLibrary | None = None

    def dataset_named(self, name: str | None) -> Dataset | None:
        if self.dataset is not None and self.dataset.name == name:
            return self.dataset
        return None

    def asset_kind(self, asset_id: str) -> str | None:
        if self.assets is None:
            # builtins stay resolvable even without a library
            from .assets import builtin_assets

            builtin = builtin_assets().get(asset_id)
            return builtin.kind if builtin else None
        try:
            return self.assets.kind_of(asset_id)
        except AssetError:
            return None

    def variable_kind(self, dataset_name: str | None, var_name: str | None) -> str | None:
        """Kind of a variable by name, looked up across the dataset's key data."""
        ds = self.dataset_named(dataset_name)
        if ds is None or var_name is None:
            return None
        for kd in ds.key_data.values():
            var = kd.variables.get(var_name)
            if var is not None:
                return var.kind
        return None


def _check_primitive(piece: PieceRef, subtype: str) -> Refusal | None:
    value = piece.value
    if subtype == "number":
        if isinstance(value, (list, tuple)) or not isinstance(value, (int, float)):
            return Refusal(f"slot takes a number, got {value!r}")
        if not math.isfinite(value) or value <= 0.0:
            return Refusal(f"sizes and widths must be finite and positive, got {value!r}")
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return Refusal(f"slot takes a (lo, hi) pair, got {value!r}")
    lo, hi = value
    for v in (lo, hi):
        if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0.0:
            return Refusal(f"sizes and widths must be finite and positive, got {v!r}")
    if lo > hi:
        return Refusal(f"pair out of order: {lo} > {hi}")
    return None


def validate_assignment(
    imp: DataImpression, slot_name: str, piece: PieceRef, ctx: PieceContext
) -> Refusal | None:
    """None when the piece fits the slot, else a Refusal with the reason.

    Raises UnknownSlotError for a slot that does not exist on the plate
    (that is a programming error, not a refusal).
    """
    slot = imp.plate().slot(slot_name)
    want_kind, want_subtype = slot.accepts
    if piece.kind != want_kind:
        return Refusal(
            f"cannot drop a {piece.kind} piece into the {want_kind} slot {slot_name!r}"
        )

    if piece.kind == "primitive":
        return _check_primitive(piece, want_subtype)

    if piece.kind == "asset":
        kind = ctx.asset_kind(piece.name or "")
        if kind is None:
            return Refusal(f"unknown asset {piece.name!r}")
        if kind != want_subtype:
            return Refusal(
                f"slot {slot_name!r} takes a {want_subtype} asset, {piece.name!r} is a {kind}"
            )
        return None

    if piece.kind == "key_data":
        ds = ctx.dataset_named(piece.dataset)
        if ds is None:
            return Refusal(f"dataset {piece.dataset!r} is not loaded")
        kd = ds.key_data.get(piece.name or "")
        if kd is None:
            return Refusal(f"dataset has no key data {piece.name!r}")
        if kd.geometry_kind != want_subtype:
            return Refusal(
                f"slot {slot_name!r} registers {want_subtype} key data, "
                f"{piece.name!r} is {kd.geometry_kind}"
            )
        return None

    # variable piece
    kd_ref = imp.key_data_ref()
    if kd_ref is not None:
        if piece.dataset != kd_ref.dataset:
            return Refusal(
                f"variable {piece.name!r} belongs to dataset {piece.dataset!r}, "
                f"key data comes from {kd_ref.dataset!r}"
            )
        ds = ctx.dataset_named(kd_ref.dataset)
        if ds is None:
            return Refusal(f"dataset {kd_ref.dataset!r} is not loaded")
        kd = ds.key_data.get(kd_ref.name or "")
        if kd is None:
            return Refusal(f"dataset has no key data {kd_ref.name!r}")
        var = kd.variables.get(piece.name or "")
        if var is None:
            return Refusal(
                f"key data {kd_ref.name!r} carries no variable {piece.name!r}"
            )
        if var.kind != want_subtype:
            return Refusal(
                f"slot {slot_name!r} takes a {want_subtype} variable, "
                f"{piece.name!r} is {var.kind}"
            )
        return None
    # no key data yet: hold the variable as pending, but only if its kind
    # is knowable from the dataset and matches the slot
    kind = ctx.variable_kind(piece.dataset, piece.name)
    if kind is None:
        return Refusal(
            f"variable {piece.name!r} not found in dataset {piece.dataset!r}"
        )
    if kind != want_subtype:
        return Refusal(
            f"slot {slot_name!r} takes a {want_subtype} variable, {piece.name!r} is {kind}"
        )
    return None


def assign(
    imp: DataImpression, slot_name: str, piece: PieceRef, ctx: PieceContext
) -> DataImpression:
    """Place a piece in a slot, replacing any occupant.

    Assigning the key-data slot uses swap semantics (variable assignments
    that no longer resolve are detached); use swap_key_data directly when
    the caller wants the detached slot list.
    """
    slot = imp.plate().slot(slot_name)
    if slot.accepts[0] == "key_data":
        swapped, _ = swap_key_data(imp, piece, ctx)
        return swapped
    refusal = validate_assignment(imp, slot_name, piece, ctx)
    if refusal is not None:
        raise AssignmentRefused(refusal.reason)
    assignments = dict(imp.assignments)
    assignments[slot_name] = piece
    return replace(imp, assignments=assignments)


def remove_piece(imp: DataImpression, slot_name: str) -> DataImpression:
    """Clear a slot back to its default; clearing key data is allowed."""
    imp.plate().slot(slot_name)  # raises UnknownSlotError
    assignments = dict(imp.assignments)
    assignments.pop(slot_name, None)
    return replace(imp, assignments=assignments)


def swap_key_data(
    imp: DataImpression, new_kd: PieceRef, ctx: PieceContext
) -> tuple[DataImpression, list[str]]:
    """Re-register the plate's pattern to different key data.

    Variable assignments whose names resolve on the new key data (same
    kind, same dataset) are kept; the rest are detached and returned.
    Visual assets and primitives are always kept.
    """
    plate = imp.plate()
    kd_slot = plate.key_data_slot()
    refusal = validate_assignment(imp, kd_slot.name, new_kd, ctx)
    if refusal is not None:
        raise AssignmentRefused(refusal.reason)

    ds = ctx.dataset_named(new_kd.dataset)
    kd = ds.key_data[new_kd.name] if ds else None
    assignments = dict(imp.assignments)
    assignments[kd_slot.name] = new_kd
    detached: list[str] = []
    for slot in plate.slots:
        if slot.accepts[0] != "variable":
            continue
        piece = assignments.get(slot.name)
        if piece is None:
            continue
        var = kd.variables.get(piece.name or "") if kd is not None else None
        if (
            var is None
            or var.kind != slot.accepts[1]
            or piece.dataset != new_kd.dataset
        ):
            del assignments[slot.name]
            detached.append(slot.name)
    return replace(imp, assignments=assignments), detached


def effective_config(imp: DataImpression, ctx: PieceContext) -> dict[str, PieceRef | None]:
    """Resolve every slot to its assigned piece or its default.

    Raises NotRenderable when the required key-data slot is empty. Variable
    slots without an assignment resolve to None (no modulation).
    """
    plate = imp.plate()
    kd_slot = plate.key_data_slot()
    if kd_slot.name not in imp.assignments:
        raise NotRenderable(
            f"impression {imp.id!r} has no key data registered"
        )
    config: dict[str, PieceRef | None] = {}
    for slot in plate.slots:
        piece = imp.assignments.get(slot.name)
        if piece is None:
            piece = slot.default
        config[slot.name] = piece
    return config
