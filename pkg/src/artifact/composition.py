"""Session state: the impressions, the palette, and the command loop.

All mutation goes through ``apply_command``, a pure function from
(composition, command) to (new composition, events). A failed command
leaves the state untouched and reports a Refused event -- never a partial
application -- so replaying a command log always reproduces the same state.
Save/load round-trips the whole session, panel layout included.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import colormaps
from .assets import AssetError, AssetLibrary
from .colormaps import Colormap, ColormapError
from .plates import (
    AssignmentRefused,
    DataImpression,
    PieceContext,
    PieceRef,
    UnknownSlotError,
    assign,
    get_plate,
    plate_types,
    remove_piece,
    swap_key_data,
)

SCHEMA_VERSION = 1


class StateFileError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRef:
    path: str
    sha256: str
    name: str


@dataclass(frozen=True)
class Composition:
    impressions: dict[str, DataImpression] = field(default_factory=dict)
    palette: tuple[str, ...] = ()
    colormap_edits: dict[str, Colormap] = field(default_factory=dict)
    dataset_ref: Optional[DatasetRef] = None
    revision: int = 0
    next_id: int = 1

    def impression(self, imp_id: str) -> DataImpression:
        return self.impressions[imp_id]

    def resolve_colormap(self, assets: AssetLibrary | None, asset_id: str) -> Colormap:
        """Session edit if present, else the library payload."""
        edited = self.colormap_edits.get(asset_id)
        if edited is not None:
            return edited
        if assets is None:
            raise AssetError(f"no asset library to resolve {asset_id!r}")
        payload = assets.resolve(asset_id).payload
        if not isinstance(payload, Colormap):
            raise AssetError(f"asset {asset_id!r} is not a colormap")
        return payload


# ---------------------------------------------------------------------------
# commands


@dataclass(frozen=True)
class CreateImpression:
    plate_type: str
    impression_id: Optional[str] = None
    position: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class DeleteImpression:
    impression_id: str


@dataclass(frozen=True)
class Assign:
    impression_id: str
    slot: str
    piece: PieceRef


@dataclass(frozen=True)
class RemovePiece:
    impression_id: str
    slot: str


@dataclass(frozen=True)
class SwapKeyData:
    impression_id: str
    piece: PieceRef


@dataclass(frozen=True)
class SetPrimitive:
    impression_id: str
    slot: str
    value: object


@dataclass(frozen=True)
class MoveImpression:
    impression_id: str
    x: float
    y: float


@dataclass(frozen=True)
class SetVisibility:
    impression_id: str
    visible: bool


@dataclass(frozen=True)
class SetCollapsed:
    impression_id: str
    collapsed: bool


@dataclass(frozen=True)
class ImportAsset:
    asset_id: str


@dataclass(frozen=True)
class EditColormap:
    asset_id: str
    op: str  # "add_point" | "remove_point" | "move_point"
    t: Optional[float] = None
    rgb: Optional[tuple[int, int, int]] = None
    index: Optional[int] = None


Command = (
    CreateImpression
    | DeleteImpression
    | Assign
    | RemovePiece
    | SwapKeyData
    | SetPrimitive
    | MoveImpression
    | SetVisibility
    | SetCollapsed
    | ImportAsset
    | EditColormap
)


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class StateChanged:
    revision: int


@dataclass(frozen=True)
class Refused:
    reason: str


@dataclass(frozen=True)
class Warning:
    message: str


Event = StateChanged | Refused | Warning


def _refused(comp: Composition, reason: str) -> tuple[Composition, list[Event]]:
    return comp, [Refused(reason)]


def _committed(
    comp: Composition, warnings: list[Warning] | None = None
) -> tuple[Composition, list[Event]]:
    bumped = replace(comp, revision=comp.revision + 1)
    events: list[Event] = list(warnings or [])
    events.append(StateChanged(bumped.revision))
    return bumped, events


def _with_impression(comp: Composition, imp: DataImpression) -> Composition:
    impressions = dict(comp.impressions)
    impressions[imp.id] = imp
    return replace(comp, impressions=impressions)


def apply_command(
    comp: Composition, cmd: Command, ctx: PieceContext
) -> tuple[Composition, list[Event]]:
    """Apply one command; on any validation failure the state is unchanged."""
    if isinstance(cmd, CreateImpression):
        if cmd.plate_type not in plate_types():
            return _refused(comp, f"unknown plate type {cmd.plate_type!r}")
        imp_id = cmd.impression_id
        next_id = comp.next_id
        if imp_id is None:
            imp_id = f"imp-{next_id}"
            next_id += 1
        if imp_id in comp.impressions:
            return _refused(comp, f"impression id {imp_id!r} already exists")
        imp = DataImpression(
            imp_id, cmd.plate_type, {}, (float(cmd.position[0]), float(cmd.position[1]))
        )
        return _committed(replace(_with_impression(comp, imp), next_id=next_id))

    if isinstance(cmd, ImportAsset):
        if ctx.asset_kind(cmd.asset_id) is None:
            return _refused(comp, f"unknown asset id {cmd.asset_id!r}")
        if ctx.assets is not None:
            try:
                ctx.assets.import_asset(cmd.asset_id)
            except AssetError as exc:
                return _refused(comp, str(exc))
        if cmd.asset_id in comp.palette:
            # idempotent: the palette keeps one entry per asset
            return _committed(comp)
        return _committed(replace(comp, palette=comp.palette + (cmd.asset_id,)))

    if isinstance(cmd, EditColormap):
        if ctx.asset_kind(cmd.asset_id) != "colormap":
            return _refused(comp, f"{cmd.asset_id!r} is not a colormap asset")
        try:
            current = comp.resolve_colormap(ctx.assets, cmd.asset_id)
        except AssetError as exc:
            return _refused(comp, str(exc))
        try:
            if cmd.op == "add_point":
                edited = colormaps.add_point(current, cmd.t, tuple(cmd.rgb))
            elif cmd.op == "remove_point":
                edited = colormaps.remove_point(current, cmd.index)
            elif cmd.op == "move_point":
                edited = colormaps.move_point(current, cmd.index, cmd.t)
            else:
                return _refused(comp, f"unknown colormap edit {cmd.op!r}")
        except (ColormapError, TypeError) as exc:
            return _refused(comp, f"colormap edit refused: {exc}")
        edits = dict(comp.colormap_edits)
        edits[cmd.asset_id] = edited
        return _committed(replace(comp, colormap_edits=edits))

    # everything below addresses an existing impression
    imp = comp.impressions.get(getattr(cmd, "impression_id", ""))
    if imp is None:
        return _refused(comp, f"unknown impression {getattr(cmd, 'impression_id', '')!r}")

    if isinstance(cmd, DeleteImpression):
        impressions = dict(comp.impressions)
        del impressions[imp.id]
        return _committed(replace(comp, impressions=impressions))

    if isinstance(cmd, MoveImpression):
        moved = replace(imp, panel_position=(float(cmd.x), float(cmd.y)))
        return _committed(_with_impression(comp, moved))

    if isinstance(cmd, SetVisibility):
        return _committed(_with_impression(comp, replace(imp, visible=bool(cmd.visible))))

    if isinstance(cmd, SetCollapsed):
        return _committed(
            _with_impression(comp, replace(imp, collapsed=bool(cmd.collapsed)))
        )

    if isinstance(cmd, (Assign, SetPrimitive, SwapKeyData)):
        try:
            if isinstance(cmd, SwapKeyData):
                updated, detached = swap_key_data(imp, cmd.piece, ctx)
            else:
                piece = (
                    cmd.piece
                    if isinstance(cmd, Assign)
                    else PieceRef("primitive", value=_normalize_primitive(cmd.value))
                )
                slot = imp.plate().slot(cmd.slot)
                if slot.accepts[0] == "key_data":
                    updated, detached = swap_key_data(imp, piece, ctx)
                else:
                    updated, detached = assign(imp, cmd.slot, piece, ctx), []
        except AssignmentRefused as exc:
            return _refused(comp, exc.reason)
        except UnknownSlotError as exc:
            return _refused(comp, str(exc))
        warnings = [
            Warning(f"detached {name!r}: variable not on the new key data")
            for name in detached
        ]
        return _committed(_with_impression(comp, updated), warnings)

    if isinstance(cmd, RemovePiece):
        try:
            updated = remove_piece(imp, cmd.slot)
        except UnknownSlotError as exc:
            return _refused(comp, str(exc))
        return _committed(_with_impression(comp, updated))

    return _refused(comp, f"unknown command {type(cmd).__name__}")


def _normalize_primitive(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return float(value) if isinstance(value, (int, float)) else value


# ---------------------------------------------------------------------------
# wire/file serialization


def piece_to_json(piece: PieceRef) -> dict:
    obj: dict = {"kind": piece.kind}
    if piece.dataset is not None:
        obj["dataset"] = piece.dataset
    if piece.name is not None:
        obj["name"] = piece.name
    if piece.value is not None:
        obj["value"] = list(piece.value) if isinstance(piece.value, tuple) else piece.value
    return obj


def piece_from_json(obj: dict) -> PieceRef:
    value = obj.get("value")
    if isinstance(value, list):
        value = tuple(float(v) for v in value)
    elif isinstance(value, (int, float)):
        value = float(value)
    return PieceRef(
        kind=obj.get("kind", ""),
        dataset=obj.get("dataset"),
        name=obj.get("name"),
        value=value,
    )


def _impression_to_json(imp: DataImpression) -> dict:
    return {
        "id": imp.id,
        "plate_type": imp.plate_type,
        "assignments": {
            slot: piece_to_json(piece) for slot, piece in imp.assignments.items()
        },
        "panel_position": list(imp.panel_position),
        "visible": imp.visible,
        "collapsed": imp.collapsed,
    }


def _impression_from_json(obj: dict) -> DataImpression:
    get_plate(obj["plate_type"])  # raises on unknown plate
    return DataImpression(
        id=obj["id"],
        plate_type=obj["plate_type"],
        assignments={
            slot: piece_from_json(p) for slot, p in obj.get("assignments", {}).items()
        },
        panel_position=tuple(float(v) for v in obj.get("panel_position", (0.0, 0.0))),
        visible=bool(obj.get("visible", True)),
        collapsed=bool(obj.get("collapsed", False)),
    )


def composition_to_json(comp: Composition) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "revision": comp.revision,
        "next_id": comp.next_id,
        "dataset_ref": (
            {
                "path": comp.dataset_ref.path,
                "sha256": comp.dataset_ref.sha256,
                "name": comp.dataset_ref.name,
            }
            if comp.dataset_ref
            else None
        ),
        "palette": list(comp.palette),
        "colormap_edits": {
            asset_id: colormaps.to_json_obj(cmap)
            for asset_id, cmap in comp.colormap_edits.items()
        },
        "impressions": [_impression_to_json(i) for i in comp.impressions.values()],
    }


def composition_from_json(obj: dict) -> Composition:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise StateFileError(
            f"state schema version {version!r} not supported (expected {SCHEMA_VERSION})"
        )
    ref = obj.get("dataset_ref")
    dataset_ref = (
        DatasetRef(ref["path"], ref["sha256"], ref.get("name", "")) if ref else None
    )
    impressions: dict[str, DataImpression] = {}
    for entry in obj.get("impressions", []):
        imp = _impression_from_json(entry)
        if imp.id in impressions:
            raise StateFileError(f"duplicate impression id {imp.id!r}")
        impressions[imp.id] = imp
    edits = {
        asset_id: colormaps.from_json_obj(o)
        for asset_id, o in obj.get("colormap_edits", {}).items()
    }
    return Composition(
        impressions=impressions,
        palette=tuple(obj.get("palette", [])),
        colormap_edits=edits,
        dataset_ref=dataset_ref,
        revision=int(obj.get("revision", 0)),
        next_id=int(obj.get("next_id", 1)),
    )


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_ref_for(path, dataset_name: str) -> DatasetRef:
    return DatasetRef(str(path), file_sha256(path), dataset_name)


def save_state(comp: Composition, path) -> None:
    payload = json.dumps(composition_to_json(comp), indent=2)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def load_state(path) -> tuple[Composition, list[str]]:
    """Load a saved session. The second element lists non-fatal warnings
    (e.g. the referenced dataset moved or changed); the state itself stays
    intact and impressions simply stop being renderable until the dataset
    is available again.
    """
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise StateFileError(f"cannot read state {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StateFileError(f"cannot parse state {path}: {exc}") from exc
    comp = composition_from_json(obj)
    warnings = []
    if comp.dataset_ref is not None:
        ds_path = _resolve_dataset_path(Path(path), comp.dataset_ref.path)
        if ds_path is None:
            warnings.append(
                f"dataset missing: {comp.dataset_ref.path} not found; "
                "impressions are not renderable"
            )
        else:
            digest = file_sha256(ds_path)
            if digest != comp.dataset_ref.sha256:
                warnings.append(
                    f"dataset changed: {ds_path} content hash differs from the session"
                )
    return comp, warnings


def _resolve_dataset_path(state_path: Path, dataset_path: str) -> Path | None:
    candidate = Path(dataset_path)
    if candidate.is_file():
        return candidate
    sibling = state_path.parent / dataset_path
    if sibling.is_file():
        return sibling
    return None
