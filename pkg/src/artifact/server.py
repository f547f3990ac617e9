"""WebSocket engine endpoint: commands in, state broadcasts out.

One engine process holds the composition. Clients connect at /ws, receive
Hello (protocol version, dataset summary, plate registry, asset catalog)
followed by a full StateUpdate, and from then on every successfully applied
command -- from any client -- triggers a fresh revision-tagged StateUpdate
to all clients. Render frames are served on request from an immutable
snapshot, so drawing never blocks the command loop.
"""

from __future__ import annotations

import asyncio
import base64
import json
import logging
from dataclasses import dataclass, field

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from . import composition as comp_mod
from .assets import AssetLibrary
from .composition import (
    Assign,
    Command,
    Composition,
    CreateImpression,
    DeleteImpression,
    EditColormap,
    ImportAsset,
    MoveImpression,
    Refused,
    RemovePiece,
    SetCollapsed,
    SetPrimitive,
    SetVisibility,
    StateChanged,
    SwapKeyData,
    Warning as WarningEvent,
    apply_command,
    composition_to_json,
    piece_from_json,
)
from .data import DEFAULT_HISTOGRAM_BINS, Dataset, compute_histogram, variable_range
from .plates import PieceContext, plate_registry
from .render import Camera, build_scene, default_camera, rasterize
from .pngio import encode_png

PROTOCOL_VERSION = 1

log = logging.getLogger(__name__)


class ProtocolError(ValueError):
    pass


def dataset_summary(dataset: Dataset | None) -> dict | None:
    """Dataset shape, ranges, and histograms -- everything a design client
    needs to draw its data panel and the colormap editor."""
    if dataset is None:
        return None
    key_data = []
    for kd in dataset.key_data.values():
        variables = []
        for var in kd.variables.values():
            entry: dict = {"name": var.name, "kind": var.kind}
            if var.kind == "scalar":
                entry["range"] = list(variable_range(kd, var.name))
                entry["histogram"] = compute_histogram(
                    kd, var.name, DEFAULT_HISTOGRAM_BINS
                )
            variables.append(entry)
        key_data.append(
            {
                "name": kd.name,
                "kind": kd.geometry_kind,
                "vertex_count": kd.vertex_count,
                "variables": variables,
            }
        )
    return {
        "name": dataset.name,
        "bounds": {"min": list(dataset.bounds_min), "max": list(dataset.bounds_max)},
        "key_data": key_data,
        "fields": [
            {"name": f.name, "dims": list(f.dims)} for f in dataset.fields.values()
        ],
    }


def registry_json() -> list[dict]:
    plates = []
    for plate in plate_registry():
        slots = []
        for slot in plate.slots:
            entry: dict = {
                "name": slot.name,
                "accepts": {"kind": slot.accepts[0], "subtype": slot.accepts[1]},
                "required": slot.required,
            }
            if slot.default is not None:
                entry["default"] = comp_mod.piece_to_json(slot.default)
            slots.append(entry)
        plates.append({"plate_type": plate.plate_type, "slots": slots})
    return plates


def command_from_json(obj: dict) -> Command:
    """Decode one wire command payload; raises ProtocolError on bad shape."""
    try:
        op = obj["op"]
        if op == "create_impression":
            position = obj.get("position", [0.0, 0.0])
            return CreateImpression(
                obj["plate_type"],
                obj.get("impression_id"),
                (float(position[0]), float(position[1])),
            )
        if op == "delete_impression":
            return DeleteImpression(obj["impression_id"])
        if op == "assign":
            return Assign(obj["impression_id"], obj["slot"], piece_from_json(obj["piece"]))
        if op == "remove_piece":
            return RemovePiece(obj["impression_id"], obj["slot"])
        if op == "swap_key_data":
            return SwapKeyData(obj["impression_id"], piece_from_json(obj["piece"]))
        if op == "set_primitive":
            value = obj["value"]
            if isinstance(value, list):
                value = tuple(float(v) for v in value)
            return SetPrimitive(obj["impression_id"], obj["slot"], value)
        if op == "move_impression":
            return MoveImpression(obj["impression_id"], float(obj["x"]), float(obj["y"]))
        if op == "set_visibility":
            return SetVisibility(obj["impression_id"], bool(obj["visible"]))
        if op == "set_collapsed":
            return SetCollapsed(obj["impression_id"], bool(obj["collapsed"]))
        if op == "import_asset":
            return ImportAsset(obj["asset_id"])
        if op == "edit_colormap":
            rgb = obj.get("rgb")
            return EditColormap(
                obj["asset_id"],
                obj["edit"],
                t=obj.get("t"),
                rgb=tuple(int(c) for c in rgb) if rgb is not None else None,
                index=obj.get("index"),
            )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProtocolError(f"malformed command: {exc}") from exc
    raise ProtocolError(f"unknown command op {obj.get('op')!r}")


@dataclass
class Engine:
    """Single-writer command loop around one Composition."""

    dataset: Dataset | None = None
    assets: AssetLibrary | None = None
    composition: Composition = field(default_factory=Composition)
    command_log: list[Command] = field(default_factory=list)

    def __post_init__(self):
        # serializes mutation AND the broadcast that follows it, so every
        # client observes revisions in the same strictly increasing order
        self.lock = asyncio.Lock()

    @property
    def ctx(self) -> PieceContext:
        return PieceContext(dataset=self.dataset, assets=self.assets)

    def apply_sync(self, cmd: Command):
        """Apply a command outside the server loop (CLI, tests)."""
        new_comp, events = apply_command(self.composition, cmd, self.ctx)
        if any(isinstance(e, StateChanged) for e in events):
            self.composition = new_comp
            self.command_log.append(cmd)
        return events

    def snapshot(self) -> Composition:
        return self.composition

    def render_frame(self, camera: Camera | None, width: int, height: int) -> tuple[bytes, int]:
        """Render the current snapshot; returns (png bytes, revision)."""
        comp = self.snapshot()
        if camera is None:
            if self.dataset is None:
                raise ProtocolError("no dataset loaded; camera required")
            camera = default_camera(self.dataset)
        camera = Camera(
            camera.position,
            camera.look_at,
            camera.up,
            camera.vertical_fov,
            int(width),
            int(height),
            camera.background,
        )
        batches, _ = build_scene(comp, self.dataset, self.assets)
        image = rasterize(batches, camera)
        return encode_png(image), comp.revision


def camera_from_json(obj: dict) -> Camera:
    try:
        return Camera(
            tuple(float(v) for v in obj["position"]),
            tuple(float(v) for v in obj["look_at"]),
            tuple(float(v) for v in obj.get("up", (0.0, 1.0, 0.0))),
            float(obj.get("fov", 45.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed camera: {exc}") from exc


class SyncServer:
    """Accepts design clients and fans out state updates."""

    def __init__(self, engine: Engine, host: str = "127.0.0.1", port: int = 8765):
        self.engine = engine
        self.host = host
        self.port = port
        self.clients: set = set()
        self._server = None

    async def start(self):
        self._server = await ws_serve(self._handler, self.host, self.port)
        return self

    @property
    def bound_port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    def _hello(self) -> str:
        return json.dumps(
            {
                "type": "hello",
                "protocol_version": PROTOCOL_VERSION,
                "dataset": dataset_summary(self.engine.dataset),
                "plates": registry_json(),
                "assets": [
                    {"id": d.id, "kind": d.kind, "name": d.name}
                    for d in (self.engine.assets.catalog() if self.engine.assets else [])
                ],
            }
        )

    def _state_update(self) -> str:
        comp = self.engine.snapshot()
        return json.dumps(
            {
                "type": "state",
                "revision": comp.revision,
                "composition": composition_to_json(comp),
            }
        )

    async def _broadcast_state(self):
        message = self._state_update()
        stale = []
        for client in self.clients:
            try:
                await client.send(message)
            except ConnectionClosed:
                stale.append(client)
        for client in stale:
            self.clients.discard(client)

    async def _handler(self, websocket):
        path = getattr(getattr(websocket, "request", None), "path", "/ws")
        if path not in ("/ws", "/ws/"):
            await websocket.close(code=1008, reason="endpoint is /ws")
            return
        try:
            # handshake under the engine lock: no broadcast may interleave,
            # so the first StateUpdate is the oldest this client ever sees
            async with self.engine.lock:
                await websocket.send(self._hello())
                await websocket.send(self._state_update())
                self.clients.add(websocket)
            async for raw in websocket:
                reply = await self._handle_message(websocket, raw)
                if reply == "close":
                    break
        except ConnectionClosed:
            pass
        finally:
            self.clients.discard(websocket)

    async def _handle_message(self, websocket, raw) -> str | None:
        try:
            msg = json.loads(raw)
            if not isinstance(msg, dict):
                raise ProtocolError("message must be a JSON object")
        except json.JSONDecodeError as exc:
            await websocket.send(
                json.dumps(
                    {"type": "refused", "command_id": None, "reason": f"parse error: {exc}"}
                )
            )
            return None

        version = msg.get("protocol_version")
        if version != PROTOCOL_VERSION:
            await websocket.send(
                json.dumps(
                    {
                        "type": "refused",
                        "command_id": msg.get("command_id"),
                        "reason": f"protocol_version {version!r} not supported",
                    }
                )
            )
            await websocket.close(code=1002, reason="protocol version mismatch")
            return "close"

        msg_type = msg.get("type")
        command_id = msg.get("command_id")
        if msg_type == "command":
            try:
                cmd = command_from_json(msg.get("command") or {})
            except ProtocolError as exc:
                await websocket.send(
                    json.dumps(
                        {"type": "refused", "command_id": command_id, "reason": str(exc)}
                    )
                )
                return None
            async with self.engine.lock:
                events = self.engine.apply_sync(cmd)
                if any(isinstance(e, StateChanged) for e in events):
                    await self._broadcast_state()
            for event in events:
                if isinstance(event, Refused):
                    await websocket.send(
                        json.dumps(
                            {
                                "type": "refused",
                                "command_id": command_id,
                                "reason": event.reason,
                            }
                        )
                    )
                elif isinstance(event, WarningEvent):
                    await websocket.send(
                        json.dumps({"type": "warning", "message": event.message})
                    )
            return None

        if msg_type == "request_render":
            try:
                camera = (
                    camera_from_json(msg["camera"])
                    if msg.get("camera") is not None
                    else None
                )
                width = int(msg.get("width", 320))
                height = int(msg.get("height", 240))
                if width < 1 or height < 1:
                    raise ProtocolError("zero-size render request")
                png, revision = await asyncio.to_thread(
                    self.engine.render_frame, camera, width, height
                )
            except ProtocolError as exc:
                await websocket.send(
                    json.dumps(
                        {"type": "refused", "command_id": command_id, "reason": str(exc)}
                    )
                )
                return None
            await websocket.send(
                json.dumps(
                    {
                        "type": "render_frame",
                        "revision": revision,
                        "width": width,
                        "height": height,
                        "png": base64.b64encode(png).decode("ascii"),
                    }
                )
            )
            return None

        await websocket.send(
            json.dumps(
                {
                    "type": "refused",
                    "command_id": command_id,
                    "reason": f"unknown message type {msg_type!r}",
                }
            )
        )
        return None


async def run_server(engine: Engine, host: str, port: int):
    """Serve until cancelled."""
    server = SyncServer(engine, host, port)
    await server.start()
    log.info("listening on ws://%s:%d/ws", host, server.bound_port)
    try:
        await asyncio.Future()
    finally:
        await server.close()
