"""The bundled demo scene: a small synthetic ocean-basin dataset plus assets.

Everything is generated from code with fixed seeds, so the demo needs no
downloads and produces identical bytes on every machine: a seafloor
surface, six current streamlines, two concentration fields, two sampled
point sets carrying Temperature/Salinity, a handful of glyphs, colormaps,
and procedural textures, and a ready-made session state wiring them up.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import composition as comp_mod
from .assets import AssetLibrary, write_asset
from .colormaps import Colormap, make_colormap, to_json_obj
from .composition import (
    Assign,
    Composition,
    CreateImpression,
    ImportAsset,
    MoveImpression,
    SetPrimitive,
    apply_command,
    dataset_ref_for,
    save_state,
)
from .data import Dataset, load_dataset
from .mesh import cylinder, icosphere, obj_text, spindle
from .pngio import encode_png
from .plates import PieceContext, asset_piece, key_data_piece, variable_piece
from .sampling import SamplerConfig, Xorshift64Star, sample_density

DATASET_NAME = "gulf-mini"
BOUNDS_MIN = (0.0, 0.0, 0.0)
BOUNDS_MAX = (2.0, 0.8, 1.0)

POINT_COUNT = 300
SAMPLE_SEED = 0x5EED_1234_ABCD_0001


def _terrain() -> tuple[list, list, list, list]:
    """Seafloor height grid: vertices, triangles, elevation, sediment."""
    nx, nz = 21, 13
    vertices = []
    elevation = []
    sediment = []
    for iz in range(nz):
        for ix in range(nx):
            x = 2.0 * ix / (nx - 1)
            z = 1.0 * iz / (nz - 1)
            y = (
                0.16
                + 0.06 * math.sin(2.3 * x + 0.4)
                + 0.05 * math.cos(3.1 * z + 1.1)
                + 0.03 * math.sin(4.0 * x * z + 0.7)
            )
            vertices.append([x, y, z])
            elevation.append(y)
            sediment.append(0.5 + 0.5 * math.sin(5.0 * x - 3.0 * z))
    triangles = []
    for iz in range(nz - 1):
        for ix in range(nx - 1):
            a = iz * nx + ix
            b = a + 1
            c = a + nx
            d = c + 1
            triangles.append([a, b, c])
            triangles.append([b, d, c])
    return vertices, triangles, elevation, sediment


def _currents() -> tuple[list, list, list, list, list]:
    """Streamlines weaving through the basin with speed/temperature data."""
    vertices = []
    lines = []
    speed = []
    temperature = []
    flow = []
    n_lines = 6
    n_pts = 36
    for li in range(n_lines):
        z0 = 0.12 + 0.76 * li / (n_lines - 1)
        y0 = 0.48 + 0.06 * math.sin(1.7 * li)
        line = []
        for j in range(n_pts):
            s = j / (n_pts - 1)
            x = 0.06 + 1.88 * s
            z = z0 + 0.10 * math.sin(3.5 * s * math.pi + li)
            y = y0 + 0.05 * math.sin(2.0 * s * math.pi + 0.8 * li)
            line.append(len(vertices))
            vertices.append([x, y, z])
            spd = 0.4 + 0.6 * abs(math.sin(2.6 * s * math.pi + 0.5 * li))
            speed.append(spd)
            temperature.append(_temperature(x, y, z))
            dz = 0.10 * 3.5 * math.pi * math.cos(3.5 * s * math.pi + li) / 1.88
            flow.append(_unit([1.0, 0.0, dz]))
        lines.append(line)
    return vertices, lines, speed, temperature, flow


def _unit(v):
    n = math.sqrt(sum(c * c for c in v))
    return [c / n for c in v]


def _temperature(x: float, y: float, z: float) -> float:
    return 22.0 - 14.0 * y + 1.8 * math.sin(2.2 * x) + 0.9 * math.cos(3.0 * z)


def _salinity(x: float, y: float, z: float) -> float:
    return 34.0 + 1.4 * math.cos(1.9 * z + 0.5) + 0.8 * x - 1.1 * y


def _field_values(dims, fn) -> list:
    nx, ny, nz = dims
    values = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                x = BOUNDS_MAX[0] * i / (nx - 1)
                y = BOUNDS_MAX[1] * j / (ny - 1)
                z = BOUNDS_MAX[2] * k / (nz - 1)
                values.append(fn(x, y, z))
    return values


def _blob(x, y, z, cx, cy, cz, spread, amplitude) -> float:
    d2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
    return amplitude * math.exp(-d2 / spread)


def _chlorophyll(x, y, z) -> float:
    return (
        _blob(x, y, z, 0.6, 0.55, 0.35, 0.06, 1.0)
        + _blob(x, y, z, 1.1, 0.45, 0.6, 0.10, 0.6)
        + 0.02
    )


def _nitrate(x, y, z) -> float:
    return (
        _blob(x, y, z, 1.5, 0.5, 0.7, 0.05, 1.0)
        + _blob(x, y, z, 0.9, 0.6, 0.2, 0.09, 0.5)
        + 0.02
    )


def _field_entry(name, dims, fn) -> dict:
    nx, ny, nz = dims
    return {
        "name": name,
        "dims": list(dims),
        "origin": [0.0, 0.0, 0.0],
        "spacing": [
            BOUNDS_MAX[0] / (nx - 1),
            BOUNDS_MAX[1] / (ny - 1),
            BOUNDS_MAX[2] / (nz - 1),
        ],
        "values": _field_values(dims, fn),
    }


def _sampled_points(field_entry: dict, seed: int) -> tuple[list, dict]:
    """Sample density-proportional points and attach analytic variables."""
    from .data import parse_dataset

    ds = parse_dataset(
        {
            "name": "tmp",
            "bounds": {"min": list(BOUNDS_MIN), "max": list(BOUNDS_MAX)},
            "key_data": [],
            "fields": [field_entry],
        }
    )
    fld = ds.fields[field_entry["name"]]
    result = sample_density(
        fld, SamplerConfig(count=POINT_COUNT, seed=seed), interpolants=[fld]
    )
    pts = result.points.vertices
    concentration = result.points.variables[fld.name].values
    variables = {
        fld.name: {"kind": "scalar", "values": [float(v) for v in concentration]},
        "Temperature": {
            "kind": "scalar",
            "values": [float(_temperature(*p)) for p in pts],
        },
        "Salinity": {
            "kind": "scalar",
            "values": [float(_salinity(*p)) for p in pts],
        },
    }
    return [[float(c) for c in p] for p in pts], variables


def dataset_manifest() -> dict:
    terrain_v, terrain_t, elevation, sediment = _terrain()
    cur_v, cur_lines, speed, cur_temp, flow = _currents()
    chl_entry = _field_entry("Chlorophyll", (17, 11, 11), _chlorophyll)
    nit_entry = _field_entry("Nitrate", (17, 11, 11), _nitrate)
    chl_points, chl_vars = _sampled_points(chl_entry, SAMPLE_SEED)
    nit_points, nit_vars = _sampled_points(nit_entry, SAMPLE_SEED + 1)

    return {
        "name": DATASET_NAME,
        "bounds": {"min": list(BOUNDS_MIN), "max": list(BOUNDS_MAX)},
        "key_data": [
            {
                "name": "seafloor",
                "kind": "surface",
                "vertices": terrain_v,
                "triangles": terrain_t,
                "variables": {
                    "Elevation": {"kind": "scalar", "values": elevation},
                    "Sediment": {"kind": "scalar", "values": sediment},
                },
            },
            {
                "name": "currents",
                "kind": "lines",
                "vertices": cur_v,
                "lines": cur_lines,
                "variables": {
                    "Speed": {"kind": "scalar", "values": speed},
                    "Temperature": {"kind": "scalar", "values": cur_temp},
                    "Flow": {"kind": "vector", "values": flow},
                },
            },
            {
                "name": "chlorophyll-points",
                "kind": "points",
                "vertices": chl_points,
                "variables": chl_vars,
            },
            {
                "name": "nitrate-points",
                "kind": "points",
                "vertices": nit_points,
                "variables": nit_vars,
            },
        ],
        "fields": [chl_entry, nit_entry],
    }


# ---------------------------------------------------------------------------
# assets


def _demo_colormaps() -> dict[str, Colormap]:
    return {
        "ocean-blues": make_colormap(
            [(0.0, (12, 28, 84)), (0.5, (38, 94, 160)), (1.0, (168, 218, 240))]
        ),
        "sunset-heat": make_colormap(
            [(0.0, (44, 8, 66)), (0.45, (196, 64, 44)), (1.0, (255, 222, 124))]
        ),
        "terrain-browns": make_colormap(
            [(0.0, (58, 44, 30)), (0.55, (142, 110, 72)), (1.0, (228, 214, 186))]
        ),
        "moss-greens": make_colormap(
            [(0.0, (18, 52, 28)), (0.5, (110, 166, 88)), (1.0, (234, 244, 218))]
        ),
    }


def _ragged_line_texture(seed: int) -> np.ndarray:
    """White ribbon texture with torn alpha edges and a dashed core."""
    w, h = 96, 16
    rng = Xorshift64Star(seed)
    pixels = np.zeros((h, w, 4), dtype=np.uint8)
    pixels[..., 0:3] = 255
    edge = np.empty(w)
    for x in range(w):
        edge[x] = 1.5 + 2.5 * rng.next_float()
    for y in range(h):
        for x in range(w):
            border = min(y, h - 1 - y)
            alpha = 255
            if border < edge[x]:
                alpha = 0
            elif (x // 12) % 3 == 2 and border < 5:
                alpha = 0  # notched dashes along the edge
            pixels[y, x, 3] = alpha
    return pixels


def _paper_texture(seed: int) -> np.ndarray:
    w = h = 48
    rng = Xorshift64Star(seed)
    pixels = np.empty((h, w, 4), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            grain = 225 + int(30.0 * rng.next_float())
            pixels[y, x] = (grain, min(255, grain + 4), min(255, grain - 6), 255)
    return pixels


def write_demo_assets(assets_dir) -> None:
    root = Path(assets_dir)
    root.mkdir(parents=True, exist_ok=True)

    meshes = {
        "drum": cylinder(segments=14, height=0.7, radius=0.5),
        "spindle": spindle(segments=10, rings=7, aspect=5.0),
        "pebble": icosphere(1),
    }
    for asset_id, mesh in meshes.items():
        write_asset(
            root,
            asset_id,
            "glyph",
            asset_id.capitalize(),
            "mesh.obj",
            obj_text(mesh).encode(),
        )

    for asset_id, cmap in _demo_colormaps().items():
        payload = json.dumps(to_json_obj(cmap), indent=2).encode()
        write_asset(root, asset_id, "colormap", asset_id.replace("-", " ").title(), "colormap.json", payload)

    write_asset(
        root,
        "ragged-edge",
        "line_texture",
        "Ragged Edge",
        "texture.png",
        encode_png(_ragged_line_texture(0xA11CE)),
    )
    write_asset(
        root,
        "torn-dash",
        "line_texture",
        "Torn Dash",
        "texture.png",
        encode_png(_ragged_line_texture(0xB0B1E5)),
    )
    write_asset(
        root,
        "paper-grain",
        "texture",
        "Paper Grain",
        "texture.png",
        encode_png(_paper_texture(0xC0FFEE)),
    )


# ---------------------------------------------------------------------------
# state


def build_demo_composition(
    dataset: Dataset, assets: AssetLibrary, dataset_path
) -> Composition:
    """The demo session: terrain + textured ribbons + salinity glyphs."""
    ctx = PieceContext(dataset=dataset, assets=assets)
    comp = Composition(dataset_ref=dataset_ref_for(dataset_path, dataset.name))

    def run(cmd):
        nonlocal comp
        comp, events = apply_command(comp, cmd, ctx)
        for event in events:
            if isinstance(event, comp_mod.Refused):
                raise RuntimeError(f"demo command refused: {event.reason}")

    for asset_id in (
        "terrain-browns",
        "ocean-blues",
        "sunset-heat",
        "moss-greens",
        "drum",
        "spindle",
        "pebble",
        "ragged-edge",
        "torn-dash",
        "paper-grain",
    ):
        run(ImportAsset(asset_id))

    run(CreateImpression("surface", "seafloor-layer", (40.0, 60.0)))
    run(Assign("seafloor-layer", "key_data", key_data_piece(DATASET_NAME, "seafloor")))
    run(Assign("seafloor-layer", "color_variable", variable_piece(DATASET_NAME, "Elevation")))
    run(Assign("seafloor-layer", "colormap", asset_piece("terrain-browns")))
    run(Assign("seafloor-layer", "texture", asset_piece("paper-grain")))

    run(CreateImpression("ribbons", "current-ribbons", (40.0, 300.0)))
    run(Assign("current-ribbons", "key_data", key_data_piece(DATASET_NAME, "currents")))
    run(Assign("current-ribbons", "color_variable", variable_piece(DATASET_NAME, "Speed")))
    run(Assign("current-ribbons", "colormap", asset_piece("ocean-blues")))
    run(Assign("current-ribbons", "line_texture", asset_piece("ragged-edge")))
    run(SetPrimitive("current-ribbons", "width", 0.035))
    run(SetPrimitive("current-ribbons", "texture_repeat", 3.0))

    run(CreateImpression("glyphs", "chlorophyll-glyphs", (40.0, 540.0)))
    run(
        Assign(
            "chlorophyll-glyphs",
            "key_data",
            key_data_piece(DATASET_NAME, "chlorophyll-points"),
        )
    )
    run(
        Assign(
            "chlorophyll-glyphs",
            "color_variable",
            variable_piece(DATASET_NAME, "Salinity"),
        )
    )
    run(Assign("chlorophyll-glyphs", "colormap", asset_piece("sunset-heat")))
    run(Assign("chlorophyll-glyphs", "glyph", asset_piece("drum")))
    run(SetPrimitive("chlorophyll-glyphs", "uniform_size", 0.016))
    run(MoveImpression("chlorophyll-glyphs", 40.0, 560.0))

    return comp


def write_demo(out_dir) -> dict[str, Path]:
    """Materialize dataset, assets, and state under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.json"
    assets_dir = out / "assets"
    state_path = out / "state.json"

    manifest = dataset_manifest()
    with open(dataset_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
        fh.write("\n")

    write_demo_assets(assets_dir)

    dataset = load_dataset(dataset_path)
    assets = AssetLibrary.scan(assets_dir)
    comp = build_demo_composition(dataset, assets, dataset_path)
    save_state(comp, state_path)
    return {"dataset": dataset_path, "assets": assets_dir, "state": state_path}
