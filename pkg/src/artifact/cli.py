"""Command line entry points: serve, render, validate, report, demo.

Exit codes: 0 on success, 1 when validation fails or inputs are broken,
2 for usage errors (argparse's default).
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

from .assets import AssetError, AssetLibrary, builtin_assets
from .composition import Composition, StateFileError, load_state
from .data import DatasetError, load_dataset
from .demo import write_demo
from .pngio import encode_png
from .render import Camera, build_scene, default_camera, rasterize
from .server import Engine, run_server


def _load_inputs(dataset_path, assets_dir):
    dataset = load_dataset(dataset_path) if dataset_path else None
    assets = AssetLibrary.scan(assets_dir) if assets_dir else None
    if assets is not None:
        for warning in assets.scan_warnings:
            print(f"warning: {warning}", file=sys.stderr)
    return dataset, assets


def _load_state_file(path) -> Composition:
    comp, warnings = load_state(path)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return comp


def _parse_camera(spec: str | None, width: int, height: int, dataset) -> Camera:
    if spec is None:
        if dataset is None:
            raise DatasetError("no dataset available for the default camera")
        base = default_camera(dataset)
        return Camera(
            base.position, base.look_at, base.up, base.vertical_fov, width, height
        )
    parts = [float(p) for p in spec.split(",")]
    if len(parts) != 10:
        raise ValueError(
            "camera spec needs 10 numbers: px,py,pz,lx,ly,lz,ux,uy,uz,fov"
        )
    return Camera(
        tuple(parts[0:3]), tuple(parts[3:6]), tuple(parts[6:9]), parts[9], width, height
    )


def cmd_serve(args) -> int:
    try:
        dataset, assets = _load_inputs(args.dataset, args.assets)
        comp = _load_state_file(args.state) if args.state else Composition()
    except (DatasetError, AssetError, StateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    engine = Engine(dataset=dataset, assets=assets, composition=comp)
    # re-import palette entries so lazily loaded payloads resolve
    if assets is not None:
        for asset_id in comp.palette:
            try:
                assets.import_asset(asset_id)
            except AssetError as exc:
                print(f"warning: {exc}", file=sys.stderr)
    try:
        asyncio.run(run_server(engine, args.host, args.port))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_render(args) -> int:
    try:
        dataset, assets = _load_inputs(args.dataset, args.assets)
        comp = _load_state_file(args.state)
        camera = _parse_camera(args.camera, args.width, args.height, dataset)
    except (DatasetError, AssetError, StateFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    missing = [
        asset_id
        for asset_id in comp.palette
        if assets is None or _missing_asset(assets, asset_id)
    ]
    if missing:
        print(
            f"error: unresolvable asset ids: {', '.join(sorted(missing))}",
            file=sys.stderr,
        )
        return 1

    batches, warnings = build_scene(comp, dataset, assets)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    threads = int(os.environ.get("ARTIFACT_RENDER_THREADS", "1"))
    image = rasterize(batches, camera, threads=threads)
    Path(args.out).write_bytes(encode_png(image))
    print(f"wrote {args.out} ({camera.width}x{camera.height}, revision {comp.revision})")
    return 0


def _missing_asset(assets: AssetLibrary, asset_id: str) -> bool:
    try:
        assets.resolve(asset_id)
        return False
    except AssetError:
        return True


def cmd_validate(args) -> int:
    problems: list[str] = []
    if args.dataset:
        try:
            dataset = load_dataset(args.dataset)
            print(
                f"dataset {dataset.name!r}: {len(dataset.key_data)} key data, "
                f"{len(dataset.fields)} fields"
            )
        except DatasetError as exc:
            problems.append(str(exc))
    if args.asset:
        try:
            lib = AssetLibrary.scan(args.asset)
            problems.extend(lib.scan_warnings)
            for entry in lib.catalog():
                if entry.path is None:
                    continue
                try:
                    lib.resolve(entry.id)
                except AssetError as exc:
                    problems.append(str(exc))
            print(f"asset library: {len(lib.catalog())} entries")
        except AssetError as exc:
            problems.append(str(exc))
    if args.state:
        try:
            comp, warnings = load_state(args.state)
            problems.extend(warnings)
            known = set(comp.palette) | set(builtin_assets())
            for imp in comp.impressions.values():
                for slot, piece in imp.assignments.items():
                    if piece.kind == "asset" and piece.name not in known:
                        problems.append(
                            f"impression {imp.id!r} slot {slot!r} references "
                            f"unknown asset id {piece.name!r}"
                        )
            print(
                f"state: {len(comp.impressions)} impressions at revision {comp.revision}"
            )
        except StateFileError as exc:
            problems.append(str(exc))
    for problem in problems:
        print(f"violation: {problem}", file=sys.stderr)
    return 1 if problems else 0


def cmd_report(args) -> int:
    from .report import write_report

    try:
        dataset, assets = _load_inputs(args.dataset, args.assets)
        comp = _load_state_file(args.state)
    except (DatasetError, AssetError, StateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    written = write_report(comp, dataset, assets, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_demo(args) -> int:
    paths = write_demo(args.out)
    for label, path in paths.items():
        print(f"{label}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Compose, render, and serve layered 3D data visualizations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the live engine endpoint")
    p.add_argument("--dataset", required=True, help="dataset manifest (JSON)")
    p.add_argument("--assets", required=True, help="asset library directory")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--state", help="session state to preload")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("render", help="render a session state to a PNG")
    p.add_argument("--state", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--assets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--camera", help="px,py,pz,lx,ly,lz,ux,uy,uz,fov")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="check dataset/state/asset files")
    p.add_argument("--dataset")
    p.add_argument("--state")
    p.add_argument("--asset", help="asset library directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="write a CSV summary plus colormap figures")
    p.add_argument("--state", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--assets", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("demo", help="write the bundled demo scene")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate" and not (args.dataset or args.state or args.asset):
        parser.error("validate needs at least one of --dataset/--state/--asset")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
