"""Offline session reports: a delimited summary plus colormap/histogram figures.

Writes composition.csv (one row per slot of every impression) and, for each
impression with a scalar color variable, a figure of the colormap ramp laid
over that variable's histogram -- the editor view, rendered to a file.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import colormaps
from .assets import AssetLibrary
from .composition import Composition
from .data import DEFAULT_HISTOGRAM_BINS, Dataset, compute_histogram, variable_range
from .plates import PieceContext, PieceRef, effective_config


def _piece_summary(piece: PieceRef | None) -> str:
    if piece is None:
        return ""
    if piece.kind == "primitive":
        return f"primitive:{piece.value}"
    if piece.kind == "asset":
        return f"asset:{piece.name}"
    return f"{piece.kind}:{piece.dataset}/{piece.name}"


def write_composition_csv(comp: Composition, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "impression",
                "plate_type",
                "visible",
                "collapsed",
                "panel_x",
                "panel_y",
                "slot",
                "assigned",
                "piece",
            ]
        )
        for imp in comp.impressions.values():
            for slot in imp.plate().slots:
                assigned = slot.name in imp.assignments
                piece = imp.assignments.get(slot.name, slot.default)
                writer.writerow(
                    [
                        imp.id,
                        imp.plate_type,
                        imp.visible,
                        imp.collapsed,
                        imp.panel_position[0],
                        imp.panel_position[1],
                        slot.name,
                        assigned,
                        _piece_summary(piece),
                    ]
                )


def _ramp_image(cmap: colormaps.Colormap, width: int = 256) -> np.ndarray:
    ramp = np.empty((1, width, 3), dtype=np.uint8)
    for x in range(width):
        ramp[0, x] = colormaps.apply_t(cmap, x / (width - 1))
    return ramp


def write_colormap_figure(
    cmap: colormaps.Colormap,
    histogram: list[int],
    value_range: tuple[float, float],
    title: str,
    path,
) -> None:
    fig, (ax_ramp, ax_hist) = plt.subplots(
        2, 1, figsize=(7, 3), height_ratios=[1, 3], sharex=True
    )
    lo, hi = value_range
    span = hi - lo if hi > lo else 1.0
    ax_ramp.imshow(
        _ramp_image(cmap),
        extent=(lo, lo + span, 0, 1),
        aspect="auto",
        interpolation="nearest",
    )
    ax_ramp.set_yticks([])
    ax_ramp.set_title(title)
    for t, rgb in cmap.control_points:
        ax_ramp.axvline(lo + t * span, color="black", linewidth=0.6, alpha=0.7)

    edges = np.linspace(lo, lo + span, len(histogram) + 1)
    ax_hist.bar(
        edges[:-1],
        histogram,
        width=np.diff(edges),
        align="edge",
        color="#5a7d9a",
        edgecolor="none",
    )
    ax_hist.set_ylabel("count")
    ax_hist.set_xlabel("value")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_report(
    comp: Composition,
    dataset: Dataset | None,
    assets: AssetLibrary | None,
    out_dir,
) -> list[Path]:
    """Write the CSV and one figure per colormapped impression; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out / "composition.csv"
    write_composition_csv(comp, csv_path)
    written.append(csv_path)

    if dataset is None:
        return written
    ctx = PieceContext(dataset=dataset, assets=assets)
    for imp in comp.impressions.values():
        try:
            config = effective_config(imp, ctx)
        except Exception:
            continue
        color_piece = config.get("color_variable")
        cmap_piece = config.get("colormap")
        kd_piece = config.get("key_data")
        if color_piece is None or cmap_piece is None or kd_piece is None:
            continue
        kd = dataset.key_data.get(kd_piece.name or "")
        if kd is None or color_piece.name not in kd.variables:
            continue
        cmap = comp.resolve_colormap(assets, cmap_piece.name)
        histogram = compute_histogram(kd, color_piece.name, DEFAULT_HISTOGRAM_BINS)
        rng = variable_range(kd, color_piece.name)
        fig_path = out / f"{imp.id}-colormap.png"
        write_colormap_figure(
            cmap,
            histogram,
            rng,
            f"{imp.id}: {color_piece.name} via {cmap_piece.name}",
            fig_path,
        )
        written.append(fig_path)
    return written
