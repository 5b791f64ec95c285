"""Embedding exports: per-example CSV and a 2-D SVG of the Poincaré disk."""

from __future__ import annotations

import colorsys
import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

VIEWBOX = 1000
DISK_RADIUS = 450  # leaves a margin for prototype labels
_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def class_color(k: int, num_classes: int) -> str:
    if num_classes <= len(_PALETTE):
        return _PALETTE[k]
    r, g, b = colorsys.hsv_to_rgb(k / num_classes, 0.75, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def write_embedding_csv(path, Z, labels, predicted, distances) -> None:
    Z = np.atleast_2d(Z)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"z{i}" for i in range(Z.shape[1])] + ["label", "predicted", "origin_distance"])
        for z, y, yp, r in zip(Z, labels, predicted, distances):
            w.writerow([f"{v:.17g}" for v in z] + [int(y), int(yp), f"{r:.17g}"])


def read_embedding_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("z"))
    arr = np.array([[float(c) for c in r] for r in body])
    return {"z": arr[:, :d], "label": arr[:, d].astype(int),
            "predicted": arr[:, d + 1].astype(int), "origin_distance": arr[:, d + 2]}


def _to_screen(pt) -> tuple[float, float]:
    # y flipped: screen y grows downward
    c = VIEWBOX / 2
    return c + DISK_RADIUS * pt[0], c - DISK_RADIUS * pt[1]


def render_svg(Z, labels, prototypes, point_radius: float = 3.0) -> str:
    """Disk outline, ideal prototypes on the circle, and embeddings colored by class."""
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(getattr(prototypes, "points", prototypes), dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != 2 or P.shape[1] != 2:
        raise ValueError("SVG export needs two-dimensional embeddings and prototypes")
    C = P.shape[0]
    c = VIEWBOX / 2
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEWBOX} {VIEWBOX}" '
        f'width="{VIEWBOX}" height="{VIEWBOX}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<circle class="boundary" cx="{c}" cy="{c}" r="{DISK_RADIUS}" fill="none" '
        'stroke="black" stroke-width="2"/>',
        '<g class="examples">',
    ]
    for z, y in zip(Z, labels):
        x, yy = _to_screen(z)
        out.append(f'<circle cx="{x:.3f}" cy="{yy:.3f}" r="{point_radius}" '
                   f'fill="{class_color(int(y), C)}" fill-opacity="0.7" data-label="{int(y)}"/>')
    out.append("</g>")
    out.append('<g class="prototypes">')
    for k, p in enumerate(P):
        x, yy = _to_screen(p)
        lx, ly = _to_screen(p * (1 + 30 / DISK_RADIUS))
        out.append(f'<circle cx="{x:.3f}" cy="{yy:.3f}" r="8" fill="{class_color(k, C)}" '
                   f'stroke="black" stroke-width="1.5" data-label="{k}"/>')
        out.append(f'<text x="{lx:.3f}" y="{ly:.3f}" font-size="18" text-anchor="middle" '
                   f'dominant-baseline="middle">{escape(str(k))}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
