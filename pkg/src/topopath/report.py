"""Render barcodes and annotated representative cycles.

SVG output is emitted directly (no plotting dependency), deterministic, and
self-contained: same input, same bytes. TSV and text formats are lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .cycles import AnnotatedLoop
from .persistence import Barcode, PersistencePair

# barcode plot geometry, exposed so callers can compute expected coordinates
BAR_MARGIN_LEFT = 60.0
BAR_MARGIN_RIGHT = 20.0
BAR_MARGIN_TOP = 20.0
BAR_MARGIN_BOTTOM = 30.0
BAR_PLOT_WIDTH = 560.0
BAR_ROW_HEIGHT = 14.0

_DIM_COLORS = {0: "#4878a8", 1: "#a83838", 2: "#3a8a4d", 3: "#8a5fa8"}

CYCLE_SIZE = 440.0
CYCLE_RADIUS = 150.0
CYCLE_LABEL_RADIUS = 190.0


@dataclass(frozen=True)
class BarcodePlotSpec:
    """What to draw: dimension filter, x-range, persistence floor, highlights."""

    dims: tuple[int, ...] | None = None
    x_range: tuple[float, float] | None = None
    min_persistence: float = 0.0
    highlight: tuple[int, ...] = ()
    fmt: str = "svg"
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.fmt not in ("svg", "tsv", "text"):
            raise ValueError(f"unknown barcode format {self.fmt!r}")
        if self.min_persistence < 0:
            raise ValueError("min_persistence must be non-negative")
        if self.x_range is not None:
            lo, hi = self.x_range
            if lo < 0:
                raise ValueError("x-range lower bound must be >= 0")
            if hi <= lo:
                raise ValueError("x-range upper bound must exceed the lower bound")
            if self.threshold is not None and hi > self.threshold:
                raise ValueError("x-range upper bound exceeds the filtration threshold")


def x_position(value: float, x_range: tuple[float, float]) -> float:
    """Map a filtration value to its x pixel under the standard layout."""
    lo, hi = x_range
    return BAR_MARGIN_LEFT + (value - lo) / (hi - lo) * BAR_PLOT_WIDTH


def _select(barcode: Barcode, spec: BarcodePlotSpec) -> list[PersistencePair]:
    pairs = [
        p
        for p in barcode.pairs
        if (spec.dims is None or p.dim in spec.dims)
        and (not p.finite or p.length > spec.min_persistence)
    ]
    pairs.sort(key=lambda p: (p.dim, p.birth, p.death))
    return pairs


def render_barcode(barcode: Barcode, spec: BarcodePlotSpec) -> bytes:
    """Render the barcode in the spec's format; empty input yields axis only."""
    pairs = _select(barcode, spec)
    if spec.fmt == "tsv":
        return barcode_to_tsv(Barcode(tuple(pairs))).encode("utf-8")
    if spec.fmt == "text":
        lines = []
        for p in pairs:
            if p.finite:
                lines.append(f"dim {p.dim}: [{p.birth!r}, {p.death!r})")
            else:
                lines.append(f"dim {p.dim}: [{p.birth!r}, inf) open-ended")
        return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    return _barcode_svg(pairs, spec).encode("utf-8")


def _barcode_svg(pairs: Sequence[PersistencePair], spec: BarcodePlotSpec) -> str:
    if spec.x_range is not None:
        x_range = spec.x_range
    else:
        finite = [p.death for p in pairs if p.finite] + [p.birth for p in pairs]
        hi = spec.threshold if spec.threshold is not None else max(finite, default=1.0)
        x_range = (0.0, hi if hi > 0 else 1.0)

    height = BAR_MARGIN_TOP + max(len(pairs), 1) * BAR_ROW_HEIGHT + BAR_MARGIN_BOTTOM
    width = BAR_MARGIN_LEFT + BAR_PLOT_WIDTH + BAR_MARGIN_RIGHT
    axis_y = height - BAR_MARGIN_BOTTOM + 6.0
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<line x1="{BAR_MARGIN_LEFT:.2f}" y1="{axis_y:.2f}" '
        f'x2="{BAR_MARGIN_LEFT + BAR_PLOT_WIDTH:.2f}" y2="{axis_y:.2f}" '
        'stroke="#333333" stroke-width="1"/>',
    ]
    for value in x_range:
        x = x_position(value, x_range)
        parts.append(
            f'<line x1="{x:.2f}" y1="{axis_y - 4:.2f}" x2="{x:.2f}" '
            f'y2="{axis_y + 4:.2f}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{axis_y + 16:.2f}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{value:g}</text>'
        )
    for i, p in enumerate(pairs):
        y = BAR_MARGIN_TOP + i * BAR_ROW_HEIGHT + BAR_ROW_HEIGHT / 2
        x1 = x_position(p.birth, x_range)
        x2 = x_position(min(p.death, x_range[1]), x_range) if p.finite else x_position(x_range[1], x_range)
        color = _DIM_COLORS.get(p.dim, "#666666")
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y:.2f}" x2="{x2:.2f}" y2="{y:.2f}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        if not p.finite:
            parts.append(
                f'<path d="M {x2:.2f} {y - 4:.2f} l 6 4 l -6 4" fill="none" '
                f'stroke="{color}" stroke-width="2"/>'
            )
        if i in spec.highlight:
            rx = (x2 - x1) / 2 + 8
            parts.append(
                f'<ellipse cx="{(x1 + x2) / 2:.2f}" cy="{y:.2f}" rx="{rx:.2f}" '
                f'ry="{BAR_ROW_HEIGHT / 2:.2f}" fill="none" stroke="#222222" '
                'stroke-width="1" stroke-dasharray="3 2"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def barcode_to_tsv(barcode: Barcode) -> str:
    """Lossless export: one ``dim <TAB> birth <TAB> death`` line per bar."""
    lines = []
    for p in barcode.pairs:
        death = "inf" if not p.finite else repr(p.death)
        lines.append(f"{p.dim}\t{p.birth!r}\t{death}")
    return "\n".join(lines) + "\n" if lines else ""


def barcode_from_tsv(text: str) -> Barcode:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"barcode TSV line {lineno}: expected 3 fields (format v1)")
        dim, birth, death = fields
        pairs.append(
            PersistencePair(
                dim=int(dim),
                birth=float(birth),
                death=math.inf if death == "inf" else float(death),
            )
        )
    pairs.sort(key=lambda p: (p.dim, p.birth, p.death))
    return Barcode(pairs=tuple(pairs))


def render_cycle(loop: AnnotatedLoop) -> bytes:
    """Draw the loop as a polygon with vertex and edge labels.

    Vertices are evenly spaced on a circle in loop order, so the same input
    always produces the same bytes.
    """
    n = len(loop.vertices)
    if n < 3:
        raise ValueError(f"a loop needs at least 3 vertices, got {n}")
    cx = cy = CYCLE_SIZE / 2
    points = []
    for k in range(n):
        theta = -math.pi / 2 + 2 * math.pi * k / n
        points.append((cx + CYCLE_RADIUS * math.cos(theta),
                       cy + CYCLE_RADIUS * math.sin(theta)))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CYCLE_SIZE:.0f}" '
        f'height="{CYCLE_SIZE:.0f}" viewBox="0 0 {CYCLE_SIZE:.0f} {CYCLE_SIZE:.0f}">',
    ]
    for k, (_, _, _, label) in enumerate(loop.edges):
        x1, y1 = points[k]
        x2, y2 = points[(k + 1) % n]
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            'stroke="#555555" stroke-width="1.5"/>'
        )
        mx, my = (x1 + x2) / 2, (y1 + y2) / 2
        # nudge the label toward the center so it clears the edge
        lx = mx + (cx - mx) * 0.12
        ly = my + (cy - my) * 0.12
        parts.append(
            f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="11" text-anchor="middle" '
            f'font-family="sans-serif">{escape(label)}</text>'
        )
    for k, (_, label, _, _) in enumerate(loop.vertices):
        x, y = points[k]
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="#222222"/>')
        theta = -math.pi / 2 + 2 * math.pi * k / n
        lx = cx + CYCLE_LABEL_RADIUS * math.cos(theta)
        ly = cy + CYCLE_LABEL_RADIUS * math.sin(theta)
        parts.append(
            f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")
