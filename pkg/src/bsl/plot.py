"""Minimal self-contained SVG line/scatter plots for report rows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 960, 600
MARGIN = 60
FONT = 'font-family="sans-serif" font-size="12"'
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass
class PlotSpec:
    x: str
    y: list[str]
    logx: bool = False
    logy: bool = False
    title: str = ""
    markers: bool = True
    lines: bool = True
    series_labels: list[str] = field(default_factory=list)


def _numeric_column(rows: list[dict], col: str) -> list[float]:
    out = []
    for i, row in enumerate(rows):
        if col not in row:
            raise ValueError(f"column {col!r} not present")
        v = row[col]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"column {col!r} is not numeric (row {i}: {v!r})")
        out.append(float(v))
    return out


class _Axis:
    def __init__(self, lo: float, hi: float, log: bool, pix_lo: float, pix_hi: float, name: str):
        if log:
            if lo <= 0:
                raise ValueError(f"log axis for {name!r} needs positive values")
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.04 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.log = log
        self.pix_lo, self.pix_hi = pix_lo, pix_hi

    def __call__(self, v: float) -> float:
        t = math.log10(v) if self.log else v
        return self.pix_lo + (t - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)

    def ticks(self) -> list[float]:
        if self.log:
            a, b = math.ceil(self.lo), math.floor(self.hi)
            step = max(1, math.ceil((b - a + 1) / 10))
            if b < a:
                return [10.0 ** (0.5 * (self.lo + self.hi))]
            return [10.0**k for k in range(a, b + 1, step)]
        span = self.hi - self.lo
        raw = span / 8
        mag = 10.0 ** math.floor(math.log10(raw))
        step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
        k0 = math.ceil(self.lo / step)
        ticks = []
        k = k0
        while k * step <= self.hi + 1e-12 * span:
            ticks.append(k * step)
            k += 1
        return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_plot(rows: list[dict], spec: PlotSpec) -> str:
    """Render the selected columns as an SVG document string."""
    if not rows:
        raise ValueError("no rows to plot")
    if not spec.y:
        raise ValueError("no y columns selected")
    xs = _numeric_column(rows, spec.x)
    ys = {c: _numeric_column(rows, c) for c in spec.y}
    pts = {}
    for c, col in ys.items():
        pts[c] = sorted(
            (x, y)
            for x, y in zip(xs, col)
            if math.isfinite(x) and math.isfinite(y) and (x > 0 or not spec.logx) and (y > 0 or not spec.logy)
        )
    allx = [x for s in pts.values() for x, _ in s]
    ally = [y for s in pts.values() for _, y in s]
    if not allx:
        raise ValueError("no plottable points in the selection")
    ax = _Axis(min(allx), max(allx), spec.logx, MARGIN, WIDTH - MARGIN, spec.x)
    ay = _Axis(min(ally), max(ally), spec.logy, HEIGHT - MARGIN, MARGIN, spec.y[0])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for t in ax.ticks():
        px = _fmt(ax(t))
        out.append(f'<line x1="{px}" y1="{HEIGHT - MARGIN}" x2="{px}" y2="{HEIGHT - MARGIN + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle" {FONT}>{t:.4g}</text>')
    for t in ay.ticks():
        py = _fmt(ay(t))
        out.append(f'<line x1="{MARGIN - 5}" y1="{py}" x2="{MARGIN}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 8}" y="{py}" text-anchor="end" dominant-baseline="middle" {FONT}>{t:.4g}</text>')
    xlabel = escape(spec.x + (" (log)" if spec.logx else ""))
    ylabel = escape(", ".join(spec.y) + (" (log)" if spec.logy else ""))
    out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 15}" text-anchor="middle" {FONT}>{xlabel}</text>')
    out.append(
        f'<text x="15" y="{HEIGHT // 2}" text-anchor="middle" transform="rotate(-90 15 {HEIGHT // 2})" {FONT}>{ylabel}</text>'
    )
    if spec.title:
        out.append(f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" {FONT}>{escape(spec.title)}</text>')

    labels = spec.series_labels or spec.y
    for i, c in enumerate(spec.y):
        color = PALETTE[i % len(PALETTE)]
        coords = [(ax(x), ay(y)) for x, y in pts[c]]
        if spec.lines and len(coords) > 1:
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if spec.markers:
            for px, py in coords:
                out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{color}"/>')
        ly = MARGIN + 16 + 18 * i
        lx = WIDTH - MARGIN - 180
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}" dominant-baseline="middle" {FONT}>{escape(labels[i])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
