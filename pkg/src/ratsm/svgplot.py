"""Self-contained SVG rendering of log-log MSE-versus-n comparisons.

Hand-rolled so the output bytes are a pure function of the inputs: one solid
polyline per method through the per-cell medians, one dashed line per fitted
rate, slopes annotated in the legend.  No external assets, no timestamps.
"""

from __future__ import annotations

import math

from .bench import RateFit
from .errors import InputError

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 40, 56
COLORS = {"RAT": "#1f77b4", "SM": "#d62728"}
FALLBACK_COLORS = ("#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _LogAxes:
    def __init__(self, xs, ys):
        self.x0, self.x1 = math.log10(min(xs)), math.log10(max(xs))
        lo, hi = math.log10(min(ys)), math.log10(max(ys))
        pad = 0.05 * max(hi - lo, 1e-9)
        self.y0, self.y1 = lo - pad, hi + pad

    def x(self, v: float) -> float:
        t = (math.log10(v) - self.x0) / max(self.x1 - self.x0, 1e-12)
        return MARGIN_L + t * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, v: float) -> float:
        t = (math.log10(v) - self.y0) / max(self.y1 - self.y0, 1e-12)
        return HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)


def _polyline(points, color: str, dashed: bool) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} '
            f'points="{pts}"/>')


def render_svg(medians: dict[str, list[tuple[int, float]]],
               fits: dict[str, RateFit] | None = None,
               title: str = "") -> str:
    """Render per-method (n, median MSE) curves and fitted rate lines."""
    methods = sorted(medians)
    all_pts = [(n, v) for pts in medians.values() for n, v in pts if v > 0]
    if len({n for n, _ in all_pts}) < 2:
        raise InputError("need at least 2 cells to plot")
    axes = _LogAxes([n for n, _ in all_pts], [v for _, v in all_pts])

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#999" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{title}</text>')
    # x ticks at the sampled n values
    for n in sorted({n for n, _ in all_pts}):
        px = axes.x(n)
        parts.append(f'<line x1="{_fmt(px)}" y1="{HEIGHT - MARGIN_B}" x2="{_fmt(px)}" '
                     f'y2="{HEIGHT - MARGIN_B + 5}" stroke="#333"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN_B + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{n}</text>')
    parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13">source sample size n (log)</text>')
    parts.append(f'<text x="18" y="{HEIGHT // 2}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" transform="rotate(-90 18 {HEIGHT // 2})">median MSE (log)</text>')

    legend_y = MARGIN_T + 16
    fallback = iter(FALLBACK_COLORS)
    for method in methods:
        pts = [(n, v) for n, v in medians[method] if v > 0]
        color = COLORS.get(method) or next(fallback)
        parts.append(_polyline([(axes.x(n), axes.y(v)) for n, v in pts], color, dashed=False))
        label = method
        if fits and method in fits:
            fit = fits[method]
            ns = [n for n, _ in pts]
            fit_vals = [(n, math.exp(fit.intercept + fit.slope * math.log(n))) for n in ns]
            parts.append(_polyline([(axes.x(n), axes.y(v)) for n, v in fit_vals],
                                   color, dashed=True))
            label += f"  slope {fit.slope:+.3f}"
        parts.append(f'<text x="{WIDTH - MARGIN_R - 8}" y="{legend_y}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="12" fill="{color}">{label}</text>')
        legend_y += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg_plot(medians: dict[str, list[tuple[int, float]]],
                  fits: dict[str, RateFit] | None, path: str, title: str = "") -> None:
    """Write the rendered SVG to ``path`` (UTF-8, LF)."""
    svg = render_svg(medians, fits, title)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
