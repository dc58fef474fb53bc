"""Minimal SVG ratio plot: u on x, ratio with CI whiskers on y, reference line at 1."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

W, H = 480, 320
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 45


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + k * step for k in range(count)]


def ratio_plot_svg(rows, title: str = "empirical / asymptotic") -> str:
    us = [r["u"] for r in rows]
    lo = [r["ratio_lo"] for r in rows]
    hi = [r["ratio_hi"] for r in rows]
    x0, x1 = min(us), max(us)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (x1 - x0)
    x0, x1 = x0 - pad, x1 + pad
    y0, y1 = min(min(lo), 1.0), max(max(hi), 1.0)
    ypad = 0.1 * (y1 - y0 or 1.0)
    y0, y1 = max(0.0, y0 - ypad), y1 + ypad

    sx = lambda x: LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT)
    sy = lambda y: H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
    ]
    for t in _ticks(x0 + pad, x1 - pad):
        out.append(f'<text x="{sx(t):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle" font-size="10">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{LEFT - 6}" y="{sy(t) + 3:.1f}" text-anchor="end" font-size="10">{t:.3g}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">u</text>')
    out.append(
        f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {H / 2:.1f})">ratio</text>'
    )
    out.append(
        f'<line x1="{LEFT}" y1="{sy(1.0):.1f}" x2="{W - RIGHT}" y2="{sy(1.0):.1f}" stroke="gray" stroke-dasharray="4 3"/>'
    )
    for r in rows:
        x = sx(r["u"])
        a, b = sy(r["ratio_lo"]), sy(r["ratio_hi"])
        out.append(f'<line x1="{x:.1f}" y1="{a:.1f}" x2="{x:.1f}" y2="{b:.1f}" stroke="steelblue"/>')
        for yy in (a, b):
            out.append(f'<line x1="{x - 4:.1f}" y1="{yy:.1f}" x2="{x + 4:.1f}" y2="{yy:.1f}" stroke="steelblue"/>')
        colour = "firebrick" if r.get("flag") else "steelblue"
        out.append(f'<circle cx="{x:.1f}" cy="{sy(r["ratio"]):.1f}" r="3.5" fill="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_ratio_plot(rows, path, title: str = "empirical / asymptotic") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ratio_plot_svg(rows, title))
    return path
