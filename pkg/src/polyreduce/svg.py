"""Dependency-free SVG plots: heat maps of grid fields and line plots."""
from __future__ import annotations

import numpy as np

W, H, PAD = 480, 360, 40


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _colour(u: float) -> str:
    # blue → white → red
    u = min(1.0, max(0.0, u))
    if u < 0.5:
        s = u / 0.5
        r, g, b = int(255 * s), int(255 * s), 255
    else:
        s = (u - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - s)), int(255 * (1 - s))
    return f"#{r:02x}{g:02x}{b:02x}"


def _frame(title: str, xlabel: str, ylabel: str, body: list[str]) -> str:
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>',
            f'<text x="{W / 2}" y="{H - 6}" text-anchor="middle" font-size="11" font-family="sans-serif">{xlabel}</text>',
            f'<text x="12" y="{H / 2}" text-anchor="middle" font-size="11" font-family="sans-serif" '
            f'transform="rotate(-90 12 {H / 2})">{ylabel}</text>']
    return "\n".join(head + body + ["</svg>"]) + "\n"


def heatmap(values: np.ndarray, xs: np.ndarray, ys: np.ndarray, title: str = "", xlabel: str = "",
            ylabel: str = "", max_cells: int = 80) -> str:
    """values[i, j] at (xs[i], ys[j]); x along the horizontal axis."""
    V = np.asarray(values, dtype=float)
    si = max(1, int(np.ceil(V.shape[0] / max_cells)))
    sj = max(1, int(np.ceil(V.shape[1] / max_cells)))
    V = V[::si, ::sj]
    lo, hi = float(np.min(V)), float(np.max(V))
    span = hi - lo if hi > lo else 1.0
    ni, nj = V.shape
    cw, ch = (W - 2 * PAD) / ni, (H - 2 * PAD) / nj
    body = []
    for i in range(ni):
        for j in range(nj):
            x = PAD + i * cw
            y = H - PAD - (j + 1) * ch
            body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" '
                        f'fill="{_colour((V[i, j] - lo) / span)}"/>')
    body.append(f'<text x="{W - PAD}" y="32" text-anchor="end" font-size="10" font-family="sans-serif">'
                f'min {_fmt(lo)}  max {_fmt(hi)}</text>')
    body.append(f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10" font-family="sans-serif">{_fmt(xs[0])}</text>')
    body.append(f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end" font-size="10" '
                f'font-family="sans-serif">{_fmt(xs[-1])}</text>')
    return _frame(title, xlabel, ylabel, body)


def lineplot(series: list[tuple[str, np.ndarray, np.ndarray]], title: str = "", xlabel: str = "",
             ylabel: str = "") -> str:
    colours = ["#1f4e9c", "#c0392b", "#27864a", "#7d3c98"]
    allx = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ally = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    px = lambda x: PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)
    py = lambda y: H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)
    body = [f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#888"/>']
    for n, (label, xs, ys) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        col = colours[n % len(colours)]
        body.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        body.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 + 14 * n}" text-anchor="end" font-size="10" '
                    f'font-family="sans-serif" fill="{col}">{label}</text>')
    for v, anchor, x in ((x0, "start", PAD), (x1, "end", W - PAD)):
        body.append(f'<text x="{x}" y="{H - PAD + 14}" text-anchor="{anchor}" font-size="10" '
                    f'font-family="sans-serif">{_fmt(v)}</text>')
    body.append(f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10" font-family="sans-serif">{_fmt(y0)}</text>')
    body.append(f'<text x="{PAD - 4}" y="{PAD + 8}" text-anchor="end" font-size="10" font-family="sans-serif">{_fmt(y1)}</text>')
    return _frame(title, xlabel, ylabel, body)
