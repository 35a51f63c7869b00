"""Pictures: a dependency-free SVG path renderer and a few matplotlib report figures."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .harmonic import HarmonicField, _raster
from .lattice import Domain, Rect, Torus, Vertex

CELL = 6


def _bounds(d: Domain | None, vertices: Sequence[Vertex]):
    if isinstance(d, Rect):
        return d.lo.re, d.lo.im, d.hi.re, d.hi.im
    if isinstance(d, Torus):
        return 0, 0, d.n - 1, d.n - 1
    xs = [v.re for v in vertices]
    ys = [v.im for v in vertices]
    return min(xs), min(ys), max(xs), max(ys)


def _runs(vertices: Sequence[Vertex]) -> list[list[Vertex]]:
    """Split a path wherever consecutive vertices are not unit-adjacent (torus wraps)."""
    runs = [[vertices[0]]]
    for u, v in zip(vertices, vertices[1:]):
        if abs(u.re - v.re) + abs(u.im - v.im) != 1:
            runs.append([])
        runs[-1].append(v)
    return runs


def trajectory_svg(
    vertices: Sequence[Vertex],
    domain: Domain | None = None,
    target: Vertex | None = None,
    field: HarmonicField | None = None,
    title: str | None = None,
    cell: int = CELL,
) -> str:
    """SVG of a lattice path, optionally over a grayscale heatmap of ``field``."""
    vertices = [Vertex(*v) for v in vertices]
    x0, y0, x1, y1 = _bounds(domain, vertices + ([Vertex(*target)] if target is not None else []))
    width = (x1 - x0 + 1) * cell
    height = (y1 - y0 + 1) * cell

    def px(v: Vertex) -> tuple[float, float]:
        return (v.re - x0 + 0.5) * cell, (y1 - v.im + 0.5) * cell

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>')
    if field is not None:
        grid = _raster(field)
        gray = np.clip(np.rint(255 * grid), 0, 255).astype(int)
        out.append('<g shape-rendering="crispEdges">')
        for r, row in enumerate(gray):
            for c, g in enumerate(row):
                if g:
                    out.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" fill="rgb({g},{g},{g})"/>')
        out.append("</g>")
    for run in _runs(vertices):
        if len(run) < 2:
            continue
        pts = " ".join(f"{x:g},{y:g}" for x, y in map(px, run))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="{cell / 2:g}" stroke-linejoin="round"/>')
    sx, sy = px(vertices[0])
    out.append(f'<circle cx="{sx:g}" cy="{sy:g}" r="{cell * 0.8:g}" fill="royalblue"/>')
    if target is not None:
        tx, ty = px(Vertex(*target))
        out.append(f'<circle cx="{tx:g}" cy="{ty:g}" r="{cell * 0.8:g}" fill="crimson"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(text)
    return path


# matplotlib figures for experiment reports


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def scaling_figure(series: dict[str, Sequence[tuple[float, float]]], fits: dict[str, tuple[float, float]], path: str | Path) -> Path:
    """Log-log plot of ``(r, value)`` series with their fitted lines."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    for (name, pts), marker in zip(series.items(), "os^v"):
        r = np.array([p[0] for p in pts], dtype=float)
        v = np.array([p[1] for p in pts], dtype=float)
        slope, intercept = fits[name]
        ax.loglog(r, v, marker, label=f"{name} (slope {slope:.3f})")
        ax.loglog(r, np.exp(intercept) * r**slope, "-", lw=0.8, color="0.4")
    ax.set_xlabel("r")
    ax.set_ylabel("escape probability")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_figure(cases: Sequence[dict], path: str | Path) -> Path:
    """Grid of sweep outcomes: straight (dark) versus deviating (light) per target ``(a, b)``."""
    plt = _pyplot()
    a_vals = sorted({c["a"] for c in cases})
    b_vals = sorted({c["b"] for c in cases})
    grid = np.full((len(b_vals), len(a_vals)), np.nan)
    for c in cases:
        grid[b_vals.index(c["b"]), a_vals.index(c["a"])] = 1.0 if c["straight"] else 0.0
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.imshow(grid, origin="lower", cmap="Greys", vmin=-0.2, vmax=1.0, interpolation="nearest",
              extent=(a_vals[0] - 0.5, a_vals[-1] + 0.5, b_vals[0] - 0.5, b_vals[-1] + 0.5))
    ax.set_xlabel("a = Re w")
    ax.set_ylabel("b = Im w")
    ax.set_title("dark: straight up to t = 2a", fontsize=9)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def trajectory_figure(vertices: Sequence[Vertex], n: int, path: str | Path) -> Path:
    """The torus path as a matplotlib figure, unwrapped runs drawn separately."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4, 4))
    for run in _runs([Vertex(*v) for v in vertices]):
        ax.plot([v.re for v in run], [v.im for v in run], "-k", lw=1)
    ax.set_xlim(-0.5, n - 0.5)
    ax.set_ylim(-0.5, n - 0.5)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
