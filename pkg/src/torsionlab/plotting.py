"""Figures for reports: page dimension grids and residual histograms (Agg backend)."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .spectral import SpectralPage, pq_to_pr  # noqa: E402


def page_grid(page: SpectralPage) -> tuple[np.ndarray, list[int], list[int]]:
    """Dimensions of ``E_k^{p,r}`` as an array indexed ``[r, p]`` (rows: complementary degree)."""
    ps = list(range(page.p_range[0], page.p_range[1] + 1))
    rs = sorted({pq_to_pr(p, q)[1] for (p, q) in page.entries}) or [0]
    rs = list(range(rs[0], rs[-1] + 1))
    grid = np.zeros((len(rs), len(ps)), dtype=int)
    for (p, q), e in page.entries.items():
        _, r = pq_to_pr(p, q)
        grid[rs.index(r), ps.index(p)] = e.dim
    return grid, ps, rs


def plot_pages(pages: Sequence[SpectralPage], path: str | Path) -> Path:
    n = len(pages)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False)
    for ax, pg in zip(axes[0], pages):
        grid, ps, rs = page_grid(pg)
        ax.imshow(grid, origin="lower", cmap="Blues", vmin=0, vmax=max(1, grid.max()))
        for (i, j), v in np.ndenumerate(grid):
            if v:
                ax.text(j, i, str(v), ha="center", va="center", fontsize=9)
        ax.set_xticks(range(len(ps)), ps)
        ax.set_yticks(range(len(rs)), rs)
        ax.set_xlabel("p")
        ax.set_ylabel("r")
        ax.set_title(f"E_{pg.k}")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=100)
    plt.close(fig)
    return out


def plot_residuals(residuals: Mapping[str, Sequence[float]], path: str | Path,
                   tolerances: Mapping[str, float] | None = None) -> Path:
    """One histogram of ``log10 |residual|`` per check, with the threshold marked."""
    names = sorted(residuals)
    n = max(1, len(names))
    cols = min(3, n)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.6 * cols, 2.8 * rows), squeeze=False)
    for ax in axes.flat[len(names):]:
        ax.axis("off")
    for ax, name in zip(axes.flat, names):
        vals = np.log10(np.maximum(np.abs(np.asarray(residuals[name], dtype=float)), 1e-18))
        ax.hist(vals, bins=20, color="0.4")
        if tolerances and name in tolerances and tolerances[name] > 0:
            ax.axvline(np.log10(tolerances[name]), color="r", lw=1)
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("log10 |residual|", fontsize=8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=100)
    plt.close(fig)
    return out
