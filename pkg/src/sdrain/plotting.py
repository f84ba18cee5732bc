"""Report figures (PNG files, headless)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_case_panel(case, path) -> Path:
    """Clean / rainy / derained / shrinkage map for one synthetic case."""
    fig, axes = plt.subplots(1, 4, figsize=(10, 2.9))
    s = case.scores
    panels = [
        ("clean", case.clean.luma),
        (f"rainy  {s['psnr_rainy']:.2f} dB / {s['ssim_rainy']:.3f}", case.rainy.luma),
        (f"derained  {s['psnr_derained']:.2f} dB / {s['ssim_derained']:.3f}",
         case.derained.luma),
        (f"shrinkage map (eps {case.eps * 255:.1f}/255)", case.shrinkage),
    ]
    for ax, (title, img) in zip(axes, panels):
        ax.imshow(img, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(title, fontsize=8)
        ax.axis("off")
    fig.suptitle(case.label, fontsize=10)
    return _save(fig, path)


def plot_scores(cases, path) -> Path:
    """Grouped bars of PSNR and SSIM, rainy vs derained, per case."""
    labels = [c.label for c in cases]
    x = np.arange(len(cases))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.4))
    for ax, metric, unit in ((ax1, "psnr", "dB"), (ax2, "ssim", "")):
        before = [c.scores[f"{metric}_rainy"] for c in cases]
        after = [c.scores[f"{metric}_derained"] for c in cases]
        ax.bar(x - 0.2, before, 0.4, label="rainy", color="0.6")
        ax.bar(x + 0.2, after, 0.4, label="derained", color="tab:blue")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel(f"{metric.upper()} {unit}".strip())
        lo = min(before + after)
        ax.set_ylim(lo - 0.1 * abs(lo), None)
    ax1.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def plot_correlation(C: np.ndarray, th_c: float, path) -> Path:
    """Correlation matrix image and the histogram of per-atom maxima."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    im = ax1.imshow(C, cmap="RdBu_r", vmin=-1, vmax=1, interpolation="nearest")
    ax1.set_xlabel("rain atom")
    ax1.set_ylabel("non-rain atom")
    fig.colorbar(im, ax=ax1, fraction=0.046)
    best = C.max(axis=1)
    ax2.hist(best, bins=40, range=(-1, 1), color="0.4")
    ax2.axvline(th_c, color="tab:red", ls="--", lw=1)
    ax2.set_xlabel("max correlation with any rain atom")
    ax2.set_ylabel("non-rain atoms")
    ax2.set_title(f"{int((best >= th_c).sum())} of {len(best)} at or above {th_c}",
                  fontsize=9)
    return _save(fig, path)


def plot_atoms(atoms: np.ndarray, m: int, path, cols: int = 16, limit: int = 256) -> Path:
    """Tile the first `limit` atoms as m x m images."""
    k = min(atoms.shape[1], limit)
    rows = int(np.ceil(k / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(cols * 0.5, rows * 0.5))
    for j, ax in enumerate(np.atleast_1d(axes).ravel()):
        ax.axis("off")
        if j < k:
            ax.imshow(atoms[:, j].reshape(m, m, order="F"), cmap="gray",
                      interpolation="nearest")
    return _save(fig, path)


def plot_eval(rows, path) -> Path:
    """Bars of PSNR and SSIM for (name, psnr, ssim) rows."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    names = [r[0] for r in rows]
    ax1.bar(names, [r[1] for r in rows], color="tab:blue")
    ax1.set_ylabel("PSNR dB")
    ax2.bar(names, [r[2] for r in rows], color="tab:orange")
    ax2.set_ylabel("SSIM")
    for ax in (ax1, ax2):
        ax.tick_params(axis="x", labelrotation=30, labelsize=8)
    return _save(fig, path)
