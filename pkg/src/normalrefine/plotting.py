"""Static report figures (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .formats import normal_to_rgb  # noqa: E402


def _panel(ax, img, title, **kw):
    im = ax.imshow(img, interpolation="nearest", **kw)
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    return im


def run_figure(path, depth, refined, baseline=None, gt=None, err_refined=None,
               err_baseline=None, band=None, title=""):
    """Depth, normals and (when ground truth exists) angular-error panels in one PNG."""
    with_gt = gt is not None and err_refined is not None
    ncols = 4 if with_gt else 2
    fig, axes = plt.subplots(2 if with_gt else 1, ncols, figsize=(3.0 * ncols, 2.6 * (2 if with_gt else 1)),
                             squeeze=False)
    z = np.where(depth.mask, depth.values, np.nan)
    im = _panel(axes[0, 0], z, "depth", cmap="viridis")
    fig.colorbar(im, ax=axes[0, 0], fraction=0.046, pad=0.04)
    _panel(axes[0, 1], normal_to_rgb(refined), "refined normals")
    if with_gt:
        _panel(axes[0, 2], normal_to_rgb(gt), "ground truth")
        if baseline is not None:
            _panel(axes[0, 3], normal_to_rgb(baseline), "baseline (0 sweeps)")
        else:
            axes[0, 3].axis("off")
        vmax = max(np.nanpercentile(err_refined, 99) if np.isfinite(err_refined).any() else 1.0, 1e-3)
        im = _panel(axes[1, 0], err_refined, "refined error (deg)", cmap="magma", vmin=0, vmax=vmax)
        fig.colorbar(im, ax=axes[1, 0], fraction=0.046, pad=0.04)
        if err_baseline is not None:
            im = _panel(axes[1, 1], err_baseline, "baseline error (deg)", cmap="magma", vmin=0, vmax=vmax)
            fig.colorbar(im, ax=axes[1, 1], fraction=0.046, pad=0.04)
            gain = err_baseline - err_refined
            lim = max(np.nanmax(np.abs(gain)) if np.isfinite(gain).any() else 0.0, 1e-6)
            im = _panel(axes[1, 2], gain, "baseline - refined", cmap="coolwarm", vmin=-lim, vmax=lim)
            fig.colorbar(im, ax=axes[1, 2], fraction=0.046, pad=0.04)
        else:
            axes[1, 1].axis("off")
            axes[1, 2].axis("off")
        if band is not None:
            _panel(axes[1, 3], band.astype(float), "evaluation band", cmap="gray", vmin=0, vmax=1)
        else:
            axes[1, 3].axis("off")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
