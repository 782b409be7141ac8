"""Figure rendering for experiment reports.

Every report-style command writes its delimited output first; these helpers
render companion PNGs next to the CSVs.  Figures are diagnostics only --
no pass/fail decision ever depends on them.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, out_path) -> str:
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return str(out_path)


def render_density(geometry, values, out_path, title="density"):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    if geometry.dim == 1:
        ax.plot(geometry.axis_centers(), np.asarray(values).ravel(), lw=1.5)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
    else:
        im = ax.imshow(np.asarray(values).reshape(geometry.shape).T,
                       origin="lower", extent=(0, geometry.side, 0, geometry.side))
        fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)
    return _save(fig, out_path)


def render_split(rows, out_path):
    """rows: (kind, resolution, index, relative_residual)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ref = [r for r in rows if r[0] == "reference"]
    if ref:
        ax1.hist([r[3] for r in ref], bins=24, color="#4878d0")
        ax1.set_xlabel("relative residual")
        ax1.set_ylabel("configurations")
        ax1.set_title("splitting identity at the run resolution")
    refine = sorted((r for r in rows if r[0] == "refinement"),
                    key=lambda r: r[1])
    if refine:
        ns = [r[1] for r in refine]
        vals = [r[3] for r in refine]
        ax2.loglog(ns, vals, "o-", color="#d65f5f")
        ax2.set_xlabel("grid resolution")
        ax2.set_ylabel("relative residual")
        ax2.set_title("residual under grid refinement")
    return _save(fig, out_path)


def render_partition(rows, out_path):
    """rows: (n, log_k_over_n, error_bar, mode)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ns = [r[0] for r in rows]
    vals = [abs(r[1]) for r in rows]
    errs = [r[2] for r in rows]
    ax.errorbar(ns, vals, yerr=errs, fmt="o-", capsize=3, color="#4878d0")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("N")
    ax.set_ylabel("|log K| / N")
    ax.set_title("next-order partition function")
    return _save(fig, out_path)


def render_rate(rows, predicted, out_path):
    """rows: (n, estimate, lo, hi, hits, samples)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ns = [r[0] for r in rows]
    est = [r[1] for r in rows]
    lo = [max(r[1] - r[2], 0) for r in rows]
    hi = [min(r[3], 10.0) - r[1] if np.isfinite(r[3]) else 0.0 for r in rows]
    ax.errorbar(ns, est, yerr=[lo, hi], fmt="s-", capsize=3, color="#4878d0",
                label="-(1/N) log frequency")
    ax.axhline(predicted, color="#d65f5f", ls="--",
               label=f"energy+entropy prediction {predicted:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel("rate estimate")
    ax.legend(fontsize=8)
    ax.set_title("delta-ball rate estimate")
    return _save(fig, out_path)


def render_entropy(estimate, oracle, out_path):
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.bar([0], [estimate.value], yerr=[2 * estimate.stderr], capsize=4,
           width=0.5, color="#4878d0", label="plug-in estimate")
    ax.axhline(oracle, color="#d65f5f", ls="--", label="closed-form rate")
    ax.set_xticks([])
    ax.set_ylabel("entropy per volume")
    ax.legend(fontsize=8)
    ax.set_title("specific relative entropy")
    return _save(fig, out_path)


def render_verify(rows, out_path):
    """rows: (check, value, threshold, passed)."""
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.45 * len(rows)))
    names = [r[0] for r in rows]
    ok = [bool(r[3]) for r in rows]
    ax.barh(range(len(rows)), [1] * len(rows),
            color=["#55a868" if p else "#c44e52" for p in ok])
    for i, r in enumerate(rows):
        ax.text(0.02, i, f"{r[0]}: value {r[1]:.3g} vs threshold {r[2]:.3g}",
                va="center", fontsize=8)
    ax.set_yticks([])
    ax.set_xticks([])
    ax.set_xlim(0, 1)
    ax.set_title("acceptance checks")
    return _save(fig, out_path)
