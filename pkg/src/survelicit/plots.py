"""Figure rendering for the report pipeline.

All figures are simple line/step plots written as SVG so reports have no
native rendering dependencies.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import families as fam

ARM_COLORS = {1: "#1f77b4", 2: "#d62728"}
FAMILY_COLORS = {
    "exponential": "#1f77b4",
    "weibull": "#ff7f0e",
    "lognormal": "#2ca02c",
    "loglogistic": "#d62728",
    "gompertz": "#9467bd",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_km(km_by_arm, path, posterior_curves=None, grid=None):
    """Step plot of the product-limit estimates, optionally overlaid with
    posterior expected survival curves per family."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for arm, km in km_by_arm.items():
        if km.times.size:
            times = np.concatenate([[0.0], km.times])
            surv = np.concatenate([[1.0], km.survival])
        else:
            times, surv = np.array([0.0, 1.0]), np.array([1.0, 1.0])
        ax.step(times, surv, where="post", color=ARM_COLORS[arm],
                label=f"KM arm {arm}", lw=1.8)
    if posterior_curves and grid is not None:
        for (family, arm), curve in posterior_curves.items():
            ax.plot(grid, curve, color=FAMILY_COLORS[family.value], lw=1.0,
                    ls="--" if arm == 2 else "-", alpha=0.8,
                    label=f"{family.value} arm {arm}")
    ax.set_xlabel("years")
    ax.set_ylabel("survival")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def plot_hazard(hazard_by_arm, path):
    """Binned empirical hazards with 95% CIs, one panel per arm."""
    n = len(hazard_by_arm)
    fig, axes = plt.subplots(1, n, figsize=(4.5 * n, 4.0), squeeze=False)
    for ax, (arm, hz) in zip(axes[0], sorted(hazard_by_arm.items())):
        mids = 0.5 * (hz.edges[:-1] + hz.edges[1:])
        defined = hz.ci_defined
        ax.errorbar(
            mids[defined], hz.hazard[defined],
            yerr=[
                hz.hazard[defined] - hz.ci_lower[defined],
                hz.ci_upper[defined] - hz.hazard[defined],
            ],
            fmt="o", ms=3, lw=1, color=ARM_COLORS[arm], capsize=2,
        )
        ax.plot(mids[~defined], hz.hazard[~defined], "x", ms=4, color="grey")
        ax.set_title(f"arm {arm}")
        ax.set_xlabel("years")
        ax.set_ylabel("events / person-year")
    _save(fig, path)


def plot_bme_trace(evidences, path):
    """Cumulative log-evidence against draw count, per family and arm."""
    arms = sorted({e.arm for e in evidences})
    fig, axes = plt.subplots(1, len(arms), figsize=(5 * len(arms), 4.0), squeeze=False)
    for ax, arm in zip(axes[0], arms):
        for e in (x for x in evidences if x.arm == arm):
            ns = [n for n, _ in e.trace]
            vals = [v for _, v in e.trace]
            ax.plot(ns, vals, marker="o", ms=2.5, lw=1,
                    color=FAMILY_COLORS[e.family.value], label=e.family.value)
        ax.set_xscale("log")
        ax.set_title(f"arm {arm}")
        ax.set_xlabel("prior draws")
        ax.set_ylabel("cumulative log evidence")
        ax.legend(fontsize=7)
    _save(fig, path)


def plot_prior_survival_bands(bands, grid, path):
    """Prior survival median and 5-95% band per family, one panel per arm.

    ``bands`` maps (family, arm) -> (median, lo, hi) arrays over ``grid``.
    """
    arms = sorted({arm for _, arm in bands})
    fig, axes = plt.subplots(1, len(arms), figsize=(5 * len(arms), 4.0), squeeze=False)
    for ax, arm in zip(axes[0], arms):
        for (family, a), (med, lo, hi) in bands.items():
            if a != arm:
                continue
            color = FAMILY_COLORS[family.value]
            ax.plot(grid, med, color=color, lw=1.2, label=family.value)
            ax.fill_between(grid, lo, hi, color=color, alpha=0.12, lw=0)
        ax.set_title(f"arm {arm}")
        ax.set_xlabel("years")
        ax.set_ylabel("prior survival")
        ax.set_ylim(0, 1.02)
        ax.legend(fontsize=7)
    _save(fig, path)
