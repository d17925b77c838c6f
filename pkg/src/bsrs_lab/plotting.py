"""Figure rendering for sweep reports."""

from __future__ import annotations

from contextlib import contextmanager

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.fonttype": "none",
    # fixed ids so reruns write identical files
    "svg.hashsalt": "bsrs-lab",
}


@contextmanager
def figure_style():
    with plt.rc_context(RC):
        yield


def save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def plot_steps_vs_eta(summary, eta_range, path, title=None):
    """Mean steps to convergence vs eta with a +/- 1 std band.

    Only etas where every run converged are drawn on the curve; etas with
    partial convergence get hollow markers. Dashed red lines mark the
    admissible range endpoints.
    """
    ok = [row for row in summary if row.all_converged]
    with figure_style():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if ok:
            eta = np.array([r.eta for r in ok])
            mean = np.array([r.mean_steps for r in ok])
            std = np.array([r.std_steps for r in ok])
            ax.plot(eta, mean, marker="o", ms=3, color="C0", label="mean steps")
            ax.fill_between(eta, mean - std, mean + std, color="C0", alpha=0.25, lw=0)
        for x in eta_range:
            ax.axvline(x, color="red", ls="--", lw=1)
        partial = [row for row in summary if not row.all_converged and row.converged > 0]
        if partial:
            ax.plot([r.eta for r in partial], [r.mean_steps for r in partial], ls="none", marker="o", ms=4,
                    mfc="none", color="C1", label="some runs failed (mean of converged)")
        failed = [row.eta for row in summary if row.converged == 0]
        if failed:
            ax.plot([], [], " ", label=f"{len(failed)} eta value(s) with no converged run")
        lo = min([r.eta for r in summary] + [eta_range[0]])
        hi = max([r.eta for r in summary] + [eta_range[1]])
        pad = 0.05 * (hi - lo or 1.0)
        ax.set_xlim(max(lo, -1.0) - pad, hi + pad)
        ax.set_xlabel(r"shape scale $\eta$")
        ax.set_ylabel("steps to convergence")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=8)
        save_svg(fig, path)


def plot_learning_curves(curves, path):
    """``curves`` maps eta -> (env steps, mean return)."""
    with figure_style():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for i, (eta, (x, y)) in enumerate(sorted(curves.items())):
            ax.plot(x, y, color=f"C{i % 10}", label=rf"$\eta$ = {eta:g}")
        ax.set_xlabel("environment step")
        ax.set_ylabel("mean discounted return")
        ax.legend(loc="lower right", fontsize=8)
        save_svg(fig, path)
