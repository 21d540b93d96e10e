"""Figures for ensemble summaries, rendered with matplotlib to files.

Output is reproducible: the Agg backend is forced, SVG ids are salted with a
fixed string and the creation date is dropped from the metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .aggregate import EnsembleSummary  # noqa: E402
from .model import SatisfactionFunction  # noqa: E402

STYLE = {
    "svg.hashsalt": "fuzzytime",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.0, 3.2),
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if path.suffix.lower() == ".svg" else {}
    if path.suffix.lower() == ".png":
        meta = {"Software": None}
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def _minutes(fn):
    return fn.grid.times() / 60.0


def distribution_figure(
    summary: EnsembleSummary,
    path,
    fit: SatisfactionFunction | None = None,
    title: str | None = None,
):
    """Median line over a shaded 25-75 % band with a dotted min/max envelope."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        t = _minutes(summary.median)
        q_lo, q_hi = summary.quantiles[0.25], summary.quantiles[0.75]
        ax.fill_between(t, q_lo.values, q_hi.values, color="tab:blue", alpha=0.25,
                        linewidth=0, label="25-75 %")
        ax.plot(t, summary.minimum.values, ":", color="0.3", linewidth=0.8, label="min/max")
        ax.plot(t, summary.maximum.values, ":", color="0.3", linewidth=0.8)
        ax.plot(t, summary.median.values, color="tab:blue", linewidth=1.5, label="median")
        if fit is not None:
            ax.plot(t, fit(summary.median.grid.times()), "--", color="tab:red",
                    linewidth=1.0, label="fit")
        ax.set_xlabel("start time [min]")
        ax.set_ylabel("satisfaction")
        ax.set_ylim(-0.02, 1.05)
        ax.set_xlim(t[0], t[-1])
        ax.set_title(title or summary.tag or "ensemble")
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def comparison_figure(robot: EnsembleSummary, person: EnsembleSummary, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for summary, colour, name in ((robot, "tab:orange", "robot"), (person, "tab:green", "person")):
            t = _minutes(summary.median)
            ax.fill_between(t, summary.quantiles[0.25].values, summary.quantiles[0.75].values,
                            color=colour, alpha=0.2, linewidth=0)
            ax.plot(t, summary.median.values, color=colour, label=name)
        ax.set_xlabel("start time [min]")
        ax.set_ylabel("satisfaction")
        ax.set_ylim(-0.02, 1.05)
        ax.set_title(title or robot.tag)
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def variance_trend_figure(
    t_specs: Sequence[float], variances: dict[str, Sequence[float]], path, title=None
):
    """Density variance of the median against the specified time, one line per group."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = [t / 60.0 for t in t_specs]
        for name, ys in variances.items():
            ax.plot(x, [v / 3600.0 for v in ys], marker="o", label=name)
        ax.set_xlabel("specified time [min]")
        ax.set_ylabel("density variance [min$^2$]")
        ax.set_yscale("log")
        ax.set_title(title or "variance of the median")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
