"""Render regret curves and environment-mean timelines.

Input is the harness's published file formats only:

* ``regret.csv`` with header ``t,policy,mean_regret,q25,q75``;
* ``manifest.json`` whose ``environment`` block carries ``family``,
  ``num_arms``, ``breakpoints``, ``means`` and ``scales``.

Rendering is deterministic: fixed figure geometry, fixed color cycle,
no clock- or machine-dependent styling, so the same inputs always
produce the same plot data layer.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotSpec", "load_regret_csv", "render_regret", "render_means_timeline"]

CSV_HEADER = ["t", "policy", "mean_regret", "q25", "q75"]
COLOR_CYCLE = matplotlib.colormaps["tab10"].colors
FIGSIZE = (8.0, 5.0)
BAND_ALPHA = 0.25


@dataclass
class PlotSpec:
    """What to draw: input CSV, policy subset, labels, output path."""

    csv_path: str
    out_path: str
    policies: Optional[Sequence[str]] = None
    xlabel: str = "time step"
    ylabel: str = "cumulative regret"
    title: str = ""
    log_x: bool = False
    manifest_path: Optional[str] = None
    extra_csv_paths: Sequence[str] = field(default_factory=tuple)


def load_regret_csv(path: str) -> dict[str, dict[str, np.ndarray]]:
    """Parse a harness regret CSV into per-policy column arrays."""
    per_policy: dict[str, dict[str, list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            t, policy, mean, q25, q75 = row
            bucket = per_policy.setdefault(
                policy, {"t": [], "mean_regret": [], "q25": [], "q75": []}
            )
            bucket["t"].append(float(t))
            bucket["mean_regret"].append(float(mean))
            bucket["q25"].append(float(q25))
            bucket["q75"].append(float(q75))
    return {
        policy: {key: np.asarray(vals) for key, vals in cols.items()}
        for policy, cols in per_policy.items()
    }


def render_regret(spec: PlotSpec):
    """Draw mean-regret curves with interquartile bands; save and return the figure."""
    data: dict[str, dict[str, np.ndarray]] = {}
    for path in (spec.csv_path, *spec.extra_csv_paths):
        for policy, cols in load_regret_csv(path).items():
            data[policy] = cols

    wanted = list(spec.policies) if spec.policies else list(data)
    missing = [name for name in wanted if name not in data]
    if missing:
        raise ValueError(
            f"policies {missing} not in CSV; available: {sorted(data)}"
        )

    fig, ax = plt.subplots(figsize=FIGSIZE)
    for i, name in enumerate(wanted):
        cols = data[name]
        color = COLOR_CYCLE[i % len(COLOR_CYCLE)]
        ax.plot(cols["t"], cols["mean_regret"], label=name, color=color, linewidth=1.8)
        ax.fill_between(
            cols["t"], cols["q25"], cols["q75"], color=color, alpha=BAND_ALPHA,
            linewidth=0,
        )
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="upper left")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    return fig


def _load_environment(manifest_path: str) -> dict:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if "environment" not in manifest:
        raise ValueError(f"manifest {manifest_path} has no environment block")
    env = manifest["environment"]
    for key in ("num_arms", "breakpoints", "means"):
        if key not in env:
            raise ValueError(f"manifest environment block lacks {key!r}")
    return manifest


def render_means_timeline(manifest_path: str, out_path: str, title: str = ""):
    """Step plot of each arm's mean over time with breakpoints marked.

    Gaussian environments whose scale varies across phases get a
    per-phase sigma annotation along the top of the axes.
    """
    manifest = _load_environment(manifest_path)
    env = manifest["environment"]
    horizon = int(manifest.get("horizon", env["breakpoints"][-1]))
    starts = [int(s) for s in env["breakpoints"]]
    means = env["means"]
    num_arms = int(env["num_arms"])
    edges = starts + [horizon + 1]

    fig, ax = plt.subplots(figsize=FIGSIZE)
    for arm in range(num_arms):
        xs: list[float] = []
        ys: list[float] = []
        for phase, (lo, hi) in enumerate(zip(edges, edges[1:])):
            xs.extend([lo, hi])
            ys.extend([means[phase][arm], means[phase][arm]])
        ax.plot(
            xs,
            ys,
            label=f"arm {arm}",
            color=COLOR_CYCLE[arm % len(COLOR_CYCLE)],
            linewidth=1.8,
        )
    for start in starts[1:]:
        ax.axvline(start, color="gray", linestyle="--", linewidth=1.0, alpha=0.7)

    scales = env.get("scales")
    if scales and env.get("family") == "gaussian":
        phase_scales = [row[0] if isinstance(row, list) else row for row in scales]
        top = ax.get_ylim()[1]
        for (lo, hi), sigma in zip(zip(edges, edges[1:]), phase_scales):
            ax.annotate(
                f"sigma={sigma:g}",
                xy=((lo + hi) / 2.0, top),
                xytext=(0, 4),
                textcoords="offset points",
                ha="center",
                fontsize=8,
            )
    ax.set_xlabel("time step")
    ax.set_ylabel("arm mean")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    return fig
