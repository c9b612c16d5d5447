"""Figures from bandit-harness result files (regret CSV + run manifest)."""

__version__ = "0.1.0"

from .render import PlotSpec, load_regret_csv, render_means_timeline, render_regret  # noqa: F401
