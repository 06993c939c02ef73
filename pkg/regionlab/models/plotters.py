import io
import os

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.ticker import FuncFormatter

from regionlab.models.utils import uniform_bin_counts

COLORS = ["#09b542", "#008fd5", "#fc4f30", "#e5ae38", "#351238", "#810f7c", "#320f4c", "#622f9a"]


def format_num(num, pos):
    # Pos is a required parameter, but it is not used
    magnitude = 0
    labels = ["", "K", "M", "G"]
    while abs(num) >= 1e3:
        magnitude += 1
        num /= 1e3

    return f"{num:.1f}{labels[magnitude]}"


def figure_bytes(fig, fmt="svg") -> bytes:
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "regionlab"}):
        fig.savefig(buffer, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
    return buffer.getvalue()


def _annotate_empty(ax):
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)


def histogram(series, bins=30, value_range=None, density=False, title="", xlabel="inradius") -> bytes:
    """Overlaid histograms, one per named series, on uniform bins over value_range.
    A bare array is plotted as a single unnamed series."""
    if not isinstance(series, dict):
        series = {"": series}
    if bins < 1:
        raise ValueError("histogram needs at least one bin")
    series = {name: np.asarray(values, dtype=np.float64).ravel() for name, values in series.items()}
    series = {name: values[np.isfinite(values)] for name, values in series.items()}
    fig = Figure(figsize=(9, 6))
    ax = fig.add_subplot()
    samples = [values for values in series.values() if values.size]
    if not samples:
        _annotate_empty(ax)
    else:
        if value_range is None:
            joined = np.concatenate(samples)
            lo, hi = float(joined.min()), float(joined.max())
            value_range = (lo, hi) if hi > lo else (lo - 0.5, hi + 0.5)
        for i, (name, values) in enumerate(series.items()):
            if not values.size:
                continue
            counts, edges = uniform_bin_counts(values, bins, value_range)
            if density:
                counts = counts / (counts.sum() * np.diff(edges))
            ax.stairs(counts, edges, fill=True, alpha=0.4, color=COLORS[i % len(COLORS)], label=name or None)
        if any(series):
            ax.legend()
        ax.yaxis.set_major_formatter(FuncFormatter(format_num))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density" if density else "count")
    ax.set_title(title)
    return figure_bytes(fig)


def plot_boxplot(groups, title="", ylabel="unique surrounding regions") -> bytes:
    fig = Figure(figsize=(9, 6))
    ax = fig.add_subplot()
    names = [name for name, values in groups.items() if len(values)]
    if not names:
        _annotate_empty(ax)
    else:
        ax.boxplot([np.asarray(groups[name], dtype=np.float64) for name in names])
        ax.set_xticks(np.arange(1, len(names) + 1))
        ax.set_xticklabels(names)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return figure_bytes(fig)


def plot_angle_matrix(degrees, title="") -> bytes:
    fig = Figure(figsize=(7, 6))
    ax = fig.add_subplot()
    if np.size(degrees) == 0:
        _annotate_empty(ax)
    else:
        image = ax.imshow(np.ma.masked_invalid(degrees), cmap="viridis", vmin=0.0, vmax=180.0, interpolation="nearest")
        fig.colorbar(image, ax=ax, label="degrees")
    ax.set_title(title)
    return figure_bytes(fig)


class Plotter:
    """Writes report figures under save_dir"""

    def __init__(self, save_dir):
        self.save_dir = save_dir

    def save(self, figure_name, data: bytes) -> str:
        if not os.path.exists(self.save_dir):
            os.makedirs(self.save_dir)
        path = os.path.join(self.save_dir, figure_name)
        with open(path, "wb") as f:
            f.write(data)
        return path

    def plot_histograms(self, series, figure_name, bins=30, value_range=None, title="", xlabel="inradius"):
        return self.save(figure_name, histogram(series, bins, value_range, title=title, xlabel=xlabel))

    def plot_boxplot(self, groups, figure_name, title=""):
        return self.save(figure_name, plot_boxplot(groups, title))

    def plot_angle_matrix(self, degrees, figure_name, title=""):
        return self.save(figure_name, plot_angle_matrix(degrees, title))
