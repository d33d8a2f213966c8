"""Semi-log SVG charts of experiment records."""

import logging
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ErrorRecord, records_frame  # noqa: E402

logger = logging.getLogger(__name__)

# x column, series column and axis labels for each experiment family.
_LAYOUT = {
    "error-vs-M": ("M", "Mc", "degree of freedom for fine approximation $M$"),
    "error-vs-k": ("k", "Mc", "iteration number $k$"),
    "error-vs-Mc": ("Mc", "k", r"degree of freedom in coarse approximation $\tilde{M}$"),
    "single": ("k", "M", "iteration number $k$"),
}
_SERIES_LABEL = {"Mc": r"$\tilde{{M}}={}$", "k": "$k={}$", "M": "$M={}$"}
_MARKERS = "osd^v<>ph*"


def plot_records(
    records: Sequence[ErrorRecord],
    family: str,
    path: Union[str, Path],
    title: str = "",
) -> Path:
    """Write a log10-error chart of ``records`` as a standalone SVG.

    One line per value of the family's series column; zero errors are
    dropped because they have no place on a log axis.
    """
    x_column, series_column, x_label = _LAYOUT[family]
    frame = records_frame(records)
    frame = frame[frame["linf_error"] > 0]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "vie-parareal", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(7, 6))
        for i, (value, group) in enumerate(frame.groupby(series_column)):
            group = group.sort_values(x_column)
            ax.semilogy(
                group[x_column],
                group["linf_error"],
                marker=_MARKERS[i % len(_MARKERS)],
                markersize=6,
                label=_SERIES_LABEL[series_column].format(value),
            )
        ax.set_xlabel(x_label, fontsize=14.0)
        ax.set_ylabel(r"$L^\infty$-error", fontsize=14.0)
        if title:
            ax.set_title(title)
        ax.grid(True)
        if not frame.empty:
            ax.legend(loc="best")
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"wrote {family} chart to {path}")
    return path
