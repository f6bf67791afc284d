"""
Static SVG line charts for emitted tables.

Rendering uses the Agg backend with the SVG date stamp removed and a fixed
hash salt, so identical tables give identical files.
"""

from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_line_chart(
    table: Mapping[str, Sequence[float]],
    x_column: str,
    y_columns: Sequence[str],
    path: Path,
    title: str = "",
    log_x: bool = False,
    log_y: bool = False,
) -> Path:
    """
    Draw one line per y column against x_column and save it as SVG.

    Args:
        table: Column name to values
        x_column: Abscissa column
        y_columns: Columns to plot
        path: Output file (suffix .svg)
        title: Chart title
        log_x: Logarithmic x axis
        log_y: Logarithmic y axis

    Returns:
        The written path
    """
    plt.rcParams["svg.hashsalt"] = "algostab"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    x = np.asarray(table[x_column], dtype=float)
    for name in y_columns:
        ax.plot(x, np.asarray(table[name], dtype=float), marker="o", markersize=3, label=name)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(x_column)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path


def log_axis_ok(values: Optional[Sequence[float]]) -> bool:
    """True when every value is positive, so a log axis can show them."""
    return values is not None and len(values) > 0 and bool(np.all(np.asarray(values, dtype=float) > 0))
