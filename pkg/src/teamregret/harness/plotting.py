"""Post-hoc SVG learning-curve plots from metrics CSV files."""

from __future__ import annotations

import csv
from pathlib import Path

from .run import CSV_HEADER

COLUMNS = ("mean_return", "win_rate")


def _read_series(path: Path, column: str) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty metrics file") from None
        expected = CSV_HEADER.split(",")
        if header != expected:
            raise ValueError(
                f"{path}: metrics schema mismatch: header {header} != {expected}"
            )
        col = expected.index(column)
        xs, ys = [], []
        for row in reader:
            if len(row) != len(expected):
                raise ValueError(f"{path}: malformed row {row}")
            if row[col] == "":
                continue
            xs.append(float(row[0]))
            ys.append(float(row[col]))
    return xs, ys


def moving_average(values: list[float], window: int) -> list[float]:
    """Trailing mean over up to `window` points; identity for constants."""
    if window <= 1:
        return list(values)
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        chunk = values[lo : i + 1]
        out.append(sum(chunk) / len(chunk))
    return out


def emit_plots(csv_paths, out_path, column: str = "mean_return",
               window: int = 1) -> Path:
    """One SVG line chart, one series per CSV, legend from file names."""
    if column not in COLUMNS:
        raise ValueError(f"column must be one of {COLUMNS}, got {column!r}")
    if not csv_paths:
        raise ValueError("no metrics files given")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in csv_paths:
        path = Path(path)
        xs, ys = _read_series(path, column)
        ax.plot(xs, moving_average(ys, window), label=path.stem)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out
