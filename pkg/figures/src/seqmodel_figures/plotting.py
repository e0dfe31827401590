"""Expected-profit curves per algorithm from an aggregate CSV.

Reads the benchmark's cross-opponent averages (`algo,iter,mean_payoff,
mean_model_l2`), draws one labeled curve per modeling algorithm and a
horizontal reference line per constant benchmark, and writes the figure
to PNG or SVG depending on the output extension.  An optional trailing
moving average smooths the curves for display; it never touches the
stored data, and the default window of 1 leaves values untouched (50 is
a good display value for noisy per-iteration runs).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REFERENCE_ALGOS = ("bestresponse", "bestnash")

_COLORS = {
    "fmap": "tab:red",
    "bbr": "tab:blue",
    "map": "tab:green",
    "thompson": "tab:purple",
    "bestresponse": "black",
    "bestnash": "dimgray",
}

_HEADER = ["algo", "iter", "mean_payoff", "mean_model_l2"]


@dataclass(frozen=True)
class Curve:
    iterations: np.ndarray
    payoff: np.ndarray


@dataclass(frozen=True)
class CurveSet:
    """Per-algorithm payoff series plus constant reference levels."""

    curves: dict[str, Curve]
    references: dict[str, float]


def read_aggregate(path: str | Path) -> CurveSet:
    """Parse an aggregate CSV; malformed content reports its line number."""
    grouped: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != _HEADER:
            raise ValueError(f"{path} line 1: expected header "
                             f"{','.join(_HEADER)}")
        for number, row in enumerate(rows, start=2):
            if len(row) != 4:
                raise ValueError(f"{path} line {number}: expected 4 columns, "
                                 f"got {len(row)}")
            algo = row[0]
            try:
                iteration = int(row[1])
                payoff = float(row[2])
                float(row[3])
            except ValueError:
                raise ValueError(f"{path} line {number}: "
                                 f"non-numeric value in {row[1:]}") from None
            series = grouped.setdefault(algo, [])
            if series and iteration <= series[-1][0]:
                raise ValueError(f"{path} line {number}: iteration "
                                 f"{iteration} does not increase for {algo}")
            series.append((iteration, payoff))
    if not grouped:
        raise ValueError(f"{path} line 2: no data rows")

    curves = {}
    references = {}
    for algo, series in grouped.items():
        iterations = np.array([s[0] for s in series])
        payoff = np.array([s[1] for s in series])
        if algo in REFERENCE_ALGOS:
            references[algo] = float(payoff[-1])
        else:
            curves[algo] = Curve(iterations, payoff)
    return CurveSet(curves, references)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over up to `window` points; window 1 copies unchanged."""
    values = np.array(values, dtype=float)
    if window < 1:
        raise ValueError("smoothing window must be at least 1")
    if window == 1:
        return values
    sums = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(len(values))
    start = np.maximum(0, idx - window + 1)
    return (sums[idx + 1] - sums[start]) / (idx + 1 - start)


def build_figure(curves: CurveSet, smoothing_window: int = 1):
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for name, curve in curves.curves.items():
        ax.plot(curve.iterations,
                moving_average(curve.payoff, smoothing_window),
                label=name, color=_COLORS.get(name), linewidth=1.4)
    for name, level in curves.references.items():
        ax.axhline(level, label=name, color=_COLORS.get(name),
                   linestyle="--", linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("expected profit")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def plot(aggregate_csv_path: str | Path, output_image_path: str | Path,
         smoothing_window: int = 1) -> None:
    """Render the figure; output format follows the file extension."""
    curves = read_aggregate(aggregate_csv_path)
    fig = build_figure(curves, smoothing_window)
    out = Path(output_image_path)
    try:
        if out.suffix.lower() == ".svg":
            with plt.rc_context({"svg.hashsalt": "seqmodel-figures"}):
                fig.savefig(out, metadata={"Date": None})
        else:
            fig.savefig(out)
    finally:
        plt.close(fig)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seqmodel-plot",
        description="Render expected-profit curves from an aggregate CSV.")
    parser.add_argument("aggregate_csv")
    parser.add_argument("output_image",
                        help="target file; .png or .svg picks the format")
    parser.add_argument("--smoothing", type=int, default=1,
                        help="trailing moving-average window "
                             "(default: 1, off; try 50 for display)")
    args = parser.parse_args(argv)
    try:
        plot(args.aggregate_csv, args.output_image,
             smoothing_window=args.smoothing)
    except (ValueError, OSError) as exc:
        print(exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
