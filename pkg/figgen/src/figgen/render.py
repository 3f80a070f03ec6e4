"""Render evaluation figures from suite result CSVs.

The simulator ships its results as flat CSV files, one per suite; this
package turns those files into plots.  Extraction is kept separate from
drawing: ``extract_series`` is pure and returns plain arrays, so the
numeric content of every figure is testable without rendering anything,
and rendering itself is deterministic (fixed hash salt, no timestamps).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "figgen"

# column layout of the simulator's result files
RESULT_COLUMNS = [
    "suite", "sweep", "variant", "trial", "seed", "outcome", "present",
    "target_class", "true_room", "declared_room", "correct", "top2",
    "error", "elapsed", "steps", "queries", "p_not_final", "kb_facts",
    "config_hash",
]

_NUMERIC = {"sweep": float, "trial": int, "present": int, "correct": int,
            "top2": int, "error": float, "elapsed": float, "steps": int,
            "queries": int, "p_not_final": float, "kb_facts": int}


class FigureError(Exception):
    pass


def read_results(path) -> list:
    """Parse a suite result CSV into row dicts with typed fields."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    set(RESULT_COLUMNS) - set(reader.fieldnames):
                raise FigureError(f"{path}: not a suite result file")
            rows = []
            for raw in reader:
                row = dict(raw)
                for key, conv in _NUMERIC.items():
                    text = raw.get(key, "")
                    row[key] = conv(text) if text != "" else None
                rows.append(row)
    except OSError as err:
        raise FigureError(f"cannot read {path}: {err}") from err
    if not rows:
        raise FigureError(f"{path}: no result rows")
    return rows


# -- series extraction --------------------------------------------------

def _groups(rows) -> dict:
    out = {}
    for row in rows:
        out.setdefault((row["sweep"], row["variant"]), []).append(row)
    return out


def _pick(grouped: dict, sweep: float, variant: str) -> list:
    try:
        return grouped[(sweep, variant)]
    except KeyError:
        raise FigureError(f"missing rows for sweep={sweep:g} "
                          f"variant={variant!r}") from None


def _rate(rows, key: str) -> float:
    vals = [row[key] for row in rows]
    if any(v is None for v in vals):
        raise FigureError(f"column {key!r} has missing entries")
    return float(np.mean(vals))


def _mean(rows, key: str) -> float:
    return float(np.mean([row[key] for row in rows]))


def _cdf(values):
    """Empirical CDF support points.

    Missing values count toward the denominator but contribute no jump,
    so a curve that never reaches 1.0 is showing unresolved trials.
    """
    finite = np.sort(np.array([v for v in values if v is not None],
                              dtype=float))
    return finite, np.arange(1, len(finite) + 1) / len(values)


def _series_asp_accuracy(rows) -> dict:
    grouped = _groups(rows)
    percent = sorted({s for s, _ in grouped})
    return {
        "percent": np.array(percent),
        "top1": np.array([_rate(_pick(grouped, p, "asp"), "correct")
                          for p in percent]),
        "top2": np.array([_rate(_pick(grouped, p, "asp"), "top2")
                          for p in percent]),
    }


def _series_planner_accuracy(rows) -> dict:
    grouped = _groups(rows)
    percent = sorted({s for s, _ in grouped})
    return {
        "percent": np.array(percent),
        "combined": np.array([_rate(_pick(grouped, p, "combined"), "correct")
                              for p in percent]),
        "pomdp_only": np.array([_rate(_pick(grouped, p, "pomdp_only"),
                                      "correct") for p in percent]),
    }


def _series_merge_error_cdf(rows) -> dict:
    grouped = _groups(rows)
    variants = [v for _, v in grouped]
    series: dict = {"variants": variants}
    for variant in variants:
        sub = _pick(grouped, 0.0, variant)
        x, y = _cdf([row["error"] for row in sub])
        series[f"{variant}_error"] = x
        series[f"{variant}_cdf"] = y
    return series


def _series_gate_tradeoff(rows) -> dict:
    grouped = _groups(rows)
    gate = sorted({s for s, _ in grouped})
    subs = [_pick(grouped, g, "combined") for g in gate]
    return {
        "gate": np.array(gate),
        "accuracy": np.array([_rate(sub, "correct") for sub in subs]),
        "elapsed": np.array([_mean(sub, "elapsed") for sub in subs]),
    }


def _series_existence_time_cdf(rows) -> dict:
    grouped = _groups(rows)
    series: dict = {"variants": ["tracked", "untracked"]}
    for variant in series["variants"]:
        sub = _pick(grouped, 0.0, variant)
        x, y = _cdf([row["elapsed"] for row in sub])
        series[f"{variant}_elapsed"] = x
        series[f"{variant}_cdf"] = y
    return series


def _series_existence_summary(rows) -> dict:
    grouped = _groups(rows)
    variants = ["tracked", "untracked"]
    subs = [_pick(grouped, 0.0, v) for v in variants]
    return {
        "variants": variants,
        "accuracy": np.array([_rate(sub, "correct") for sub in subs]),
        "elapsed": np.array([_mean(sub, "elapsed") for sub in subs]),
    }


# -- drawing ------------------------------------------------------------

def _draw_asp_accuracy(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(series["percent"], series["top1"], marker="o", label="top-1")
    ax.plot(series["percent"], series["top2"], marker="s", label="top-2")
    ax.set_xlabel("location knowledge (%)")
    ax.set_ylabel("room prediction accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def _draw_planner_accuracy(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(series["percent"], series["combined"], marker="o",
            label="inference + planner")
    ax.plot(series["percent"], series["pomdp_only"], marker="s",
            linestyle="--", label="planner only")
    ax.set_xlabel("location knowledge (%)")
    ax.set_ylabel("search accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


_MERGE_LABELS = {
    "none": "no merge",
    "bayesian": "bayesian",
    "trust_factor": "trust factor",
    "dirichlet_weight": "dirichlet weight",
}


def _draw_merge_error_cdf(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    for variant in series["variants"]:
        x, y = series[f"{variant}_error"], series[f"{variant}_cdf"]
        # step curve anchored at zero probability
        ax.step(np.concatenate(([0.0], x)), np.concatenate(([0.0], y)),
                where="post", label=_MERGE_LABELS.get(variant, variant))
    ax.set_xlabel("final belief peak distance (cells)")
    ax.set_ylabel("fraction of trials")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def _draw_gate_tradeoff(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(series["gate"], series["accuracy"], marker="o", color="C0")
    ax.set_xlabel("entropy gate (bits)")
    ax.set_ylabel("search accuracy", color="C0")
    ax.tick_params(axis="y", labelcolor="C0")
    twin = ax.twinx()
    twin.plot(series["gate"], series["elapsed"], marker="s", color="C1",
              linestyle="--")
    twin.set_ylabel("mean time (units)", color="C1")
    twin.tick_params(axis="y", labelcolor="C1")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def _draw_existence_time_cdf(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    for variant in series["variants"]:
        x, y = series[f"{variant}_elapsed"], series[f"{variant}_cdf"]
        ax.step(np.concatenate(([0.0], x)), np.concatenate(([0.0], y)),
                where="post", label=f"existence {variant}")
    ax.set_xlabel("time to decision (units)")
    ax.set_ylabel("fraction of trials")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def _draw_existence_summary(series):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    pos = np.arange(len(series["variants"]))
    ax.bar(pos - 0.18, series["accuracy"], width=0.36, color="C0",
           label="accuracy")
    ax.set_xticks(pos)
    ax.set_xticklabels(series["variants"])
    ax.set_ylabel("accuracy", color="C0")
    ax.set_ylim(0.0, 1.05)
    twin = ax.twinx()
    twin.bar(pos + 0.18, series["elapsed"], width=0.36, color="C1",
             label="mean time")
    twin.set_ylabel("mean time (units)", color="C1")
    fig.tight_layout()
    return fig


@dataclass(frozen=True)
class FigureSpec:
    suite: str
    description: str
    extract: callable
    draw: callable


FIGURES = {
    "asp-accuracy": FigureSpec(
        "h1_asp_only", "room prediction accuracy vs location knowledge",
        _series_asp_accuracy, _draw_asp_accuracy),
    "planner-accuracy": FigureSpec(
        "h1_combined", "search accuracy vs knowledge, with planner baseline",
        _series_planner_accuracy, _draw_planner_accuracy),
    "merge-error-cdf": FigureSpec(
        "merge_comparison", "localization error CDF per merge strategy",
        _series_merge_error_cdf, _draw_merge_error_cdf),
    "gate-tradeoff": FigureSpec(
        "h2_entropy_sweep", "accuracy and mean time vs entropy gate",
        _series_gate_tradeoff, _draw_gate_tradeoff),
    "existence-time-cdf": FigureSpec(
        "h3_existence", "time-to-decision CDF with and without tracking",
        _series_existence_time_cdf, _draw_existence_time_cdf),
    "existence-summary": FigureSpec(
        "h3_existence", "accuracy and mean time with and without tracking",
        _series_existence_summary, _draw_existence_summary),
}


def _spec(figure_id: str) -> FigureSpec:
    try:
        return FIGURES[figure_id]
    except KeyError:
        raise FigureError(f"unknown figure {figure_id!r}; pick one of "
                          f"{', '.join(sorted(FIGURES))}") from None


def extract_series(rows, figure_id: str) -> dict:
    """Numeric content of one figure, as a dict of plain arrays."""
    spec = _spec(figure_id)
    seen = {row["suite"] for row in rows}
    if seen != {spec.suite}:
        raise FigureError(f"figure {figure_id!r} needs {spec.suite!r} rows, "
                          f"got {sorted(seen)}")
    return spec.extract(rows)


def render(results_path, figure_id: str, out_path) -> Path:
    """Render one figure; nothing is written if extraction fails."""
    spec = _spec(figure_id)
    rows = read_results(results_path)
    series = extract_series(rows, figure_id)
    out = Path(out_path)
    fig = spec.draw(series)
    try:
        # strip the creation date so reruns are byte-identical
        metadata = {"Date": None} if out.suffix == ".svg" else None
        fig.savefig(out, metadata=metadata)
    finally:
        plt.close(fig)
    return out


# -- command line -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figgen", description="render figures from suite result CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure")
    p_render.add_argument("figure", choices=sorted(FIGURES),
                          metavar="figure")
    p_render.add_argument("results", help="suite result CSV")
    p_render.add_argument("--out", required=True,
                          help="output image path (.svg, .png, .pdf)")
    sub.add_parser("list", help="list figure ids")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return 1 if err.code else 0
    try:
        if args.command == "list":
            for name in sorted(FIGURES):
                spec = FIGURES[name]
                print(f"{name:20s} {spec.suite:18s} {spec.description}")
            return 0
        out = render(args.results, args.figure, args.out)
        print(f"wrote {out}")
        return 0
    except FigureError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # pragma: no cover - last resort
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
