"""Experiment suites and their CSV harness.

Five canned sweeps cover the hypotheses the simulator exists to probe:
room inference versus knowledge coverage (with and without the planner
in the loop), prior-merging strategies under a degraded sensor, the
entropy gate for human queries, and existence tracking on mixed
present/absent trials.

A suite is first expanded into a flat list of trial tasks, then the
tasks are executed one by one (or by a worker pool; results are merged
back in task order either way). Every trial seeds its generators from
(base_seed, trial index) alone, so a rerun with the same seed writes a
byte-identical CSV no matter how many workers ran it.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fusion import MergeStrategy
from .world import Scenario, TrialConfig, run_asp_trial, run_trial

COLUMNS = [
    "suite", "sweep", "variant", "trial", "seed", "outcome", "present",
    "target_class", "true_room", "declared_room", "correct", "top2",
    "error", "elapsed", "steps", "queries", "p_not_final", "kb_facts",
    "config_hash",
]

KNOWLEDGE_GRID = tuple(float(p) for p in range(0, 101, 10))
GATE_GRID = tuple(float(g) for g in range(9))

# the merge comparison runs on a deliberately degraded sensor; with the
# default one every strategy parks the belief peak on the true cell and
# the error distributions all collapse to zero
MERGE_SENSOR = {"p_max": 0.5, "sigma": 2.0, "epsilon": 0.20}


class SuiteError(Exception):
    pass


@dataclass(frozen=True)
class Task:
    """One trial of a suite, ready to execute."""

    suite: str
    sweep: float
    variant: str
    index: int
    kind: str            # "search" runs the planner, "asp" only infers
    scenario_key: str    # which entry of scenario_variants() to use
    config: TrialConfig
    config_hash: str


def scenario_variants(scenario: Scenario) -> dict:
    return {
        "base": scenario,
        "merge_sensor": scenario.with_observation(**MERGE_SENSOR),
    }


def _hash_config(suite: str, scenario: Scenario, tc: TrialConfig,
                 trials: int, base_seed: int) -> str:
    blob = {
        "suite": suite,
        "scenario": {
            "name": scenario.name,
            "observation": dataclasses.asdict(scenario.observation),
            "thresholds": {
                "localize": scenario.localize_threshold,
                "absent": scenario.theta_absent,
                "assert_detection": scenario.assert_threshold,
                "entropy_gate": scenario.entropy_gate,
            },
            "time_limit": scenario.time_limit,
            "human": dataclasses.asdict(scenario.human),
            "merge": scenario.merge_strategy.value,
            "trust": scenario.merge_trust,
            "travel_cost": scenario.travel_cost,
        },
        "trial": {**dataclasses.asdict(tc), "merge": tc.merge.value},
        "trials": trials,
        "base_seed": base_seed,
    }
    digest = hashlib.sha256(
        json.dumps(blob, sort_keys=True).encode("utf-8")).hexdigest()
    return digest[:12]


def _h1_asp_only(variants, trials, seed):
    for pct in KNOWLEDGE_GRID:
        tc = TrialConfig(percent=pct)
        h = _hash_config("h1_asp_only", variants["base"], tc, trials, seed)
        for i in range(trials):
            yield Task("h1_asp_only", pct, "asp", i, "asp", "base", tc, h)


def _h1_combined(variants, trials, seed):
    baseline = TrialConfig(percent=0.0, merge=MergeStrategy.NONE, human=False)
    h_base = _hash_config("h1_combined", variants["base"], baseline, trials,
                          seed)
    for pct in KNOWLEDGE_GRID:
        tc = TrialConfig(percent=pct)
        h = _hash_config("h1_combined", variants["base"], tc, trials, seed)
        for i in range(trials):
            yield Task("h1_combined", pct, "combined", i, "search", "base",
                       tc, h)
        # the baseline ignores the knowledge axis; repeating the same
        # trials at every sweep point keeps the CSV self-contained
        for i in range(trials):
            yield Task("h1_combined", pct, "pomdp_only", i, "search", "base",
                       baseline, h_base)


def _merge_comparison(variants, trials, seed):
    for strategy in MergeStrategy:
        tc = TrialConfig(percent=20.0, merge=strategy, human=False,
                         drip_every=5, drip_count=2)
        h = _hash_config("merge_comparison", variants["merge_sensor"], tc,
                         trials, seed)
        for i in range(trials):
            yield Task("merge_comparison", 0.0, strategy.value, i, "search",
                       "merge_sensor", tc, h)


def _h2_entropy_sweep(variants, trials, seed):
    for gate in GATE_GRID:
        tc = TrialConfig(percent=0.0, gate=gate)
        h = _hash_config("h2_entropy_sweep", variants["base"], tc, trials,
                         seed)
        for i in range(trials):
            yield Task("h2_entropy_sweep", gate, "combined", i, "search",
                       "base", tc, h)


def _h3_existence(variants, trials, seed):
    # alternating presence halves each sample but keeps trial seeds
    # aligned between the tracked and untracked variants
    for variant, tracking in (("tracked", True), ("untracked", False)):
        for i in range(trials):
            tc = TrialConfig(percent=50.0, human=False, tracking=tracking,
                             present=(i % 2 == 0))
            h = _hash_config("h3_existence", variants["base"], tc, trials,
                             seed)
            yield Task("h3_existence", 0.0, variant, i, "search", "base",
                       tc, h)


SUITES = {
    "h1_asp_only": _h1_asp_only,
    "h1_combined": _h1_combined,
    "merge_comparison": _merge_comparison,
    "h2_entropy_sweep": _h2_entropy_sweep,
    "h3_existence": _h3_existence,
}


def suite_plan(suite: str, scenario: Scenario, trials: int,
               base_seed: int) -> list:
    if suite not in SUITES:
        raise SuiteError(f"unknown suite {suite!r}; "
                         f"pick one of {', '.join(sorted(SUITES))}")
    if trials < 1:
        raise SuiteError("trials must be >= 1")
    variants = scenario_variants(scenario)
    return list(SUITES[suite](variants, trials, base_seed))


def execute_task(task: Task, variants: dict, base_seed: int) -> dict:
    scenario = variants[task.scenario_key]
    if task.kind == "asp":
        result = run_asp_trial(scenario, task.config, base_seed, task.index)
    else:
        result = run_trial(scenario, task.config, base_seed, task.index)
    return {
        "suite": task.suite,
        "sweep": task.sweep,
        "variant": task.variant,
        "trial": task.index,
        "seed": result.seed,
        "outcome": result.outcome,
        "present": result.present,
        "target_class": result.target_class,
        "true_room": result.true_room,
        "declared_room": result.declared_room,
        "correct": result.correct,
        "top2": result.top2,
        "error": result.error,
        "elapsed": result.elapsed,
        "steps": result.steps,
        "queries": result.queries,
        "p_not_final": result.p_not_final,
        "kb_facts": result.kb_facts,
        "config_hash": task.config_hash,
    }


def suite_rows(suite: str, scenario: Scenario, trials: int, base_seed: int):
    """Yield result rows one finished trial at a time."""
    plan = suite_plan(suite, scenario, trials, base_seed)
    variants = scenario_variants(scenario)
    return (execute_task(task, variants, base_seed) for task in plan)


def run_suite(suite: str, scenario: Scenario, trials: int,
              base_seed: int) -> list:
    return list(suite_rows(suite, scenario, trials, base_seed))


# -- CSV round trip ----------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".6g")
    return str(value)


def write_rows(rows, path) -> int:
    """Stream rows to a CSV, flushing as they come.

    An interrupt mid-suite leaves a valid file holding every finished
    trial. Returns the number of rows written.
    """
    count = 0
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        try:
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in COLUMNS])
                count += 1
                fh.flush()
        finally:
            fh.flush()
    return count


_NUMERIC = {"sweep": float, "trial": int, "present": int, "correct": int,
            "top2": int, "error": float, "elapsed": float, "steps": int,
            "queries": int, "p_not_final": float, "kb_facts": int}


def read_rows(path) -> list:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    set(COLUMNS) - set(reader.fieldnames):
                raise SuiteError(f"{path}: not a suite result file")
            rows = []
            for raw in reader:
                row = dict(raw)
                for key, conv in _NUMERIC.items():
                    text = raw.get(key, "")
                    row[key] = conv(text) if text != "" else None
                rows.append(row)
    except OSError as err:
        raise SuiteError(f"cannot read {path}: {err}") from err
    if not rows:
        raise SuiteError(f"{path}: no result rows")
    return rows


# -- aggregation and significance --------------------------------------

def metric_values(rows, metric: str) -> np.ndarray:
    """Extract one numeric value per row; missing entries become nan."""
    if metric == "accuracy":
        return np.array([float(r["correct"]) for r in rows])
    if metric in ("elapsed", "error", "top2", "queries", "p_not_final"):
        return np.array([math.nan if r[metric] is None else float(r[metric])
                         for r in rows])
    raise SuiteError(f"unknown metric {metric!r}")


def groups(rows):
    """Rows keyed by (sweep, variant), insertion-ordered."""
    table = {}
    for row in rows:
        table.setdefault((row["sweep"], row["variant"]), []).append(row)
    return table


def summarize(rows) -> list:
    """Accuracy and mean time per (sweep, variant)."""
    out = []
    for (sweep, variant), members in groups(rows).items():
        acc = float(np.mean([r["correct"] for r in members]))
        elapsed = float(np.mean([r["elapsed"] for r in members]))
        out.append({"sweep": sweep, "variant": variant, "n": len(members),
                    "accuracy": acc, "mean_elapsed": elapsed})
    return out


def bootstrap_diff(a: np.ndarray, b: np.ndarray, n_resamples: int = 10000,
                   seed: int = 0):
    """Two-sided bootstrap test for mean(a) - mean(b).

    Returns (difference, p_value, low, high) with a 95% percentile CI.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[~np.isnan(a)]
    b = b[~np.isnan(b)]
    if a.size == 0 or b.size == 0:
        raise SuiteError("bootstrap needs non-empty samples")
    rng = np.random.default_rng(seed)
    diffs = (rng.choice(a, (n_resamples, a.size)).mean(axis=1) -
             rng.choice(b, (n_resamples, b.size)).mean(axis=1))
    low, high = np.quantile(diffs, [0.025, 0.975])
    lo_tail = (1 + np.sum(diffs <= 0.0)) / (n_resamples + 1)
    hi_tail = (1 + np.sum(diffs >= 0.0)) / (n_resamples + 1)
    p = min(1.0, 2.0 * min(lo_tail, hi_tail))
    return float(a.mean() - b.mean()), float(p), float(low), float(high)


def compare(path_a, path_b, metric: str = "accuracy", n_resamples: int = 10000,
            seed: int = 0) -> list:
    """Per-group bootstrap comparison of two result files.

    Both files must cover the same (sweep, variant) axis; anything else
    is a sign the caller mixed up outputs from different suites.
    """
    rows_a = read_rows(path_a)
    rows_b = read_rows(path_b)
    ga, gb = groups(rows_a), groups(rows_b)
    if set(ga) != set(gb):
        only_a = sorted(set(ga) - set(gb))
        only_b = sorted(set(gb) - set(ga))
        raise SuiteError("result files cover different sweeps: "
                         f"only in A {only_a}, only in B {only_b}")
    report = []
    for key in ga:
        va = metric_values(ga[key], metric)
        vb = metric_values(gb[key], metric)
        diff, p, low, high = bootstrap_diff(va, vb, n_resamples, seed)
        report.append({
            "sweep": key[0], "variant": key[1],
            "mean_a": float(np.nanmean(va)), "mean_b": float(np.nanmean(vb)),
            "diff": diff, "p": p, "ci_low": low, "ci_high": high,
            "n_a": int(np.sum(~np.isnan(va))), "n_b": int(np.sum(~np.isnan(vb))),
        })
    return report
