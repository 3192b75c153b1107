"""Result bundles: CSV tables plus a JSON metadata document.

Numeric CSV cells carry 6 significant digits; metadata holds full-precision
scalars.  Nothing time- or host-dependent is written, so identical runs
(same command line, same seed) produce byte-identical bundles.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .bayes import PosteriorSummary
from .wmm import WmmRun

TOOL_NAME = "poptree"
TOOL_VERSION = "0.1.0"

SUMMARY_HEADER = ["quantity", "mean", "sd", "q2.5", "median", "q97.5", "ess", "rhat"]
HIST_BINS = 50


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return f"{value:.6g}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else _fmt(cell) for cell in row])


def _histogram_rows(name: str, values: np.ndarray) -> List[Sequence]:
    counts, edges = np.histogram(values, bins=HIST_BINS)
    return [
        (name, edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))
    ]


def _write_metadata(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "run_metadata.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_wmm_bundle(
    out_dir, run: WmmRun, tree_digest: str, tree_name: str, command: str,
    emit_samples: bool = True,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    combined = run.combined_samples
    mean_c = float(np.average(combined, weights=run.importance_weights))
    sd_c = float(
        np.sqrt(np.average((combined - mean_c) ** 2, weights=run.importance_weights))
    )
    lo, hi = run.quantile_interval
    _write_csv(
        out / "summary.csv",
        SUMMARY_HEADER,
        [("root", run.mean, sd_c, lo, run.median, hi, None, None)],
    )
    _write_csv(out / "weights.csv", ["leaf", "weight"], list(zip(run.path_labels, run.weights)))
    if emit_samples:
        _write_csv(
            out / "samples.csv",
            ["iteration", "quantity", "value"],
            [(i, "root", v) for i, v in enumerate(combined)],
        )
    _write_csv(
        out / "histogram.csv",
        ["quantity", "bin_left", "bin_right", "count"],
        _histogram_rows("root", combined),
    )
    _write_metadata(
        out,
        {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": command,
            "engine": "wmm",
            "tree": tree_name,
            "tree_digest": tree_digest,
            "config": {
                "iterations": run.config.iterations,
                "seed": run.config.seed,
                "interval_mass": run.config.interval_mass,
            },
            "mean": run.mean,
            "median": run.median,
            "quantile_interval": list(run.quantile_interval),
            "normal_interval": list(run.normal_interval),
            "weights": {label: float(w) for label, w in zip(run.path_labels, run.weights)},
        },
    )


def write_bayes_bundle(
    out_dir, summary: PosteriorSummary, tree_digest: str, tree_name: str, command: str,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for name, stats in summary.quantities.items():
        rows.append(
            (name, stats.mean, stats.sd, stats.q2_5, stats.median, stats.q97_5, stats.ess, stats.rhat)
        )
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)

    acf_rows = []
    for name, series in summary.acf.items():
        acf_rows.extend((name, lag, float(v)) for lag, v in enumerate(series))
    _write_csv(out / "acf.csv", ["quantity", "lag", "value"], acf_rows)

    if summary.traces is not None:
        hist_rows: List[Sequence] = []
        trace_rows: List[Sequence] = []
        for name, series in summary.traces.items():
            hist_rows.extend(_histogram_rows(name, series.ravel()))
            for chain in range(series.shape[0]):
                trace_rows.extend(
                    (chain, i, name, v) for i, v in enumerate(series[chain])
                )
        _write_csv(out / "histogram.csv", ["quantity", "bin_left", "bin_right", "count"], hist_rows)
        _write_csv(out / "samples.csv", ["chain", "iteration", "quantity", "value"], trace_rows)

    config = summary.config
    _write_metadata(
        out,
        {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": command,
            "engine": "bayes",
            "tree": tree_name,
            "tree_digest": tree_digest,
            "config": {
                "chains": config.chains,
                "iterations": config.iterations,
                "burn_in": config.burn_in,
                "thin": config.thin,
                "seed": config.seed,
            },
            "max_rhat": summary.max_rhat(),
            "min_ess": summary.min_ess(),
        },
    )


def write_suite_bundle(out_dir, report, suite_name: str, tree_digest: str, command: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for result in report.results:
        for quantity, (mean, lo, hi) in result.summaries.items():
            delta = result.deltas.get(quantity)
            rows.append((result.name, quantity, mean, lo, hi, delta))
    _write_csv(
        out / "scenarios.csv",
        ["scenario", "quantity", "mean", "q2.5", "q97.5", "delta_vs_baseline"],
        rows,
    )
    checks = []
    for result in report.results:
        for quantity, ok in result.direction_checks.items():
            checks.append((result.name, quantity, "pass" if ok else "fail"))
        checks.append(
            (
                result.name,
                "__convergence__",
                "flagged" if result.flagged else "ok",
            )
        )
    _write_csv(out / "checks.csv", ["scenario", "quantity", "status"], checks)
    _write_metadata(
        out,
        {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": command,
            "engine": "suite",
            "suite": suite_name,
            "tree_digest": tree_digest,
            "baseline": report.baseline,
            "flagged": sorted(r.name for r in report.results if r.flagged),
        },
    )


def read_summary_csv(path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
