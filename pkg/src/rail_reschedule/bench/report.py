"""Aggregation of a results directory into curves, final scores and verdicts."""

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from rail_reschedule.bench.runner import MANIFEST_NAME
from rail_reschedule.bench.stats import wilcoxon_rank_sum
from rail_reschedule.evolution import TRACE_COLUMNS


# Constants
SIGNIFICANCE = 0.01
CURVES_FILE = "curves.csv"
FINAL_FILE = "final.csv"
COMPARISONS_FILE = "comparisons.csv"
EQUIVALENT = "equivalent"


@dataclass(frozen=True)
class ExcludedTrace:
    """A cell left out of the report and the reason."""

    instance: str
    variant: str
    run: int
    reason: str


@dataclass(frozen=True)
class VariantSummary:
    """Final fitness statistics of one variant on one instance."""

    instance: str
    variant: str
    runs: int
    mean_final: float
    median_final: float
    best_final: int


@dataclass(frozen=True)
class PairComparison:
    """
    Rank-sum comparison of two variants on one instance.

    ``verdict`` names the dominating variant, the one with the lower
    median final fitness, when ``p < 0.01``; otherwise it is
    ``"equivalent"``.
    """

    instance: str
    variant_a: str
    variant_b: str
    statistic: float
    p_value: float
    exact: bool
    verdict: str


@dataclass
class ComparisonReport:
    """Everything ``summarize`` derives from the raw traces."""

    summaries: list[VariantSummary]
    comparisons: list[PairComparison]
    curves: pd.DataFrame
    finals: pd.DataFrame
    excluded: list[ExcludedTrace] = field(default_factory=list)

    def verdict(self, instance: str, first: str, second: str) -> str:
        """Verdict between two variants, in either order."""
        for comparison in self.comparisons:
            if comparison.instance == instance and {
                comparison.variant_a,
                comparison.variant_b,
            } == {first, second}:
                return comparison.verdict
        raise KeyError(f"No comparison of {first} and {second} on {instance}")


def _read_trace(path: Path) -> pd.DataFrame:
    """
    Read and check one trace CSV.

    Raises
    ------
    ValueError
        If the file is empty, has other columns or non-consecutive
        generations.
    """
    df = pd.read_csv(path)
    if list(df.columns) != TRACE_COLUMNS:
        raise ValueError(f"unexpected columns {list(df.columns)}")
    if df.empty:
        raise ValueError("no generations recorded")
    if df[TRACE_COLUMNS].isna().any().any():
        raise ValueError("missing values")
    if list(df["generation"]) != list(range(len(df))):
        raise ValueError("generations are not consecutive from 0")
    return df


def load_manifest(results_dir: str | Path) -> dict[str, Any]:
    """
    Read the manifest of a results directory.

    Raises
    ------
    FileNotFoundError
        If the directory has no manifest.
    ValueError
        If the manifest is unreadable or lists no cells.
    """
    path = Path(results_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"No {MANIFEST_NAME} in {results_dir}")
    try:
        manifest: dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Unreadable manifest {path}: {e}") from e
    if not manifest.get("cells"):
        raise ValueError(f"Manifest {path} lists no cells")
    return manifest


def _verdict(a_id: str, a: list[float], b_id: str, b: list[float], p_value: float) -> str:
    if p_value >= SIGNIFICANCE:
        return EQUIVALENT
    median_a, median_b = float(np.median(a)), float(np.median(b))
    if median_a != median_b:
        return a_id if median_a < median_b else b_id
    return a_id if float(np.mean(a)) <= float(np.mean(b)) else b_id


def summarize(results_dir: str | Path, out_dir: str | Path | None = None) -> ComparisonReport:
    """
    Reduce a results directory to a comparison report.

    Parameters
    ----------
    results_dir : str | Path
        Directory written by ``run_plan``.
    out_dir : str | Path | None, optional
        Where to write ``curves.csv``, ``final.csv`` and
        ``comparisons.csv``; defaults to ``results_dir``.

    Returns
    -------
    ComparisonReport
        Per-generation mean curves, per-variant final statistics and
        pairwise rank-sum verdicts. Missing or corrupt traces are excluded
        and listed in ``excluded``.

    Raises
    ------
    FileNotFoundError
        If ``results_dir`` has no manifest.
    ValueError
        If the manifest lists no cells, or no trace survives.
    """
    root = Path(results_dir)
    manifest = load_manifest(root)

    excluded: list[ExcludedTrace] = []
    frames = []
    final_rows = []
    variant_order: list[str] = []
    for cell in manifest["cells"]:
        instance, variant, run = cell["instance"], cell["variant"], int(cell["run"])
        if variant not in variant_order:
            variant_order.append(variant)
        if cell["status"] != "ok" or not cell.get("trace"):
            excluded.append(
                ExcludedTrace(instance, variant, run, cell.get("error") or "run failed")
            )
            continue
        try:
            df = _read_trace(root / cell["trace"])
        except FileNotFoundError:
            excluded.append(ExcludedTrace(instance, variant, run, "trace file missing"))
            continue
        except (ValueError, pd.errors.ParserError) as e:
            excluded.append(ExcludedTrace(instance, variant, run, f"corrupt trace: {e}"))
            continue
        frames.append(df.assign(instance=instance, variant=variant, run=run))
        final_rows.append(
            {
                "instance": instance,
                "variant": variant,
                "run": run,
                "seed": int(cell["seed"]),
                "final_fitness": int(df["best_fitness"].min()),
            }
        )

    if not frames:
        raise ValueError(f"No usable trace in {results_dir}")

    traces = pd.concat(frames, ignore_index=True)
    curves = (
        traces.groupby(["instance", "variant", "generation"], sort=False)
        .agg(
            mean_best_fitness=("best_fitness", "mean"),
            mean_mean_fitness=("mean_fitness", "mean"),
            runs=("run", "count"),
        )
        .reset_index()
    )
    finals = pd.DataFrame(final_rows)

    summaries = []
    comparisons = []
    for instance in dict.fromkeys(finals["instance"]):
        samples: dict[str, list[float]] = {}
        for variant in variant_order:
            values = finals[(finals["instance"] == instance) & (finals["variant"] == variant)]
            if values.empty:
                continue
            scores = [float(v) for v in values["final_fitness"]]
            samples[variant] = scores
            summaries.append(
                VariantSummary(
                    instance=instance,
                    variant=variant,
                    runs=len(scores),
                    mean_final=float(np.mean(scores)),
                    median_final=float(np.median(scores)),
                    best_final=int(min(scores)),
                )
            )
        for a_id, b_id in combinations(samples, 2):
            result = wilcoxon_rank_sum(samples[a_id], samples[b_id])
            comparisons.append(
                PairComparison(
                    instance=instance,
                    variant_a=a_id,
                    variant_b=b_id,
                    statistic=result.statistic,
                    p_value=result.p_value,
                    exact=result.exact,
                    verdict=_verdict(
                        a_id, samples[a_id], b_id, samples[b_id], result.p_value
                    ),
                )
            )

    report = ComparisonReport(summaries, comparisons, curves, finals, excluded)
    write_report(report, out_dir if out_dir is not None else root)
    return report


def write_report(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    """Write the aggregate CSVs and return their paths."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    comparisons = pd.DataFrame(
        [
            (c.instance, c.variant_a, c.variant_b, c.statistic, c.p_value, c.exact, c.verdict)
            for c in report.comparisons
        ],
        columns=[
            "instance",
            "variant_a",
            "variant_b",
            "statistic",
            "p_value",
            "exact",
            "verdict",
        ],
    )
    paths = [target / CURVES_FILE, target / FINAL_FILE, target / COMPARISONS_FILE]
    report.curves.to_csv(paths[0], index=False, float_format="%.6f")
    report.finals.to_csv(paths[1], index=False)
    comparisons.to_csv(paths[2], index=False, float_format="%.6g")
    return paths
