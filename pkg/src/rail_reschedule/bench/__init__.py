"""Experiment plans, runs, statistics and diagrams."""

from rail_reschedule.bench.plan import ExperimentPlan, Variant, validate_plan
from rail_reschedule.bench.report import ComparisonReport, summarize
from rail_reschedule.bench.runner import run_plan
from rail_reschedule.bench.space_time import DiagramOptions, emit_space_time
from rail_reschedule.bench.stats import wilcoxon_rank_sum


__all__ = [
    "ComparisonReport",
    "DiagramOptions",
    "ExperimentPlan",
    "Variant",
    "emit_space_time",
    "run_plan",
    "summarize",
    "validate_plan",
    "wilcoxon_rank_sum",
]
