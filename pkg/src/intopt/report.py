"""Aggregation of verification verdicts and perf records into the summary
tables: correctness rates, mean speedup, threshold buckets, and pairwise
win/tie/loss comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .bench import PerfRecord
from .errors import KeyMismatch
from .verify import VerificationVerdict

SPEEDUP_THRESHOLDS = (1.1, 1.5, 2.0)
DEFAULT_EQUAL_BAND = (0.98, 1.02)


@dataclass
class EvaluationReport:
    n_programs: int
    correctness_alive2: float
    correctness_combined: float
    avg_speedup: float
    bucket_counts: dict  # threshold -> (count, fraction)
    per_program: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_programs": self.n_programs,
            "correctness_alive2": self.correctness_alive2,
            "correctness_combined": self.correctness_combined,
            "avg_speedup": round(self.avg_speedup, 3),
            # arithmetic mean over all programs; incorrect programs count
            # as 0 and pull the average down
            "avg_speedup_kind": "arithmetic_mean_including_zeros",
            "buckets": {
                str(t): {"count": c, "fraction": f}
                for t, (c, f) in sorted(self.bucket_counts.items())
            },
            "per_program": [r.to_json() for r in self.per_program],
        }


@dataclass
class PairwiseComparison:
    wins: int
    ties: int
    losses: int
    ratios: dict = field(default_factory=dict)  # program_id -> ratio

    def to_json(self) -> dict:
        return {
            "wins": self.wins,
            "ties": self.ties,
            "losses": self.losses,
            "ratios": {k: round(v, 3) for k, v in sorted(self.ratios.items())},
        }


def aggregate(
    records: list[PerfRecord],
    verdicts: dict[str, VerificationVerdict],
) -> EvaluationReport:
    """Summary statistics over one evaluation run.

    *verdicts* maps program_id to its verification verdict; the key sets
    must match the records exactly.
    """
    record_ids = {r.program_id for r in records}
    if len(record_ids) != len(records):
        raise KeyMismatch("duplicate program ids in records")
    if record_ids != set(verdicts):
        missing = record_ids ^ set(verdicts)
        raise KeyMismatch(f"records and verdicts disagree on ids: {sorted(missing)}")
    n = len(records)
    if n == 0:
        raise ValueError("cannot aggregate zero records")
    alive2_ok = sum(
        1 for v in verdicts.values() if v.method == "alive2" and v.is_equivalent
    )
    combined_ok = sum(1 for v in verdicts.values() if v.is_equivalent)
    avg = sum(r.speedup for r in records) / n
    buckets = {}
    for threshold in SPEEDUP_THRESHOLDS:
        count = sum(1 for r in records if r.speedup > threshold)
        buckets[threshold] = (count, count / n)
    return EvaluationReport(
        n_programs=n,
        correctness_alive2=alive2_ok / n,
        correctness_combined=combined_ok / n,
        avg_speedup=avg,
        bucket_counts=buckets,
        per_program=sorted(records, key=lambda r: r.program_id),
    )


def compare_pairwise(
    a: list[PerfRecord],
    b: list[PerfRecord],
    equal_band: tuple[float, float] = DEFAULT_EQUAL_BAND,
) -> PairwiseComparison:
    """Per-program speedup ratio a/b classified as win, tie, or loss for
    side a.  The equal band is inclusive at both endpoints."""
    lo, hi = equal_band
    if not (0 < lo <= hi):
        raise ValueError(f"invalid equal band [{lo}, {hi}]")
    a_by_id = {r.program_id: r for r in a}
    b_by_id = {r.program_id: r for r in b}
    if set(a_by_id) != set(b_by_id):
        missing = set(a_by_id) ^ set(b_by_id)
        raise KeyMismatch(f"pairwise sides disagree on ids: {sorted(missing)}")
    wins = ties = losses = 0
    ratios = {}
    for pid, ra in a_by_id.items():
        rb = b_by_id[pid]
        if rb.speedup == 0 and ra.speedup == 0:
            ratio = 1.0
        elif rb.speedup == 0:
            ratio = float("inf")
        else:
            ratio = ra.speedup / rb.speedup
        ratios[pid] = ratio
        if lo <= ratio <= hi:
            ties += 1
        elif ratio > hi:
            wins += 1
        else:
            losses += 1
    return PairwiseComparison(wins=wins, ties=ties, losses=losses, ratios=ratios)


def format_percent(fraction: float) -> str:
    """90.5% style with one decimal place."""
    return f"{fraction * 100:.1f}%"


def render_markdown(report: EvaluationReport) -> str:
    lines = [
        "| Metric | Value |",
        "| --- | --- |",
        f"| Programs | {report.n_programs} |",
        f"| Correct (translation validation) | "
        f"{format_percent(report.correctness_alive2)} |",
        f"| Correct (combined) | {format_percent(report.correctness_combined)} |",
        f"| Avg. speedup (arithmetic mean, zeros included) | "
        f"{report.avg_speedup:.3f}x |",
    ]
    for threshold, (count, fraction) in sorted(report.bucket_counts.items()):
        lines.append(
            f"| Speedup > {threshold}x | {count} ({format_percent(fraction)}) |"
        )
    return "\n".join(lines) + "\n"


def load_results(path: str | Path) -> tuple[list[PerfRecord], dict[str, VerificationVerdict]]:
    """Read a results.jsonl file: one record+verdict object per line."""
    records = []
    verdicts = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        record = PerfRecord.from_json(obj["perf"])
        v = obj["verdict"]
        records.append(record)
        verdicts[record.program_id] = VerificationVerdict(
            method=v["method"],
            status=v["status"],
            fuzz_runs_completed=v.get("fuzz_runs_completed", 0),
            crash_input=v.get("crash_input"),
        )
    return records, verdicts
