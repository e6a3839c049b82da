"""Aggregation and reporting: correctness rates, buckets, pairwise bands."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intopt.bench import make_perf_record
from intopt.errors import KeyMismatch
from intopt.report import (
    DEFAULT_EQUAL_BAND,
    SPEEDUP_THRESHOLDS,
    aggregate,
    compare_pairwise,
    format_percent,
    load_results,
    render_markdown,
)
from intopt.verify import VerificationVerdict


def _rec(pid, speedup, correct=True):
    # Back out times that produce the requested speedup exactly.
    if speedup == 0:
        return make_perf_record(pid, correct=False, avg_ns_base=0.0, avg_ns_opt=0.0)
    return make_perf_record(pid, correct=correct, avg_ns_base=speedup * 10.0, avg_ns_opt=10.0)


def _verdicts(records, method="diff_test"):
    return {
        r.program_id: VerificationVerdict(
            method=method,
            status="equivalent" if r.correct else "fuzz_crash",
        )
        for r in records
    }


def test_aggregate_known_example():
    # Speedups {0, 1, 2, 3}: mean 1.5 (zeros included), buckets 2/2/1.
    records = [_rec("a", 0), _rec("b", 1.0), _rec("c", 2.0), _rec("d", 3.0)]
    report = aggregate(records, _verdicts(records))
    assert report.n_programs == 4
    assert report.avg_speedup == pytest.approx(1.5)
    assert report.bucket_counts[1.1] == (2, 0.5)
    assert report.bucket_counts[1.5] == (2, 0.5)
    assert report.bucket_counts[2.0] == (1, 0.25)
    assert report.correctness_combined == pytest.approx(0.75)
    # None of these came from translation validation.
    assert report.correctness_alive2 == 0.0


def test_aggregate_alive2_counted_separately():
    records = [_rec("a", 1.2), _rec("b", 1.3)]
    verdicts = {
        "a": VerificationVerdict(method="alive2", status="equivalent"),
        "b": VerificationVerdict(method="diff_test", status="equivalent"),
    }
    report = aggregate(records, verdicts)
    assert report.correctness_alive2 == pytest.approx(0.5)
    assert report.correctness_combined == pytest.approx(1.0)


def test_aggregate_bucket_is_strictly_greater():
    records = [_rec("a", 1.1)]
    report = aggregate(records, _verdicts(records))
    assert report.bucket_counts[1.1] == (0, 0.0)


def test_aggregate_rejects_mismatched_ids():
    records = [_rec("a", 1.0)]
    with pytest.raises(KeyMismatch):
        aggregate(records, {"b": VerificationVerdict(method="diff_test", status="equivalent")})


def test_aggregate_rejects_duplicates():
    records = [_rec("a", 1.0), _rec("a", 2.0)]
    with pytest.raises(KeyMismatch):
        aggregate(records, _verdicts(records[:1]))


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([], {})


def test_aggregate_json_shape():
    records = [_rec("a", 1.23456)]
    data = aggregate(records, _verdicts(records)).to_json()
    assert data["avg_speedup"] == 1.235
    assert data["avg_speedup_kind"] == "arithmetic_mean_including_zeros"
    assert set(data["buckets"]) == {"1.1", "1.5", "2.0"}


def test_format_percent():
    assert format_percent(181 / 200) == "90.5%"
    assert format_percent(1.0) == "100.0%"
    assert format_percent(0.0) == "0.0%"
    assert format_percent(1 / 3) == "33.3%"


def test_render_markdown():
    records = [_rec("a", 2.0), _rec("b", 0)]
    text = render_markdown(aggregate(records, _verdicts(records)))
    assert "| Programs | 2 |" in text
    assert "50.0%" in text
    assert "1.000x" in text  # mean of {2.0, 0} to three decimals


# --- pairwise comparison ----------------------------------------------------

def test_pairwise_band_inclusive_at_both_endpoints():
    a = [_rec("x", 0.98), _rec("y", 1.02)]
    b = [_rec("x", 1.0), _rec("y", 1.0)]
    result = compare_pairwise(a, b)
    assert (result.wins, result.ties, result.losses) == (0, 2, 0)


def test_pairwise_win_loss_just_outside_band():
    a = [_rec("x", 1.021), _rec("y", 0.979)]
    b = [_rec("x", 1.0), _rec("y", 1.0)]
    result = compare_pairwise(a, b)
    assert (result.wins, result.ties, result.losses) == (1, 0, 1)


def test_pairwise_zero_handling():
    a = [_rec("x", 0), _rec("y", 1.5)]
    b = [_rec("x", 0), _rec("y", 0)]
    result = compare_pairwise(a, b)
    assert result.ratios["x"] == 1.0  # both failed: tie
    assert result.ratios["y"] == float("inf")  # only b failed: win for a
    assert result.wins == 1 and result.ties == 1


def test_pairwise_rejects_mismatched_sides():
    with pytest.raises(KeyMismatch):
        compare_pairwise([_rec("x", 1.0)], [_rec("y", 1.0)])


def test_pairwise_rejects_bad_band():
    with pytest.raises(ValueError):
        compare_pairwise([], [], equal_band=(1.02, 0.98))


speedups = st.lists(
    st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=30
)


@given(speedups)
def test_aggregate_invariants(values):
    records = [_rec(f"p{i}", v) for i, v in enumerate(values)]
    report = aggregate(records, _verdicts(records))
    counts = [report.bucket_counts[t][0] for t in SPEEDUP_THRESHOLDS]
    # Buckets are nested: a >2.0x speedup is also >1.5x and >1.1x.
    assert counts[0] >= counts[1] >= counts[2]
    # The upper bound tolerates one ulp of summation rounding.
    assert 0 <= report.avg_speedup <= max(r.speedup for r in records) * (1 + 1e-12)
    for _, (count, fraction) in report.bucket_counts.items():
        assert fraction == count / report.n_programs


@given(speedups, st.randoms())
def test_pairwise_partition_invariant(values, rng):
    a = [_rec(f"p{i}", v) for i, v in enumerate(values)]
    b = [_rec(f"p{i}", rng.uniform(0, 100)) for i in range(len(values))]
    result = compare_pairwise(a, b)
    assert result.wins + result.ties + result.losses == len(values)
    assert len(result.ratios) == len(values)


@given(speedups)
def test_pairwise_self_comparison_is_all_ties(values):
    a = [_rec(f"p{i}", v) for i, v in enumerate(values)]
    result = compare_pairwise(a, a)
    assert result.ties == len(values)
    assert result.wins == result.losses == 0


# --- results file loading ---------------------------------------------------

def test_load_results_roundtrip(tmp_path):
    records = [_rec("a", 2.0), _rec("b", 0)]
    verdicts = _verdicts(records)
    path = tmp_path / "results.jsonl"
    lines = [
        json.dumps({"perf": r.to_json(), "verdict": verdicts[r.program_id].to_json()})
        for r in records
    ]
    path.write_text("\n".join(lines) + "\n\n")
    loaded_records, loaded_verdicts = load_results(path)
    assert [r.program_id for r in loaded_records] == ["a", "b"]
    assert loaded_records[0].speedup == 2.0
    assert loaded_verdicts["a"].is_equivalent
    assert not loaded_verdicts["b"].is_equivalent
    # Loaded data aggregates identically to the originals.
    assert aggregate(loaded_records, loaded_verdicts).to_json() == aggregate(
        records, verdicts
    ).to_json()
