"""Batch summaries and rate diagnostics."""

import math
import random
from dataclasses import dataclass

import pytest

from levelsplit import stats


@dataclass(frozen=True)
class FakeRecord:
    run_index: int
    estimate: float
    max_population: int
    steps: int = 0
    capped: bool = False


def _records(estimates, start_index=0):
    return [
        FakeRecord(run_index=start_index + i, estimate=e, max_population=1 + i)
        for i, e in enumerate(estimates)
    ]


def test_summary_of_coin_flips() -> None:
    summary = stats.summarize(_records([0.0, 0.0, 1.0, 1.0]))
    assert summary.mean == 0.5
    # sample variance 1/3, so the standard error is 1/(2 sqrt(3))
    assert abs(summary.std_error - 0.28867513459481287) < 1e-15
    assert abs(summary.ci_low - (0.5 - 1.96 * summary.std_error)) < 1e-15
    assert abs(summary.ci_high - (0.5 + 1.96 * summary.std_error)) < 1e-15
    assert summary.runs == 4 and summary.capped_runs == 0
    assert summary.peak_population == 4
    assert summary.avg_max_population == 2.5


def test_summary_is_order_insensitive() -> None:
    rng = random.Random(13)
    records = _records([rng.random() for _ in range(50)])
    shuffled = records[:]
    rng.shuffle(shuffled)
    assert stats.summarize(records) == stats.summarize(shuffled)


def test_capped_runs_are_excluded_from_moments_only() -> None:
    records = _records([1.0, 3.0])
    records.append(FakeRecord(run_index=2, estimate=math.nan, max_population=999, capped=True))
    summary = stats.summarize(records)
    assert summary.mean == 2.0
    assert summary.runs == 3 and summary.capped_runs == 1
    # population statistics still see the capped run's work
    assert summary.peak_population == 999
    assert summary.avg_max_population == (1 + 2 + 999) / 3


def test_summarize_error_cases() -> None:
    with pytest.raises(ValueError):
        stats.summarize([])
    all_capped = [
        FakeRecord(run_index=i, estimate=math.nan, max_population=10, capped=True)
        for i in range(5)
    ]
    with pytest.raises(stats.InstabilityError):
        stats.summarize(all_capped)
    one_usable = all_capped + [FakeRecord(run_index=9, estimate=0.5, max_population=3)]
    with pytest.raises(ValueError):
        stats.summarize(one_usable)


def test_decay_rate_recovers_exact_exponentials() -> None:
    rng = random.Random(4)
    for _ in range(50):
        rate = rng.uniform(0.1, 3.0)
        offset = rng.uniform(-2.0, 2.0)
        points = [(n, math.exp(offset - rate * n)) for n in (5, 11, 20, 28)]
        assert abs(stats.decay_rate(points) - rate) < 1e-10


def test_decay_rate_on_reference_oracle_values() -> None:
    points = [(10, 9.643691e-08), (20, 1.595030e-15), (30, 2.637889e-23)]
    rate = stats.decay_rate(points)
    assert abs(rate - 1.7917550668995363) < 1e-12
    assert abs(rate - math.log(6.0)) < 1e-4


def test_decay_rate_input_validation() -> None:
    with pytest.raises(ValueError):
        stats.decay_rate([(10, 1e-3)])
    with pytest.raises(ValueError):
        stats.decay_rate([(10, 1e-3), (20, 0.0)])
    with pytest.raises(ValueError):
        stats.decay_rate([(10, 1e-3), (10, 1e-4)])


def test_second_moment_rate_on_constant_estimates() -> None:
    records = _records([math.exp(-3.0)] * 4)
    assert abs(stats.second_moment_rate(records, 2) - 3.0) < 1e-12


def test_second_moment_rate_errors() -> None:
    with pytest.raises(ValueError):
        stats.second_moment_rate(_records([1.0]), 0)
    with pytest.raises(stats.InstabilityError):
        stats.second_moment_rate(
            [FakeRecord(run_index=0, estimate=math.nan, max_population=5, capped=True)], 3
        )
    with pytest.raises(ValueError):
        stats.second_moment_rate(_records([0.0, 0.0]), 3)


def test_second_moment_rate_obeys_jensen() -> None:
    # mean(s^2) >= mean(s)^2 makes the bound hold for every sample
    rng = random.Random(77)
    for _ in range(50):
        n = rng.randrange(2, 40)
        estimates = [rng.random() * math.exp(-rng.uniform(0, n)) for _ in range(30)]
        records = _records(estimates)
        first = -math.log(stats.summarize(records).mean) / n
        second = stats.second_moment_rate(records, n)
        assert second <= 2.0 * first + 1e-12
