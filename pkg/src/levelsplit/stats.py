"""Summaries and rate diagnostics for batches of splitting runs.

Aggregation is deliberately order-insensitive: records are sorted by
run index and reduced with exact summation, so a batch computed by any
number of workers, or with its records shuffled, produces bitwise
identical statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class InstabilityError(RuntimeError):
    """Raised when a batch produces no usable estimates because runs
    keep exhausting the population cap."""


@dataclass(frozen=True)
class EstimateSummary:
    """Batch-level view of independent splitting runs.

    Moment fields (mean, std_error, confidence interval) are computed
    over uncapped runs only; a capped run has no meaningful estimate.
    The population fields cover every run, capped ones included, since
    the work done is real either way.
    """

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    runs: int
    capped_runs: int
    avg_max_population: float
    sd_max_population: float
    peak_population: int
    wall_time_s: float


def _sample_sd(values: Sequence[float], mean: float) -> float:
    if len(values) < 2:
        return 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return math.sqrt(var)


def summarize(records: Sequence, wall_time_s: float = 0.0) -> EstimateSummary:
    """Reduce run records to an estimate with its error bars and the
    population profile.

    Needs at least two uncapped runs for a standard error.  A batch
    where every run capped carries no information about the target
    probability at all, only about the scheme's population growth, so
    that case raises InstabilityError rather than returning numbers.
    """
    if not records:
        raise ValueError("no records to summarize")
    ordered = sorted(records, key=lambda r: r.run_index)
    uncapped = [r for r in ordered if not r.capped]
    if not uncapped:
        raise InstabilityError(
            f"all {len(ordered)} runs hit the population cap; "
            "the splitting scheme looks unstable for this problem"
        )
    if len(uncapped) < 2:
        raise ValueError(
            f"need at least two uncapped runs for a standard error, got {len(uncapped)}"
        )
    estimates = [r.estimate for r in uncapped]
    k = len(estimates)
    mean = math.fsum(estimates) / k
    sd = _sample_sd(estimates, mean)
    std_error = sd / math.sqrt(k)
    pops = [r.max_population for r in ordered]
    avg_pop = math.fsum(pops) / len(pops)
    return EstimateSummary(
        mean=mean,
        std_error=std_error,
        ci_low=mean - 1.96 * std_error,
        ci_high=mean + 1.96 * std_error,
        runs=len(ordered),
        capped_runs=len(ordered) - k,
        avg_max_population=avg_pop,
        sd_max_population=_sample_sd(pops, avg_pop),
        peak_population=max(pops),
        wall_time_s=wall_time_s,
    )


def decay_rate(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of -log p against n.

    ``points`` holds (n, probability) pairs, probabilities strictly
    positive.  Two or more distinct n values are required.
    """
    if len(points) < 2:
        raise ValueError("need at least two (n, probability) points")
    xs = [float(n) for n, _ in points]
    ys = []
    for n, p in points:
        if not (p > 0.0 and math.isfinite(p)):
            raise ValueError(f"probability at n={n} must be positive and finite, got {p!r}")
        ys.append(-math.log(p))
    x_mean = math.fsum(xs) / len(xs)
    y_mean = math.fsum(ys) / len(ys)
    sxx = math.fsum((x - x_mean) ** 2 for x in xs)
    if sxx == 0.0:
        raise ValueError("points need at least two distinct n values")
    sxy = math.fsum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    return sxy / sxx


def second_moment_rate(records: Sequence, n: int) -> float:
    """Empirical decay rate of the estimator's second moment,
    -(1/n) log mean(s^2) over uncapped runs.

    By Jensen this is at most twice the first-moment rate; equality in
    the limit is the signature of an asymptotically optimal scheme.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    ordered = sorted(records, key=lambda r: r.run_index)
    squares = [r.estimate * r.estimate for r in ordered if not r.capped]
    if not squares:
        raise InstabilityError("no uncapped runs to take moments over")
    mean_sq = math.fsum(squares) / len(squares)
    if mean_sq <= 0.0:
        raise ValueError("every uncapped run produced a zero estimate; no rate to report")
    return -math.log(mean_sq) / n
