"""Splitting mechanisms: the discrete law (q, r, w) applied when a
particle crosses a level.

Entry j of the law is picked with probability q_j; the particle is then
replaced by ``offspring[j]`` copies carrying weights ``weights[j]``.
The estimator stays unbiased exactly when E[sum_i w_i(M)] = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class SplittingMechanism:
    """Offspring law with per-child weights.

    ``max_offspring`` is the declared bound R on offspring counts; it
    defaults to the largest count in the table.
    """

    probabilities: tuple[float, ...]
    offspring: tuple[int, ...]
    weights: tuple[tuple[float, ...], ...]
    max_offspring: int = field(default=0)

    def __post_init__(self) -> None:
        if not (len(self.probabilities) == len(self.offspring) == len(self.weights)):
            raise ValueError("probabilities, offspring and weights must align")
        if not self.probabilities:
            raise ValueError("mechanism needs at least one entry")
        if any(q < 0.0 for q in self.probabilities):
            raise ValueError(f"negative probability in {self.probabilities!r}")
        if abs(math.fsum(self.probabilities) - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(self.probabilities)!r}, not 1")
        for count, ws in zip(self.offspring, self.weights):
            if not (isinstance(count, int) and count >= 0):
                raise ValueError(f"offspring counts must be nonnegative integers, got {count!r}")
            if len(ws) != count:
                raise ValueError(f"entry with {count} offspring carries {len(ws)} weights")
            if any(not (math.isfinite(w) and w >= 0.0) for w in ws):
                raise ValueError(f"weights must be finite and nonnegative, got {ws!r}")
        bound = max(self.offspring)
        if self.max_offspring == 0:
            object.__setattr__(self, "max_offspring", bound)
        elif self.max_offspring < bound:
            raise ValueError(
                f"max_offspring {self.max_offspring} below table maximum {bound}"
            )


def canonical(offspring_mean: float) -> SplittingMechanism:
    """The two-point mechanism with mean offspring u and all weights 1/u.

    Splits into ceil(u) copies with probability u - floor(u) and
    floor(u) copies otherwise, so the mean offspring count is exactly u.
    Among unbiased mechanisms with mean u this one minimizes
    E[sum_i w_i^2] (Hoelder equality), attaining 1/u.
    """
    u = float(offspring_mean)
    if not (math.isfinite(u) and u >= 1.0):
        raise ValueError(f"offspring mean must be >= 1, got {offspring_mean!r}")
    low = math.floor(u)
    high = math.ceil(u)
    w = 1.0 / u
    if low == high:
        return SplittingMechanism(
            probabilities=(1.0,),
            offspring=(low,),
            weights=((w,) * low,),
        )
    frac = u - low
    return SplittingMechanism(
        probabilities=(frac, high - u),
        offspring=(high, low),
        weights=((w,) * high, (w,) * low),
    )


def mean_offspring(mech: SplittingMechanism) -> float:
    """E[r(M)], the mean number of offspring per split."""
    return math.fsum(q * r for q, r in zip(mech.probabilities, mech.offspring))


def weight_second_moment(mech: SplittingMechanism) -> float:
    """E[sum_i w_i(M)^2], the quantity driving the second-moment rate."""
    return math.fsum(
        q * math.fsum(w * w for w in ws)
        for q, ws in zip(mech.probabilities, mech.weights)
    )


def unbiasedness_gap(mech: SplittingMechanism) -> float:
    """E[sum_i w_i(M)] - 1; zero for an unbiased mechanism."""
    return math.fsum(
        q * math.fsum(ws) for q, ws in zip(mech.probabilities, mech.weights)
    ) - 1.0


def is_unbiased(mech: SplittingMechanism, tol: float = 1e-12) -> bool:
    return abs(unbiasedness_gap(mech)) <= tol


def sample(mech: SplittingMechanism, rng: Random | None) -> tuple[int, tuple[float, ...]]:
    """Draw one (offspring count, weights) outcome.

    A one-entry law is deterministic and consumes no randomness, in
    which case ``rng`` may be None.
    """
    if len(mech.probabilities) == 1:
        return mech.offspring[0], mech.weights[0]
    u = rng.random()
    acc = 0.0
    last = len(mech.probabilities) - 1
    for j, q in enumerate(mech.probabilities):
        acc += q
        if u < acc or j == last:
            return mech.offspring[j], mech.weights[j]
    raise AssertionError("unreachable")
