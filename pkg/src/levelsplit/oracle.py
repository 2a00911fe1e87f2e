"""Analysis-side answers to compare simulation output against.

Three independent routes live here:

* exact hitting probabilities for the queueing models, from sweep-based
  solves of the embedded jump chain's linear system;
* closed-form probabilities for the sample-mean problem, by
  inclusion-exclusion over half-space margins;
* a full-branching estimator that splits every particle at every stage,
  whose cost is exponential in the level count but whose weight algebra
  satisfies exact identities, making it a strong cross-check for the
  main estimator at toy sizes.

Transition probabilities are read from the same jump table the
simulator draws against, so the solved chain and the simulated chain
cannot drift apart.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from scipy import integrate
from scipy.stats import norm

from . import engine, importance, mechanism, models

DEFAULT_LEAF_BUDGET = 1_000_000


# ---------------------------------------------------------------------------
# embedded-chain transitions


def transition_probabilities(state, spec) -> list[tuple[tuple, float]]:
    """Jump-chain transition law out of one state, computed from the
    same rate table the simulator uses."""
    table = models.jump_table(spec)
    if isinstance(spec, models.TandemSpec):
        x1, x2 = state
        total, cut_arrival, cut_first = table[(x1 > 0, x2 > 0)]
        moves = []
        p_arrival = cut_arrival / total
        if p_arrival > 0.0:
            moves.append(((x1 + 1, x2), p_arrival))
        p_first = (cut_first - cut_arrival) / total
        if p_first > 0.0:
            moves.append(((x1 - 1, x2 + 1), p_first))
        p_second = (total - cut_first) / total
        if p_second > 0.0:
            moves.append(((x1, x2 - 1), p_second))
        return moves
    if isinstance(spec, models.ModulatedTandemSpec):
        x1, x2, mode = state
        total, cut_arrival, cut_first, cut_second = table[(mode, x1 > 0, x2 > 0)]
        moves = []
        p_arrival = cut_arrival / total
        if p_arrival > 0.0:
            moves.append(((x1 + 1, x2, mode), p_arrival))
        p_first = (cut_first - cut_arrival) / total
        if p_first > 0.0:
            moves.append(((x1 - 1, x2 + 1, mode), p_first))
        p_second = (cut_second - cut_first) / total
        if p_second > 0.0:
            moves.append(((x1, x2 - 1, mode), p_second))
        p_switch = (total - cut_second) / total
        if p_switch > 0.0:
            moves.append(((x1, x2, 3 - mode), p_switch))
        return moves
    raise TypeError(f"hitting probabilities need a queueing model, got {type(spec).__name__}")


def _interior_states(spec, truncation: Optional[int]) -> list[tuple]:
    """Interior states in sweep order: decreasing distance-to-start so
    information flows from the target backwards in few sweeps."""
    n = spec.n
    modes = (1, 2) if isinstance(spec, models.ModulatedTandemSpec) else (None,)
    shared = spec.buffers == "shared"
    states = []
    if shared:
        # finite: everything strictly between the empty system and the
        # absorbing total-population boundary
        for total in range(n - 1, 0, -1):
            for x1 in range(total, -1, -1):
                x2 = total - x1
                for mode in modes:
                    states.append((x1, x2) if mode is None else (x1, x2, mode))
        return states
    bound = truncation if truncation is not None else 4 * n
    for total in range(2 * bound, 0, -1):
        for x1 in range(min(total, bound), -1, -1):
            x2 = total - x1
            if x2 > bound:
                continue
            if x1 >= n and x2 >= n:
                continue
            for mode in modes:
                states.append((x1, x2) if mode is None else (x1, x2, mode))
    return states


@dataclass(frozen=True, eq=False)
class LinearSystemSolution:
    """Hitting probabilities of the target before the taboo set.

    ``probabilities`` maps interior states to their value; target
    states are 1 by definition, the taboo state 0, and anything beyond
    the truncation bound is treated as killed, which underestimates the
    truth by an amount the ``sensitivity`` field bounds empirically
    (relative change when the truncation grows).
    ``residual`` is the largest relative defect |p - Pp| / p over
    interior states.
    """

    spec: models.ModelSpec
    probabilities: dict
    start_state: tuple
    start_probability: float
    truncation: Optional[int]
    residual: float
    sweeps: int
    sensitivity: Optional[float]

    def probability(self, state) -> float:
        if models.in_target(state, self.spec):
            return 1.0
        if models.in_taboo(state, self.spec):
            return 0.0
        return self.probabilities.get(tuple(state), 0.0)


def _solve_states(
    spec,
    truncation: Optional[int],
    update_tol: float,
    residual_target: float,
    max_sweeps: int,
) -> tuple[dict, float, int]:
    states = _interior_states(spec, truncation)
    index = {s: i for i, s in enumerate(states)}
    count = len(states)
    links: list[tuple] = [()] * count
    const = [0.0] * count
    for i, state in enumerate(states):
        c = 0.0
        link = []
        for nxt, prob in transition_probabilities(state, spec):
            if models.in_target(nxt, spec):
                c += prob
            elif models.in_taboo(nxt, spec):
                continue
            else:
                j = index.get(nxt)
                if j is not None:
                    link.append((j, prob))
                # else: beyond the truncation bound, treated as killed
        const[i] = c
        links[i] = tuple(link)

    values = [0.0] * count
    sweeps = 0
    while True:
        if sweeps >= max_sweeps:
            raise RuntimeError(
                f"hitting-probability solve did not converge within {max_sweeps} sweeps "
                f"(n={spec.n}, truncation={truncation})"
            )
        sweeps += 1
        worst = 0.0
        for i in range(count):
            new = const[i]
            for j, w in links[i]:
                new += w * values[j]
            old = values[i]
            values[i] = new
            if new != old:
                rel = abs(new - old) / new if new > 0.0 else 1.0
                if rel > worst:
                    worst = rel
        if worst >= update_tol:
            continue
        residual = 0.0
        for i in range(count):
            rhs = const[i]
            for j, w in links[i]:
                rhs += w * values[j]
            p = values[i]
            if p > 0.0:
                rel = abs(p - rhs) / p
            else:
                rel = 0.0 if rhs == 0.0 else math.inf
            if rel > residual:
                residual = rel
        if residual < residual_target:
            return {s: values[i] for i, s in enumerate(states)}, residual, sweeps


def exact_hitting_probability(
    spec: models.ModelSpec,
    truncation: Optional[int] = None,
    *,
    sensitivity_increment: int = 1,
    update_tol: float = 1e-14,
    residual_target: float = 1e-12,
    max_sweeps: int = 200_000,
) -> LinearSystemSolution:
    """Solve for the probability of hitting the target before the system
    empties, by relaxation sweeps over the embedded jump chain.

    Shared-buffer chains are finite, so ``truncation`` must be left
    None for them.  Separate-buffer chains are unbounded and get a
    box truncation (default 4n per coordinate) with everything beyond
    treated as killed; the reported ``sensitivity`` re-solves with the
    bound grown by ``sensitivity_increment`` and records the relative
    change of the start value (0 disables the second solve).
    """
    if not isinstance(spec, (models.TandemSpec, models.ModulatedTandemSpec)):
        raise TypeError(f"hitting probabilities need a queueing model, got {type(spec).__name__}")
    shared = spec.buffers == "shared"
    if shared:
        if truncation is not None:
            raise ValueError("the shared-buffer chain is finite; truncation does not apply")
        bound = None
    else:
        bound = truncation if truncation is not None else 4 * spec.n
        if bound < spec.n:
            raise ValueError(
                f"truncation {bound} cannot be below n={spec.n}, the target would be cut off"
            )
    probabilities, residual, sweeps = _solve_states(
        spec, bound, update_tol, residual_target, max_sweeps
    )
    start = models.start_state(spec)
    start_probability = probabilities.get(start, 0.0)
    sensitivity = None
    if bound is not None and sensitivity_increment > 0:
        grown, _, _ = _solve_states(
            spec, bound + sensitivity_increment, update_tol, residual_target, max_sweeps
        )
        reference = grown.get(start, 0.0)
        if reference > 0.0:
            sensitivity = abs(start_probability - reference) / reference
        else:
            sensitivity = math.inf
    return LinearSystemSolution(
        spec=spec,
        probabilities=probabilities,
        start_state=start,
        start_probability=start_probability,
        truncation=bound,
        residual=residual,
        sweeps=sweeps,
        sensitivity=sensitivity,
    )


# ---------------------------------------------------------------------------
# sample-mean probabilities


def _bivariate_upper_tail(a1: float, a2: float, rho: float) -> float:
    """P(U1 >= a1, U2 >= a2) for standard bivariate normals with
    correlation rho, by one-dimensional quadrature."""
    if rho >= 1.0 - 1e-12:
        return float(norm.sf(max(a1, a2)))
    if rho <= -1.0 + 1e-12:
        # perfectly anti-correlated: both tails only overlap when the
        # thresholds allow u and -u simultaneously
        return float(norm.sf(a1) - norm.cdf(-a2)) if a1 < -a2 else 0.0
    s = math.sqrt(1.0 - rho * rho)

    def integrand(u: float) -> float:
        return norm.pdf(u) * norm.sf((a2 - rho * u) / s)

    value, _ = integrate.quad(integrand, a1, math.inf, epsabs=1e-300, epsrel=1e-11, limit=400)
    return float(value)


def gaussian_exact(spec: models.GaussianMeanSpec) -> float:
    """Probability that the sample mean of n standard normal vectors
    lands in the union of half-spaces {<p_i, x> >= 1}, by
    inclusion-exclusion over the margins.

    Each margin <p_i, S_n>/n is Gaussian, so the one-set terms are
    normal tails at sqrt(n)/|p_i| and the pairwise term is a bivariate
    tail with correlation <p_1, p_2>/(|p_1||p_2|).
    """
    if not isinstance(spec, models.GaussianMeanSpec):
        raise TypeError(f"gaussian_exact needs a sample-mean model, got {type(spec).__name__}")
    n = spec.n
    norms = [math.sqrt(math.fsum(c * c for c in p)) for p in spec.normals]
    thresholds = [math.sqrt(n) / size for size in norms]
    if len(spec.normals) == 1:
        return float(norm.sf(thresholds[0]))
    p1, p2 = spec.normals
    rho = math.fsum(a * b for a, b in zip(p1, p2)) / (norms[0] * norms[1])
    single = float(norm.sf(thresholds[0])) + float(norm.sf(thresholds[1]))
    joint = _bivariate_upper_tail(thresholds[0], thresholds[1], rho)
    return single - joint


# ---------------------------------------------------------------------------
# full-branching estimator


@dataclass(frozen=True)
class SfbRun:
    """One full-branching run: the estimate, the stage count, and the
    final generation's size and summed squared weights (the latter obeys
    an exact moment identity, handy for cross-checks)."""

    estimate: float
    levels: int
    leaf_count: int
    weight_square_sum: float


def run_sfb(
    spec: models.ModelSpec,
    scheme: importance.ImportanceScheme,
    split_mechanism: mechanism.SplittingMechanism,
    seed: int,
    leaf_budget: float = DEFAULT_LEAF_BUDGET,
) -> SfbRun:
    """Run the full-branching variant: every particle splits at every
    stage, killed particles are absorbed in place, and the estimate sums
    final-generation weights sitting in the target.

    The expected final generation holds (mean offspring)^levels
    particles, so the run refuses to start when that exceeds
    ``leaf_budget``; this estimator exists for analysis at toy sizes,
    not production use.
    """
    start = models.start_state(spec)
    if models.in_target(start, spec):
        return SfbRun(estimate=1.0, levels=0, leaf_count=1, weight_square_sum=1.0)
    position = models.scaled_position(start, spec)
    if scheme.subsolution.dim != len(position):
        raise ValueError(
            f"subsolution dimension {scheme.subsolution.dim} does not match "
            f"the model's scaled position dimension {len(position)}"
        )
    levels = importance.level_count(scheme, spec.n, position)
    expected_leaves = mechanism.mean_offspring(split_mechanism) ** levels
    if expected_leaves > leaf_budget:
        raise ValueError(
            f"full branching over {levels} stages averages {expected_leaves:.4g} leaves, "
            f"beyond the budget {leaf_budget:.4g}; refusing to run"
        )
    n = spec.n
    lineage = 1
    gen = [(start, 1.0, engine.particle_stream(seed, 0))]
    for stage in range(1, levels + 1):
        nxt = []
        for state, weight, rng in gen:
            while True:
                if models.in_taboo(state, spec):
                    break
                pos = models.scaled_position(state, spec)
                if importance.stage_stopped(
                    scheme, n, levels, stage, pos, models.in_target(state, spec)
                ):
                    break
                state = models.step(state, spec, rng)
            count, child_weights = mechanism.sample(split_mechanism, rng)
            for k in range(count):
                nxt.append((state, weight * child_weights[k], engine.particle_stream(seed, lineage)))
                lineage += 1
        gen = nxt
    estimate = math.fsum(w for state, w, _ in gen if models.in_target(state, spec))
    square_sum = math.fsum(w * w for _, w, _ in gen)
    return SfbRun(
        estimate=estimate,
        levels=levels,
        leaf_count=len(gen),
        weight_square_sum=square_sum,
    )


# ---------------------------------------------------------------------------
# fixtures


def fixture_key(spec: models.ModelSpec) -> str:
    """Stable identifier for an oracle value: family, parameters, n."""
    params = asdict(spec)
    n = params.pop("n")
    return f"{spec.family}|{json.dumps(params, sort_keys=True)}|n={n}"


def fixture_entry(spec: models.ModelSpec, value: float, **extra) -> dict:
    entry = {
        "key": fixture_key(spec),
        "model": spec.family,
        "parameters": asdict(spec),
        "n": spec.n,
        "value": value,
    }
    entry.update(extra)
    return entry
