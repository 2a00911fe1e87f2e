"""Analysis oracles: linear solves, closed forms, full branching."""

import json
import math
import random

import pytest
from scipy.stats import norm

from levelsplit import engine, importance, mechanism, models, oracle

LOG2 = math.log(2.0)
MECH2 = mechanism.canonical(2.0)


def _scheme_for(spec, offspring_mean=2.0):
    sub = importance.optimal_subsolution(spec)
    return importance.importance_from_subsolution(sub, LOG2, offspring_mean)


def test_transition_probabilities_are_a_law() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=2.0, n=10)
    rng = random.Random(6)
    for _ in range(50):
        state = (rng.randrange(0, 5), rng.randrange(0, 5))
        if state == (0, 0):
            continue
        moves = oracle.transition_probabilities(state, spec)
        assert abs(math.fsum(p for _, p in moves) - 1.0) < 1e-12
        assert all(p > 0.0 for _, p in moves)
        # inactive servers contribute no moves
        targets = {nxt for nxt, _ in moves}
        if state[0] == 0:
            assert (state[0] - 1, state[1] + 1) not in targets
        if state[1] == 0:
            assert (state[0], state[1] - 1) not in targets


def test_shared_small_instance_is_exact() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=2)
    solution = oracle.exact_hitting_probability(spec)
    assert abs(solution.start_probability - 40.0 / 121.0) < 1e-15
    assert solution.residual < 1e-12
    assert solution.truncation is None and solution.sensitivity is None


def test_shared_reference_values() -> None:
    want = {30: 2.634256e-18, 40: 1.033985e-24, 50: 3.801225e-31}
    for n, value in want.items():
        spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=n)
        solution = oracle.exact_hitting_probability(spec)
        assert abs(solution.start_probability - value) / value < 1e-5
        assert solution.residual < 1e-12


def test_separate_reference_values() -> None:
    want = {10: 9.643691e-08, 20: 1.595030e-15, 30: 2.637889e-23}
    for n, value in want.items():
        spec = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=n, buffers="separate")
        solution = oracle.exact_hitting_probability(spec)
        assert abs(solution.start_probability - value) / value < 1e-5
        assert solution.truncation == 4 * n
        assert solution.sensitivity is not None and solution.sensitivity < 1e-6


def test_swapping_separate_service_rates_changes_little() -> None:
    fast_first = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=10, buffers="separate")
    slow_first = models.TandemSpec(arrival=1.0, mu1=2.0, mu2=3.0, n=10, buffers="separate")
    a = oracle.exact_hitting_probability(fast_first).start_probability
    b = oracle.exact_hitting_probability(slow_first).start_probability
    assert abs(a - b) / a < 1e-4


def test_truncation_doubling_is_negligible() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=10, buffers="separate")
    base = oracle.exact_hitting_probability(spec, truncation=40)
    doubled = oracle.exact_hitting_probability(spec, truncation=80, sensitivity_increment=0)
    rel = abs(base.start_probability - doubled.start_probability) / doubled.start_probability
    assert rel < 1e-6


def test_probability_is_monotone_in_n() -> None:
    previous = None
    for n in range(2, 9):
        spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=n)
        p = oracle.exact_hitting_probability(spec).start_probability
        if previous is not None:
            assert p < previous
        previous = p


def test_solution_probability_accessor() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=3, buffers="separate")
    solution = oracle.exact_hitting_probability(spec, truncation=6)
    assert solution.probability((3, 3)) == 1.0
    assert solution.probability((0, 0)) == 0.0
    assert solution.probability((1, 0)) == solution.start_probability
    # beyond the truncation box counts as killed
    assert solution.probability((7, 1)) == 0.0


def test_truncation_validation() -> None:
    shared = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=5)
    with pytest.raises(ValueError):
        oracle.exact_hitting_probability(shared, truncation=20)
    separate = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=5, buffers="separate")
    with pytest.raises(ValueError):
        oracle.exact_hitting_probability(separate, truncation=4)
    gauss = models.GaussianMeanSpec(normals=((1.0,),), n=5)
    with pytest.raises(TypeError):
        oracle.exact_hitting_probability(gauss)


def test_solver_reports_non_convergence() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=10)
    with pytest.raises(RuntimeError):
        oracle.exact_hitting_probability(spec, max_sweeps=1)


def test_modulated_reference_values() -> None:
    shared = models.ModulatedTandemSpec(
        arrival=(1.0, 1.0), mu1=(3.5, 4.5), mu2=(2.5, 4.5), switch=(0.2, 0.5), n=30
    )
    value = oracle.exact_hitting_probability(shared).start_probability
    assert abs(value - 6.3624e-13) / 6.3624e-13 < 1e-3
    separate = models.ModulatedTandemSpec(
        arrival=(1.0, 1.0), mu1=(3.5, 4.5), mu2=(2.5, 4.5), switch=(0.2, 0.5), n=10,
        buffers="separate",
    )
    value = oracle.exact_hitting_probability(separate).start_probability
    assert abs(value - 8.3576e-10) / 8.3576e-10 < 1e-3


def test_initial_mode_changes_the_start_probability() -> None:
    kwargs = dict(
        arrival=(1.0, 1.0), mu1=(3.5, 4.5), mu2=(2.5, 4.5), switch=(0.2, 0.5), n=6
    )
    p1 = oracle.exact_hitting_probability(
        models.ModulatedTandemSpec(initial_mode=1, **kwargs)
    ).start_probability
    p2 = oracle.exact_hitting_probability(
        models.ModulatedTandemSpec(initial_mode=2, **kwargs)
    ).start_probability
    assert p1 != p2
    # mode 2 serves faster here, so overflowing from it is harder
    assert p2 < p1


def test_gaussian_exact_single_margin() -> None:
    spec = models.GaussianMeanSpec(normals=((1.0,),), n=20)
    assert abs(oracle.gaussian_exact(spec) - float(norm.sf(math.sqrt(20.0)))) < 1e-18
    scaled = models.GaussianMeanSpec(normals=((1.25,),), n=5)
    want = float(norm.sf(math.sqrt(5.0) / 1.25))
    assert abs(oracle.gaussian_exact(scaled) - want) < 1e-12


def test_gaussian_exact_reference_values() -> None:
    want = {20: 7.744216e-06, 30: 4.320463e-08, 40: 2.539629e-10}
    for n, value in want.items():
        spec = models.GaussianMeanSpec(normals=((0.6, 0.8), (0.6, -0.8)), n=n)
        assert abs(oracle.gaussian_exact(spec) - value) / value < 1e-5


def test_gaussian_exact_inclusion_exclusion_bounds() -> None:
    spec = models.GaussianMeanSpec(normals=((0.6, 0.8), (0.6, -0.8)), n=10)
    union = oracle.gaussian_exact(spec)
    margins = [
        float(norm.sf(math.sqrt(10.0)))  # |p_i| = 1 for both rows
        for _ in spec.normals
    ]
    assert max(margins) <= union <= sum(margins)


def test_bivariate_tail_edges() -> None:
    tail = oracle._bivariate_upper_tail
    assert abs(tail(1.0, 0.5, 1.0) - float(norm.sf(1.0))) < 1e-15
    assert tail(1.0, 1.0, -1.0) == 0.0
    anti = tail(-2.0, -1.0, -1.0)
    assert abs(anti - (float(norm.sf(-2.0)) - float(norm.cdf(1.0)))) < 1e-15
    independent = tail(0.8, 1.3, 0.0)
    assert abs(independent - float(norm.sf(0.8)) * float(norm.sf(1.3))) < 1e-9
    # symmetry in the two thresholds
    assert abs(tail(0.3, 1.1, -0.28) - tail(1.1, 0.3, -0.28)) < 1e-9


def test_sfb_dyadic_example() -> None:
    # log(20)/log(2) = 4.32..., so five levels; with u = 2 every leaf
    # carries exactly 2^-5 and the squared weights sum to exactly 2^-5
    spec = models.TandemSpec(arrival=1.0, mu1=20.0, mu2=20.0, n=2)
    scheme = _scheme_for(spec)
    for seed in range(5):
        run = oracle.run_sfb(spec, scheme, MECH2, seed)
        assert run.levels == 5
        assert run.leaf_count == 32
        assert run.weight_square_sum == 0.03125
        quotient = run.estimate / 0.03125
        assert quotient == int(quotient)


def test_sfb_start_in_target() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=1)
    scheme = importance.importance_from_subsolution(
        importance.Subsolution(pieces=(importance.AffinePiece(1.0, (-1.0, -1.0)),)),
        LOG2,
        2.0,
    )
    run = oracle.run_sfb(spec, scheme, MECH2, seed=0)
    assert run == oracle.SfbRun(estimate=1.0, levels=0, leaf_count=1, weight_square_sum=1.0)


def test_sfb_refuses_oversized_instances() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)  # 63 levels
    scheme = _scheme_for(spec)
    with pytest.raises(ValueError, match="budget"):
        oracle.run_sfb(spec, scheme, MECH2, seed=0)


def test_sfb_mean_matches_linear_solve() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=2)
    scheme = _scheme_for(spec)
    values = [
        oracle.run_sfb(spec, scheme, MECH2, engine.run_seed_for(12, i)).estimate
        for i in range(4000)
    ]
    mean = math.fsum(values) / len(values)
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1))
    se = sd / math.sqrt(len(values))
    assert abs(mean - 40.0 / 121.0) < 4.0 * se


def test_fixture_keys_are_distinct_and_parseable() -> None:
    specs = [
        models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30),
        models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=40),
        models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=30, buffers="separate"),
        models.GaussianMeanSpec(normals=((0.6, 0.8),), n=30),
    ]
    keys = [oracle.fixture_key(spec) for spec in specs]
    assert len(set(keys)) == len(keys)
    entry = oracle.fixture_entry(specs[0], 2.63e-18, method="linear-solve")
    assert entry["key"] == keys[0]
    assert entry["method"] == "linear-solve"
    json.dumps(entry)  # must be exportable as-is
