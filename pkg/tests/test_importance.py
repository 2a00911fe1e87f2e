"""Subsolution candidates, level bookkeeping, and verification."""

import math
import random

import pytest

from levelsplit import importance, models

LOG2 = math.log(2.0)


def _scheme(subsolution, offspring_mean=2.0):
    return importance.importance_from_subsolution(subsolution, LOG2, offspring_mean)


def test_affine_piece_value() -> None:
    piece = importance.AffinePiece(offset=1.5, gradient=(-2.0, 0.5))
    assert piece.value_at((1.0, 2.0)) == 1.5 - 2.0 + 1.0
    with pytest.raises(ValueError):
        importance.AffinePiece(offset=math.nan, gradient=(1.0,))
    with pytest.raises(ValueError):
        importance.AffinePiece(offset=0.0, gradient=())


def test_combine_min_and_max_match_bruteforce() -> None:
    rng = random.Random(8)
    for _ in range(100):
        pieces = tuple(
            importance.AffinePiece(
                offset=rng.uniform(-2, 2),
                gradient=(rng.uniform(-2, 2), rng.uniform(-2, 2)),
            )
            for _ in range(rng.randrange(1, 5))
        )
        scale = rng.uniform(0.1, 1.0)
        point = (rng.uniform(-1, 2), rng.uniform(-1, 2))
        values = [p.value_at(point) for p in pieces]
        low = importance.Subsolution(pieces=pieces, scale=scale)
        high = importance.Subsolution(pieces=pieces, scale=scale, combine="max")
        assert low.value_at(point) == scale * min(values)
        assert high.value_at(point) == scale * max(values)


def test_subsolution_validation() -> None:
    piece = importance.AffinePiece(offset=1.0, gradient=(-1.0, -1.0))
    with pytest.raises(ValueError):
        importance.Subsolution(pieces=())
    with pytest.raises(ValueError):
        importance.Subsolution(
            pieces=(piece, importance.AffinePiece(offset=0.0, gradient=(1.0,)))
        )
    with pytest.raises(ValueError):
        importance.Subsolution(pieces=(piece,), scale=0.0)
    with pytest.raises(ValueError):
        importance.Subsolution(pieces=(piece,), scale=1.2)
    with pytest.raises(ValueError):
        importance.Subsolution(pieces=(piece,), combine="avg")


def test_scheme_validation_and_factor() -> None:
    sub = importance.Subsolution(pieces=(importance.AffinePiece(1.0, (-1.0, -1.0)),))
    with pytest.raises(ValueError):
        importance.importance_from_subsolution(sub, 0.0, 2.0)
    with pytest.raises(ValueError):
        importance.importance_from_subsolution(sub, LOG2, 1.0)
    # delta = log u makes V coincide with the subsolution
    scheme = _scheme(sub)
    assert scheme.value_factor == 1.0
    assert scheme.importance_value((0.25, 0.25)) == sub.value_at((0.25, 0.25))


def test_level_counts_on_reference_instances() -> None:
    spec2 = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=2)
    scheme2 = _scheme(importance.optimal_subsolution(spec2))
    start2 = models.scaled_position(models.start_state(spec2), spec2)
    assert importance.level_count(scheme2, 2, start2) == 3

    spec30 = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)
    scheme30 = _scheme(importance.optimal_subsolution(spec30))
    start30 = models.scaled_position(models.start_state(spec30), spec30)
    assert importance.level_count(scheme30, 30, start30) == 63


def test_level_count_requires_positive_start_value() -> None:
    sub = importance.Subsolution(pieces=(importance.AffinePiece(0.0, (-1.0, -1.0)),))
    scheme = _scheme(sub)
    with pytest.raises(ValueError):
        importance.level_count(scheme, 10, (0.1, 0.0))


def test_stage_threshold_and_stopping() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)
    scheme = _scheme(importance.optimal_subsolution(spec))
    levels = 63
    assert importance.stage_threshold(scheme, 30, levels, levels) == 0.0
    t1 = importance.stage_threshold(scheme, 30, levels, 1)
    assert abs(t1 - 62 * LOG2 / 30) < 1e-15
    with pytest.raises(ValueError):
        importance.stage_threshold(scheme, 30, levels, 0)
    with pytest.raises(ValueError):
        importance.stage_threshold(scheme, 30, levels, levels + 1)

    start = models.scaled_position(models.start_state(spec), spec)
    assert not importance.stage_stopped(scheme, 30, levels, 1, start, False)
    deep = (0.5, 0.4)  # importance value well under the stage-1 threshold
    assert importance.stage_stopped(scheme, 30, levels, 1, deep, False)
    # the final stage stops on the target only, never on the threshold
    assert not importance.stage_stopped(scheme, 30, levels, levels, deep, False)
    assert importance.stage_stopped(scheme, 30, levels, levels, deep, True)


def test_optimal_gradients_are_hamiltonian_roots() -> None:
    shared = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)
    separate = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=10, buffers="separate")
    gauss = models.GaussianMeanSpec(normals=((0.6, 0.8), (0.6, -0.8)), n=20)
    for spec in (shared, separate, gauss):
        sub = importance.optimal_subsolution(spec)
        h = importance.hamiltonian_for(spec)
        for piece in sub.pieces:
            assert abs(importance.hamiltonian_eval(h, piece.gradient)) < 1e-10


def test_shared_candidate_tracks_the_slower_server() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=6.0, mu2=2.0, n=10)
    sub = importance.optimal_subsolution(spec)
    gamma = math.log(2.0)
    assert sub.pieces[0].offset == gamma
    assert sub.pieces[0].gradient == (-gamma, -gamma)


def test_optimal_subsolution_rejects_modulated() -> None:
    spec = models.ModulatedTandemSpec(
        arrival=(1.0, 1.0), mu1=(3.5, 4.5), mu2=(2.5, 4.5), switch=(0.2, 0.5), n=10
    )
    with pytest.raises(ValueError):
        importance.optimal_subsolution(spec)
    assert importance.hamiltonian_for(spec) is None


def test_verify_passes_optimal_candidates() -> None:
    for spec in (
        models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30),
        models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=20, buffers="separate"),
        models.GaussianMeanSpec(normals=((0.6, 0.8), (0.6, -0.8)), n=20),
    ):
        sub = importance.optimal_subsolution(spec)
        report = importance.verify_subsolution(
            sub, importance.hamiltonian_for(spec), models.boundary_probes(spec)
        )
        assert report.passed, report.to_json()


def test_verify_passes_scaled_down_candidates() -> None:
    # scaling a passing candidate below 1 keeps it passing (H is concave
    # with H(0) = 0, so the segment to the origin stays nonnegative)
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)
    sub = importance.optimal_subsolution(spec, scale=0.95)
    report = importance.verify_subsolution(
        sub, importance.hamiltonian_for(spec), models.boundary_probes(spec)
    )
    assert report.passed
    worst = report.worst_piece()
    assert worst is not None and worst.h_value > 1e-3


def test_verify_rejects_rescaled_target_candidate() -> None:
    # max of per-coordinate pieces: covers the target boundary but its
    # gradients violate the Hamiltonian condition
    spec = models.TandemSpec(arrival=1.0, mu1=3.0, mu2=2.0, n=20, buffers="separate")
    gamma = math.log(6.0)
    sub = importance.Subsolution(
        pieces=(
            importance.AffinePiece(offset=gamma, gradient=(-gamma, 0.0)),
            importance.AffinePiece(offset=gamma, gradient=(0.0, -gamma)),
        ),
        combine="max",
    )
    report = importance.verify_subsolution(
        sub, importance.hamiltonian_for(spec), models.boundary_probes(spec)
    )
    assert not report.passed
    assert all(probe.passed for probe in report.probe_checks)
    worst = report.worst_piece()
    assert worst.piece_index == 1
    assert abs(report.piece_checks[0].h_value - (-2.5)) < 1e-12
    assert abs(report.piece_checks[1].h_value - (-40.0 / 3.0)) < 1e-12


def test_verify_catches_boundary_violations() -> None:
    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=30)
    # right gradient, offset too generous: positive on the target boundary
    gamma = math.log(4.5)
    sub = importance.Subsolution(
        pieces=(importance.AffinePiece(offset=gamma + 0.1, gradient=(-gamma, -gamma)),)
    )
    report = importance.verify_subsolution(
        sub, importance.hamiltonian_for(spec), models.boundary_probes(spec)
    )
    assert not report.passed
    assert all(piece.passed for piece in report.piece_checks)
    worst = report.worst_probe()
    assert worst is not None and not worst.passed
    assert abs(worst.value - 0.1) < 1e-12


def test_verify_without_hamiltonian_checks_boundary_only() -> None:
    spec = models.ModulatedTandemSpec(
        arrival=(1.0, 1.0), mu1=(3.5, 4.5), mu2=(2.5, 4.5), switch=(0.2, 0.5), n=30
    )
    sub = importance.Subsolution(
        pieces=(importance.AffinePiece(offset=1.00029, gradient=(-1.00029, -1.00029)),)
    )
    report = importance.verify_subsolution(sub, None, models.boundary_probes(spec))
    assert report.piece_checks == ()
    assert report.passed
    assert report.worst_piece() is None


def test_report_json_shape() -> None:
    import json

    spec = models.TandemSpec(arrival=1.0, mu1=4.5, mu2=4.5, n=10)
    sub = importance.optimal_subsolution(spec)
    report = importance.verify_subsolution(
        sub, importance.hamiltonian_for(spec), models.boundary_probes(spec)
    )
    payload = json.loads(report.to_json())
    assert payload["passed"] is True
    assert len(payload["pieces"]) == 1
    assert len(payload["probes"]) == len(report.probe_checks)


def test_gaussian_hamiltonian_dimension_check() -> None:
    h = importance.GaussianPathHamiltonian(dim=2)
    assert h.value((0.0, 0.0, 1.0)) == 1.0
    assert abs(h.value((-0.6, -0.8, 0.5))) < 1e-15
    with pytest.raises(ValueError):
        h.value((1.0, 1.0))
