"""Stage-by-stage splitting runs.

A run starts one particle of weight 1 at the model's start state.  At
stage r of L the surviving particles evolve until they are killed on
the taboo set or stopped, where stopping means reaching the target or,
before the final stage, dropping to the stage's importance threshold.
A stopped particle spawns offspring according to the splitting
mechanism, each child carrying the parent weight times its mechanism
weight.  Particles stopped at the final stage are in the target and
contribute their weight to the run's estimate; nothing splits there.

Randomness is replayable at particle granularity.  Every particle owns
a private generator seeded by hashing the run seed with its lineage
number (a per-run creation counter, root particle 0), so a run is a
pure function of its seed no matter how the batch around it is
scheduled.  Batches derive run seeds by hashing a master seed with the
run index, and batch statistics are reduced in run-index order, which
together make results bitwise independent of the worker count.
"""

from __future__ import annotations

import hashlib
import math
import multiprocessing
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from . import importance, mechanism, models
from .stats import InstabilityError

DEFAULT_CAP = 1_000_000

# a batch whose first runs all cap is aborted rather than ground out
_ABORT_PREFIX = 10


def _seed_from_tag(tag: bytes) -> int:
    return int.from_bytes(hashlib.sha256(tag).digest()[:8], "big")


def run_seed_for(master_seed: int, run_index: int) -> int:
    """Seed of one run within a batch; any run is reproducible alone."""
    return _seed_from_tag(b"run:%d:%d" % (master_seed, run_index))


def particle_stream(run_seed: int, lineage: int) -> random.Random:
    """Private generator of the particle with the given lineage number."""
    return random.Random(_seed_from_tag(b"%d:%d" % (run_seed, lineage)))


@dataclass(frozen=True)
class RunRecord:
    """One independent splitting run.

    ``estimate`` is the summed weight reaching the target, or nan when
    the run was abandoned at the population cap.  ``max_population`` is
    the largest generation the run ever held, ``steps`` counts model
    jumps.
    """

    run_index: int
    estimate: float
    max_population: int
    steps: int
    capped: bool


def run_splitting(
    spec: models.ModelSpec,
    scheme: importance.ImportanceScheme,
    split_mechanism: mechanism.SplittingMechanism,
    run_seed: int,
    cap: int = DEFAULT_CAP,
    run_index: int = 0,
) -> RunRecord:
    """Execute one splitting run and return its record."""
    if cap < 1:
        raise ValueError(f"population cap must be positive, got {cap}")
    start = models.start_state(spec)
    position = models.scaled_position(start, spec)
    if scheme.subsolution.dim != len(position):
        raise ValueError(
            f"subsolution dimension {scheme.subsolution.dim} does not match "
            f"the model's scaled position dimension {len(position)}"
        )
    levels = importance.level_count(scheme, spec.n, position)
    family = spec.family
    if family in ("tandem-shared", "tandem-separate"):
        out = _run_tandem(spec, scheme, split_mechanism, run_seed, cap, start, levels)
    elif family == "modulated-tandem":
        out = _run_modulated(spec, scheme, split_mechanism, run_seed, cap, start, levels)
    else:
        out = _run_generic(spec, scheme, split_mechanism, run_seed, cap, start, levels)
    estimate, max_population, steps, capped = out
    return RunRecord(
        run_index=run_index,
        estimate=estimate,
        max_population=max_population,
        steps=steps,
        capped=capped,
    )


def _finish(contributions: list, max_population: int, steps: int, capped: bool):
    estimate = math.nan if capped else math.fsum(contributions)
    return estimate, max_population, steps, capped


def _run_tandem(spec, scheme, split_mechanism, run_seed, cap, start, levels):
    # hot loop: plain tuples, locals, and the same jump table models.step
    # reads, so trajectories agree with the generic path draw for draw
    n = spec.n
    shared = spec.buffers == "shared"
    table = models.jump_table(spec)
    # flat list indexed by 2*(x1>0) + (x2>0); cheaper than tuple-key lookups
    cuts = [table[(b1, b2)] for b1 in (False, True) for b2 in (False, True)]
    sub = scheme.subsolution
    scale = sub.scale
    factor = scheme.value_factor
    delta = scheme.delta
    take_max = sub.combine == "max"
    pieces = tuple((p.offset, p.gradient[0], p.gradient[1]) for p in sub.pieces)
    npieces = len(pieces)
    off0, g10, g20 = pieces[0]
    if npieces > 1:
        off1, g11, g21 = pieces[1]
    fixed_split = (
        mechanism.sample(split_mechanism, None) if len(split_mechanism.probabilities) == 1 else None
    )
    sample = mechanism.sample

    lineage = 1
    gen = [(start[0], start[1], 1.0, particle_stream(run_seed, 0))]
    max_population = 1
    steps = 0
    capped = False
    contributions: list[float] = []

    for stage in range(1, levels + 1):
        final = stage == levels
        threshold = (levels - stage) * delta / n
        nxt = []
        for x1, x2, weight, rng in gen:
            rand = rng.random
            alive = True
            while True:
                if x1 == 0 and x2 == 0:
                    alive = False
                    break
                if (x1 + x2 >= n) if shared else (x1 >= n and x2 >= n):
                    break
                if not final:
                    xs1 = x1 / n
                    xs2 = x2 / n
                    best = off0 + g10 * xs1
                    best += g20 * xs2
                    if npieces == 2:
                        v = off1 + g11 * xs1
                        v += g21 * xs2
                        if (v > best) if take_max else (v < best):
                            best = v
                    elif npieces > 2:
                        for off, g1, g2 in pieces[1:]:
                            v = off + g1 * xs1
                            v += g2 * xs2
                            if (v > best) if take_max else (v < best):
                                best = v
                    if factor * (scale * best) <= threshold:
                        break
                total, cut_arrival, cut_first = cuts[(x1 > 0) * 2 + (x2 > 0)]
                u = rand() * total
                if u < cut_arrival:
                    x1 += 1
                elif u < cut_first:
                    x1 -= 1
                    x2 += 1
                else:
                    x2 -= 1
                steps += 1
            if not alive:
                continue
            if final:
                contributions.append(weight)
                continue
            count, child_weights = fixed_split or sample(split_mechanism, rng)
            for k in range(count):
                nxt.append((x1, x2, weight * child_weights[k], particle_stream(run_seed, lineage)))
                lineage += 1
            if len(nxt) > cap:
                capped = True
                break
        if len(nxt) > max_population:
            max_population = len(nxt)
        if capped or final or not nxt:
            break
        gen = nxt
    return _finish(contributions, max_population, steps, capped)


def _run_modulated(spec, scheme, split_mechanism, run_seed, cap, start, levels):
    n = spec.n
    shared = spec.buffers == "shared"
    table = models.jump_table(spec)
    # flat list indexed by 4*(mode-1) + 2*(x1>0) + (x2>0)
    cuts = [
        table[(mode, b1, b2)] for mode in (1, 2) for b1 in (False, True) for b2 in (False, True)
    ]
    sub = scheme.subsolution
    scale = sub.scale
    factor = scheme.value_factor
    delta = scheme.delta
    take_max = sub.combine == "max"
    pieces = tuple((p.offset, p.gradient[0], p.gradient[1]) for p in sub.pieces)
    npieces = len(pieces)
    off0, g10, g20 = pieces[0]
    if npieces > 1:
        off1, g11, g21 = pieces[1]
    fixed_split = (
        mechanism.sample(split_mechanism, None) if len(split_mechanism.probabilities) == 1 else None
    )
    sample = mechanism.sample

    lineage = 1
    gen = [(start[0], start[1], start[2], 1.0, particle_stream(run_seed, 0))]
    max_population = 1
    steps = 0
    capped = False
    contributions: list[float] = []

    for stage in range(1, levels + 1):
        final = stage == levels
        threshold = (levels - stage) * delta / n
        nxt = []
        for x1, x2, mode, weight, rng in gen:
            rand = rng.random
            alive = True
            while True:
                if x1 == 0 and x2 == 0:
                    alive = False
                    break
                if (x1 + x2 >= n) if shared else (x1 >= n and x2 >= n):
                    break
                if not final:
                    xs1 = x1 / n
                    xs2 = x2 / n
                    best = off0 + g10 * xs1
                    best += g20 * xs2
                    if npieces == 2:
                        v = off1 + g11 * xs1
                        v += g21 * xs2
                        if (v > best) if take_max else (v < best):
                            best = v
                    elif npieces > 2:
                        for off, g1, g2 in pieces[1:]:
                            v = off + g1 * xs1
                            v += g2 * xs2
                            if (v > best) if take_max else (v < best):
                                best = v
                    if factor * (scale * best) <= threshold:
                        break
                total, cut_arrival, cut_first, cut_second = cuts[
                    (mode - 1) * 4 + (x1 > 0) * 2 + (x2 > 0)
                ]
                u = rand() * total
                if u < cut_arrival:
                    x1 += 1
                elif u < cut_first:
                    x1 -= 1
                    x2 += 1
                elif u < cut_second:
                    x2 -= 1
                else:
                    mode = 3 - mode
                steps += 1
            if not alive:
                continue
            if final:
                contributions.append(weight)
                continue
            count, child_weights = fixed_split or sample(split_mechanism, rng)
            for k in range(count):
                nxt.append(
                    (x1, x2, mode, weight * child_weights[k], particle_stream(run_seed, lineage))
                )
                lineage += 1
            if len(nxt) > cap:
                capped = True
                break
        if len(nxt) > max_population:
            max_population = len(nxt)
        if capped or final or not nxt:
            break
        gen = nxt
    return _finish(contributions, max_population, steps, capped)


def _run_generic(spec, scheme, split_mechanism, run_seed, cap, start, levels):
    """Reference path driven entirely by the public model and importance
    functions; the specialized tandem loops must match it draw for draw."""
    n = spec.n
    lineage = 1
    gen = [(start, 1.0, particle_stream(run_seed, 0))]
    max_population = 1
    steps = 0
    capped = False
    contributions: list[float] = []

    for stage in range(1, levels + 1):
        final = stage == levels
        nxt = []
        for state, weight, rng in gen:
            alive = True
            while True:
                if models.in_taboo(state, spec):
                    alive = False
                    break
                position = models.scaled_position(state, spec)
                if importance.stage_stopped(
                    scheme, n, levels, stage, position, models.in_target(state, spec)
                ):
                    break
                state = models.step(state, spec, rng)
                steps += 1
            if not alive:
                continue
            if final:
                contributions.append(weight)
                continue
            count, child_weights = mechanism.sample(split_mechanism, rng)
            for k in range(count):
                nxt.append((state, weight * child_weights[k], particle_stream(run_seed, lineage)))
                lineage += 1
            if len(nxt) > cap:
                capped = True
                break
        if len(nxt) > max_population:
            max_population = len(nxt)
        if capped or final or not nxt:
            break
        gen = nxt
    return _finish(contributions, max_population, steps, capped)


def reference_run(
    spec: models.ModelSpec,
    scheme: importance.ImportanceScheme,
    split_mechanism: mechanism.SplittingMechanism,
    run_seed: int,
    cap: int = DEFAULT_CAP,
    run_index: int = 0,
) -> RunRecord:
    """Run one splitting run through the generic path regardless of the
    model family.  Exists so tests can pin the specialized loops to it."""
    start = models.start_state(spec)
    position = models.scaled_position(start, spec)
    levels = importance.level_count(scheme, spec.n, position)
    estimate, max_population, steps, capped = _run_generic(
        spec, scheme, split_mechanism, run_seed, cap, start, levels
    )
    return RunRecord(
        run_index=run_index,
        estimate=estimate,
        max_population=max_population,
        steps=steps,
        capped=capped,
    )


# ---------------------------------------------------------------------------
# batches


def _batch_worker(args) -> RunRecord:
    spec, scheme, split_mechanism, master_seed, run_index, cap = args
    return run_splitting(
        spec,
        scheme,
        split_mechanism,
        run_seed_for(master_seed, run_index),
        cap=cap,
        run_index=run_index,
    )


def run_batch(
    spec: models.ModelSpec,
    scheme: importance.ImportanceScheme,
    split_mechanism: mechanism.SplittingMechanism,
    runs: int,
    master_seed: int = 0,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> list[RunRecord]:
    """Run a batch of independent splitting runs.

    The result is a pure function of (spec, scheme, mechanism, runs,
    master seed, cap); the worker count only changes how the work is
    scheduled.  If the first few runs all hit the population cap the
    batch is abandoned with InstabilityError instead of burning through
    the rest, since each capped run costs on the order of the cap in
    particle updates.
    """
    if runs < 1:
        raise ValueError(f"runs must be positive, got {runs}")
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    args = [(spec, scheme, split_mechanism, master_seed, i, cap) for i in range(runs)]
    abort_prefix = min(_ABORT_PREFIX, runs)
    records: list[RunRecord] = []

    def note(record: RunRecord) -> None:
        records.append(record)
        if len(records) == abort_prefix and all(r.capped for r in records):
            raise InstabilityError(
                f"first {abort_prefix} runs all hit the population cap ({cap}); "
                f"aborting the batch, the scheme looks unstable at n={spec.n}"
            )

    if workers == 1:
        for arg in args:
            note(_batch_worker(arg))
    else:
        chunksize = max(1, min(64, runs // (workers * 4) or 1))
        with multiprocessing.Pool(processes=workers) as pool:
            try:
                for record in pool.imap(_batch_worker, args, chunksize=chunksize):
                    note(record)
            except InstabilityError:
                pool.terminate()
                raise
    return records
