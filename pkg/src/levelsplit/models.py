"""Markov models whose first-passage probabilities we estimate.

Four model families are supported:

* ``tandem-shared``: two exponential queues in series with one shared
  buffer; the target event is total occupancy reaching n before the
  system empties.
* ``tandem-separate``: the same network with individual buffers; the
  target is both queues simultaneously reaching n.
* ``modulated-tandem``: a tandem whose rates switch with a two-state
  Markov modulating process.
* ``gaussian-mean``: partial sums of i.i.d. standard normal vectors;
  the target is the scaled sum landing in a union of half-spaces at
  the final step.

Queueing models are simulated on their embedded jump chain: at each
step one of the currently active transitions fires with probability
proportional to its rate.  First-passage probabilities are invariant
under this time change, and it keeps the step loop branch-free.

All randomness is drawn from a caller-supplied ``random.Random``.  The
Gaussian increments use the Marsaglia polar transform implemented here
(rather than ``Random.gauss``) so that trajectories are a documented,
stable function of the underlying uniform stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from random import Random
from typing import Union

State = tuple
"""Model state: ``(x1, x2)`` for tandems, ``(x1, x2, m)`` with mode
``m`` in {1, 2} for the modulated tandem, and ``(s1, ..., sd, j)`` with
unscaled partial sums and step count for the Gaussian family."""

FAMILIES = ("tandem-shared", "tandem-separate", "modulated-tandem", "gaussian-mean")


@dataclass(frozen=True)
class TandemSpec:
    """Two-node tandem queue: arrivals at rate ``arrival``, service rates
    ``mu1`` and ``mu2``.

    ``buffers`` selects the target event: ``"shared"`` fills when
    x1 + x2 >= n, ``"separate"`` when both coordinates reach n.  The
    taboo set is the empty state (0, 0); runs start from the state just
    after the first arrival, (1, 0).
    """

    arrival: float
    mu1: float
    mu2: float
    n: int
    buffers: str = "shared"

    def __post_init__(self) -> None:
        for name in ("arrival", "mu1", "mu2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {value!r}")
        if self.arrival >= min(self.mu1, self.mu2):
            raise ValueError(
                f"unstable queue: arrival {self.arrival} must be below min(mu1, mu2) "
                f"= {min(self.mu1, self.mu2)}"
            )
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.buffers not in ("shared", "separate"):
            raise ValueError(f"buffers must be 'shared' or 'separate', got {self.buffers!r}")

    @property
    def family(self) -> str:
        return "tandem-shared" if self.buffers == "shared" else "tandem-separate"


@dataclass(frozen=True)
class ModulatedTandemSpec:
    """Tandem queue with rates modulated by a two-state Markov process.

    Rate tuples are indexed by modulation state (entry 0 for mode 1,
    entry 1 for mode 2); ``switch[m]`` is the rate of leaving mode m+1.
    ``initial_mode`` is the modulation state at the forced first
    arrival, i.e. runs start from (1, 0, initial_mode).
    """

    arrival: tuple[float, float]
    mu1: tuple[float, float]
    mu2: tuple[float, float]
    switch: tuple[float, float]
    n: int
    buffers: str = "shared"
    initial_mode: int = 1

    def __post_init__(self) -> None:
        for name in ("arrival", "mu1", "mu2", "switch"):
            rates = getattr(self, name)
            if len(rates) != 2 or any(not (math.isfinite(v) and v > 0) for v in rates):
                raise ValueError(f"{name} must be two positive finite rates, got {rates!r}")
        for m in (0, 1):
            if self.arrival[m] >= min(self.mu1[m], self.mu2[m]):
                raise ValueError(
                    f"unstable queue in mode {m + 1}: arrival {self.arrival[m]} must be "
                    f"below min(mu1, mu2) = {min(self.mu1[m], self.mu2[m])}"
                )
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.buffers not in ("shared", "separate"):
            raise ValueError(f"buffers must be 'shared' or 'separate', got {self.buffers!r}")
        if self.initial_mode not in (1, 2):
            raise ValueError(f"initial_mode must be 1 or 2, got {self.initial_mode!r}")

    @property
    def family(self) -> str:
        return "modulated-tandem"


@dataclass(frozen=True)
class GaussianMeanSpec:
    """Partial sums S_j of i.i.d. standard normal vectors in R^d.

    The chain runs for exactly n steps; the target is S_n / n landing in
    the union of half-spaces {x : <p_i, x> >= 1} over the rows ``normals``.
    Ending anywhere else is the taboo outcome.
    """

    normals: tuple[tuple[float, ...], ...]
    n: int

    def __post_init__(self) -> None:
        if not (1 <= len(self.normals) <= 2):
            raise ValueError(f"normals must hold one or two vectors, got {len(self.normals)}")
        dim = len(self.normals[0])
        if dim < 1 or any(len(p) != dim for p in self.normals):
            raise ValueError("normal vectors must be nonempty and share a dimension")
        for p in self.normals:
            if any(not math.isfinite(v) for v in p) or all(v == 0.0 for v in p):
                raise ValueError(f"normal vector must be finite and nonzero, got {p!r}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @property
    def family(self) -> str:
        return "gaussian-mean"

    @property
    def dim(self) -> int:
        return len(self.normals[0])


ModelSpec = Union[TandemSpec, ModulatedTandemSpec, GaussianMeanSpec]


# ---------------------------------------------------------------------------
# start / membership / geometry


def start_state(spec: ModelSpec) -> State:
    """State from which every run begins.

    Queueing runs condition on the first arrival having happened, so they
    start at occupancy (1, 0); the Gaussian chain starts at the zero sum.
    """
    if isinstance(spec, TandemSpec):
        return (1, 0)
    if isinstance(spec, ModulatedTandemSpec):
        return (1, 0, spec.initial_mode)
    if isinstance(spec, GaussianMeanSpec):
        return (0.0,) * spec.dim + (0,)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def in_target(state: State, spec: ModelSpec) -> bool:
    """True iff ``state`` lies in the target set B."""
    if isinstance(spec, TandemSpec):
        if spec.buffers == "shared":
            return state[0] + state[1] >= spec.n
        return state[0] >= spec.n and state[1] >= spec.n
    if isinstance(spec, ModulatedTandemSpec):
        if spec.buffers == "shared":
            return state[0] + state[1] >= spec.n
        return state[0] >= spec.n and state[1] >= spec.n
    if isinstance(spec, GaussianMeanSpec):
        if state[-1] != spec.n:
            return False
        n = spec.n
        for p in spec.normals:
            total = 0.0
            for pk, sk in zip(p, state):
                total += pk * sk
            if total >= n:
                return True
        return False
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def in_taboo(state: State, spec: ModelSpec) -> bool:
    """True iff ``state`` lies in the taboo set A (the run is killed)."""
    if isinstance(spec, (TandemSpec, ModulatedTandemSpec)):
        return state[0] == 0 and state[1] == 0
    if isinstance(spec, GaussianMeanSpec):
        return state[-1] == spec.n and not in_target(state, spec)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def scaled_position(state: State, spec: ModelSpec) -> tuple[float, ...]:
    """Position of ``state`` in the scaled coordinates used by importance
    functions: queue lengths over n (modulation state dropped), and for
    the Gaussian family the scaled sums followed by the time fraction."""
    n = spec.n
    if isinstance(spec, (TandemSpec, ModulatedTandemSpec)):
        return (state[0] / n, state[1] / n)
    if isinstance(spec, GaussianMeanSpec):
        return tuple(s / n for s in state[:-1]) + (state[-1] / n,)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def limit_position(spec: ModelSpec) -> tuple[float, ...]:
    """Scaled position anchoring asymptotic rate statements: the scaled
    start state collapses here as n grows."""
    if isinstance(spec, (TandemSpec, ModulatedTandemSpec)):
        return (0.0, 0.0)
    if isinstance(spec, GaussianMeanSpec):
        return (0.0,) * spec.dim + (0.0,)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def boundary_probes(spec: ModelSpec, max_probes: int = 128) -> list[tuple[float, ...]]:
    """Scaled positions on the discrete boundary of the target set B.

    Used to check the boundary condition of candidate subsolutions
    (nonpositive on B).  For the tandems these are the reachable entry
    states of B; for the Gaussian family, grid points on the half-space
    facets at time 1.
    """
    n = spec.n
    if isinstance(spec, (TandemSpec, ModulatedTandemSpec)):
        if spec.buffers == "shared":
            # entry states: x1 + x2 == n
            ks = _spread(range(n + 1), max_probes)
            return [(k / n, (n - k) / n) for k in ks]
        # entry edges of {both >= n}, out to 4n where runs no longer matter
        edge = _spread(range(n, 4 * n + 1), max_probes // 2)
        probes = [(j / n, 1.0) for j in edge]
        probes += [(1.0, j / n) for j in edge]
        return probes
    if isinstance(spec, GaussianMeanSpec):
        probes: list[tuple[float, ...]] = []
        per_facet = max(3, max_probes // len(spec.normals))
        for p in spec.normals:
            norm2 = sum(v * v for v in p)
            base = tuple(v / norm2 for v in p)  # closest facet point to the origin
            # an orthogonal direction within the facet (2-D case; for 1-D the
            # facet is a single point)
            if len(p) == 2:
                ortho = (-p[1] / math.sqrt(norm2), p[0] / math.sqrt(norm2))
                for i in range(per_facet):
                    t = -2.0 + 4.0 * i / (per_facet - 1)
                    probes.append(
                        (base[0] + t * ortho[0], base[1] + t * ortho[1], 1.0)
                    )
            else:
                probes.append(base + (1.0,))
        return probes
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def _spread(values: range, count: int) -> list[int]:
    """At most ``count`` values evenly spread across ``values``."""
    if len(values) <= count:
        return list(values)
    step = (len(values) - 1) / (count - 1)
    return [values[round(i * step)] for i in range(count)]


# ---------------------------------------------------------------------------
# stepping


@lru_cache(maxsize=None)
def jump_table(spec: ModelSpec):
    """Cumulative transition cut points of the embedded jump chain.

    For tandems the table is indexed by (x1 > 0, x2 > 0); for the
    modulated tandem additionally by mode.  Each entry is
    ``(total_rate, cut_arrival, cut_service1)`` (and ``cut_service2``
    for the modulated family, whose fourth transition is the mode
    switch).  Both :func:`step` and the simulation engine read this
    table, so their trajectories agree draw for draw.
    """
    if isinstance(spec, TandemSpec):
        table = {}
        for b1 in (False, True):
            for b2 in (False, True):
                m1 = spec.mu1 if b1 else 0.0
                m2 = spec.mu2 if b2 else 0.0
                total = spec.arrival + m1 + m2
                table[(b1, b2)] = (total, spec.arrival, spec.arrival + m1)
        return table
    if isinstance(spec, ModulatedTandemSpec):
        table = {}
        for mode in (1, 2):
            lam = spec.arrival[mode - 1]
            mu1 = spec.mu1[mode - 1]
            mu2 = spec.mu2[mode - 1]
            sw = spec.switch[mode - 1]
            for b1 in (False, True):
                for b2 in (False, True):
                    m1 = mu1 if b1 else 0.0
                    m2 = mu2 if b2 else 0.0
                    total = lam + m1 + m2 + sw
                    table[(mode, b1, b2)] = (total, lam, lam + m1, lam + m1 + m2)
        return table
    raise TypeError(f"no jump table for {type(spec).__name__}")


def standard_normal_pair(rng: Random) -> tuple[float, float]:
    """Two independent standard normals via the Marsaglia polar method.

    A fixed transform of the uniform stream, kept here so that sampled
    trajectories never depend on library internals.
    """
    while True:
        v1 = 2.0 * rng.random() - 1.0
        v2 = 2.0 * rng.random() - 1.0
        s = v1 * v1 + v2 * v2
        if 0.0 < s < 1.0:
            factor = math.sqrt(-2.0 * math.log(s) / s)
            return v1 * factor, v2 * factor


def step(state: State, spec: ModelSpec, rng: Random) -> State:
    """Advance one embedded-chain step.

    Raises ValueError when asked to step an absorbed state (target or
    taboo); the Gaussian chain is steppable at any j < n.
    """
    if isinstance(spec, TandemSpec):
        if in_target(state, spec) or in_taboo(state, spec):
            raise ValueError(f"cannot step absorbed state {state!r}")
        x1, x2 = state
        total, cut_a, cut_1 = jump_table(spec)[(x1 > 0, x2 > 0)]
        u = rng.random() * total
        if u < cut_a:
            return (x1 + 1, x2)
        if u < cut_1:
            return (x1 - 1, x2 + 1)
        return (x1, x2 - 1)
    if isinstance(spec, ModulatedTandemSpec):
        if in_target(state, spec) or in_taboo(state, spec):
            raise ValueError(f"cannot step absorbed state {state!r}")
        x1, x2, mode = state
        total, cut_a, cut_1, cut_2 = jump_table(spec)[(mode, x1 > 0, x2 > 0)]
        u = rng.random() * total
        if u < cut_a:
            return (x1 + 1, x2, mode)
        if u < cut_1:
            return (x1 - 1, x2 + 1, mode)
        if u < cut_2:
            return (x1, x2 - 1, mode)
        return (x1, x2, 3 - mode)
    if isinstance(spec, GaussianMeanSpec):
        j = state[-1]
        if j >= spec.n:
            raise ValueError(f"cannot step finished Gaussian state {state!r}")
        sums = list(state[:-1])
        for k in range(0, len(sums), 2):
            z1, z2 = standard_normal_pair(rng)
            sums[k] += z1
            if k + 1 < len(sums):
                sums[k + 1] += z2
        return tuple(sums) + (j + 1,)
    raise TypeError(f"unknown model spec {type(spec).__name__}")
