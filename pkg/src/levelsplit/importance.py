"""Importance functions built from piecewise-affine subsolutions.

A candidate function is the scaled minimum of affine pieces,
W(x) = scale * min_j (offset_j + <gradient_j, x>), in the scaled
coordinates of the model.  It certifies as usable when it is
nonpositive on the target set and every active piece satisfies
H(scale * gradient) >= 0 for the model's Hamiltonian; the minimum of
functions passing the gradient check passes it too, since H is concave
in the gradient.

The importance function actually driving the splitting run is
V(x) = (delta / log u) * W(x), so that crossing one level of width
delta/n multiplies the population by u exactly when W tracks the decay
of the transition probabilities.  Stage thresholds, the level count,
and the stopping predicate all live here; the engine evaluates the same
arithmetic, in the same order, so library and engine never disagree on
a stop decision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from . import models


@dataclass(frozen=True)
class AffinePiece:
    """One affine piece offset + <gradient, x> in scaled coordinates."""

    offset: float
    gradient: tuple[float, ...]

    def __post_init__(self) -> None:
        if not math.isfinite(self.offset):
            raise ValueError(f"offset must be finite, got {self.offset!r}")
        if not self.gradient or any(not math.isfinite(g) for g in self.gradient):
            raise ValueError(f"gradient must be nonempty and finite, got {self.gradient!r}")

    def value_at(self, position: Sequence[float]) -> float:
        total = self.offset
        for g, x in zip(self.gradient, position):
            total += g * x
        return total


@dataclass(frozen=True)
class Subsolution:
    """Scaled combination of affine pieces.

    ``scale`` in (0, 1] multiplies the whole function; values below 1
    give a strict subsolution that trades estimator variance for
    uniformly smaller particle populations.

    ``combine`` is "min" for the usual minimum of pieces (the minimum
    of subsolutions is again a subsolution) or "max" for candidates
    such as rescalings of the target set.  A max of pieces does not
    inherit the subsolution property from its pieces, which is exactly
    what verification is for.
    """

    pieces: tuple[AffinePiece, ...]
    scale: float = 1.0
    combine: str = "min"

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("subsolution needs at least one piece")
        dim = len(self.pieces[0].gradient)
        if any(len(p.gradient) != dim for p in self.pieces):
            raise ValueError("pieces must share a gradient dimension")
        if not (0.0 < self.scale <= 1.0):
            raise ValueError(f"scale must lie in (0, 1], got {self.scale!r}")
        if self.combine not in ("min", "max"):
            raise ValueError(f'combine must be "min" or "max", got {self.combine!r}')

    @property
    def dim(self) -> int:
        return len(self.pieces[0].gradient)

    def value_at(self, position: Sequence[float]) -> float:
        take_max = self.combine == "max"
        best = self.pieces[0].value_at(position)
        for piece in self.pieces[1:]:
            v = piece.value_at(position)
            if (v > best) if take_max else (v < best):
                best = v
        return self.scale * best


def evaluate(subsolution: Subsolution, position: Sequence[float]) -> float:
    """Value of the subsolution at a scaled position."""
    return subsolution.value_at(position)


# ---------------------------------------------------------------------------
# importance scheme: levels and stopping


@dataclass(frozen=True)
class ImportanceScheme:
    """A subsolution together with the level width and the offspring mean
    it is calibrated against: V(x) = (delta / log u) * W(x)."""

    subsolution: Subsolution
    delta: float
    offspring_mean: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if not (math.isfinite(self.offspring_mean) and self.offspring_mean > 1.0):
            raise ValueError(
                f"offspring mean must exceed 1 for a splitting scheme, got {self.offspring_mean!r}"
            )

    @property
    def value_factor(self) -> float:
        """Multiplier turning subsolution values into importance values."""
        return self.delta / math.log(self.offspring_mean)

    def importance_value(self, position: Sequence[float]) -> float:
        return self.value_factor * self.subsolution.value_at(position)


def importance_from_subsolution(
    subsolution: Subsolution, delta: float, offspring_mean: float
) -> ImportanceScheme:
    """Build the importance scheme for a subsolution, level width and
    mean offspring count; with these choices
    (log u / delta) * V == W by construction."""
    return ImportanceScheme(subsolution=subsolution, delta=delta, offspring_mean=offspring_mean)


def level_count(scheme: ImportanceScheme, n: int, start_position: Sequence[float]) -> int:
    """Number of splitting stages: ceil(n V(start) / delta).

    The start must have positive importance value; otherwise the scheme
    places it on or past the target side of every level.
    """
    v0 = scheme.importance_value(start_position)
    if v0 <= 0.0:
        raise ValueError(f"importance value at the start must be positive, got {v0!r}")
    return math.ceil(n * v0 / scheme.delta)


def stage_threshold(scheme: ImportanceScheme, n: int, levels: int, stage: int) -> float:
    """Importance-value threshold ending stage ``stage`` (1-based):
    (levels - stage) * delta / n."""
    if not 1 <= stage <= levels:
        raise ValueError(f"stage must lie in 1..{levels}, got {stage}")
    return (levels - stage) * scheme.delta / n


def stage_stopped(
    scheme: ImportanceScheme,
    n: int,
    levels: int,
    stage: int,
    position: Sequence[float],
    in_target: bool,
) -> bool:
    """Whether a particle at ``position`` has reached the stage's stopping
    set.  The final stage stops only on the target itself; earlier stages
    stop on the target or on V(position) <= stage threshold.  Taboo
    membership (killing) is the caller's concern.
    """
    if in_target:
        return True
    if stage >= levels:
        return False
    return scheme.importance_value(position) <= stage_threshold(scheme, n, levels, stage)


# ---------------------------------------------------------------------------
# family-derived candidates


def optimal_subsolution(spec: models.ModelSpec, scale: float = 1.0) -> Subsolution:
    """The maximal single- or few-piece subsolution for families where it
    has a closed form.

    Tandem with a shared buffer: gamma (1 - x1 - x2) with
    gamma = log(min(mu1, mu2) / arrival); the slower server sets the
    decay rate and H vanishes at the gradient when that is the second
    server.  Separate buffers: rho1 + rho2 - rho1 x1 - rho2 x2 with
    rho_i = log(mu_i / arrival).  Sample-mean problems get one piece
    per half-space, 1 - <p_i, x> - (1 - t)/2.

    The modulated tandem is rejected: its maximal candidates come from
    an eigenvalue problem solved outside this package, so supply the
    pieces explicitly.
    """
    if isinstance(spec, models.TandemSpec):
        if spec.buffers == "shared":
            gamma = math.log(min(spec.mu1, spec.mu2) / spec.arrival)
            pieces = (AffinePiece(offset=gamma, gradient=(-gamma, -gamma)),)
        else:
            rho1 = math.log(spec.mu1 / spec.arrival)
            rho2 = math.log(spec.mu2 / spec.arrival)
            pieces = (AffinePiece(offset=rho1 + rho2, gradient=(-rho1, -rho2)),)
        return Subsolution(pieces=pieces, scale=scale)
    if isinstance(spec, models.GaussianMeanSpec):
        pieces = tuple(
            AffinePiece(offset=0.5, gradient=tuple(-c for c in normal) + (0.5,))
            for normal in spec.normals
        )
        return Subsolution(pieces=pieces, scale=scale)
    if isinstance(spec, models.ModulatedTandemSpec):
        raise ValueError(
            "no closed-form candidate for the modulated tandem; supply pieces explicitly"
        )
    raise TypeError(f"unknown model spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class TandemHamiltonian:
    """H(p) for the tandem queue's local rate function:
    H(p) = -[lam (e^{-p1} - 1) + mu1 (e^{p1 - p2} - 1) + mu2 (e^{p2} - 1)].

    Nonnegativity of H at a candidate gradient certifies that particles
    following that piece die at least as fast as they split.
    """

    arrival: float
    mu1: float
    mu2: float

    def value(self, gradient: Sequence[float]) -> float:
        if len(gradient) != 2:
            raise ValueError(f"tandem gradient has two components, got {len(gradient)}")
        p1, p2 = gradient
        try:
            return -(
                self.arrival * (math.exp(-p1) - 1.0)
                + self.mu1 * (math.exp(p1 - p2) - 1.0)
                + self.mu2 * (math.exp(p2) - 1.0)
            )
        except OverflowError as exc:
            raise OverflowError(f"Hamiltonian overflow at gradient {tuple(gradient)!r}") from exc


@dataclass(frozen=True)
class GaussianPathHamiltonian:
    """H for the time-augmented Gaussian path problem with quadratic cost
    L(b) = |b|^2 / 2: the last gradient slot is the time derivative and
    H(p) = p_time - |p_space|^2 / 2."""

    dim: int

    def value(self, gradient: Sequence[float]) -> float:
        if len(gradient) != self.dim + 1:
            raise ValueError(
                f"gradient needs {self.dim} space slots plus time, got {len(gradient)}"
            )
        space2 = math.fsum(g * g for g in gradient[:-1])
        return gradient[-1] - 0.5 * space2


Hamiltonian = Union[TandemHamiltonian, GaussianPathHamiltonian]


def hamiltonian_for(spec: models.ModelSpec) -> Optional[Hamiltonian]:
    """The Hamiltonian matching a model family.

    The modulated tandem has none here: its candidate subsolutions are
    taken as externally supplied constants and only boundary-checked.
    """
    if isinstance(spec, models.TandemSpec):
        return TandemHamiltonian(arrival=spec.arrival, mu1=spec.mu1, mu2=spec.mu2)
    if isinstance(spec, models.GaussianMeanSpec):
        return GaussianPathHamiltonian(dim=spec.dim)
    if isinstance(spec, models.ModulatedTandemSpec):
        return None
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def hamiltonian_eval(hamiltonian: Hamiltonian, gradient: Sequence[float]) -> float:
    return hamiltonian.value(gradient)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class PieceCheck:
    piece_index: int
    gradient: tuple[float, ...]
    h_value: float
    passed: bool


@dataclass(frozen=True)
class ProbeCheck:
    position: tuple[float, ...]
    value: float
    passed: bool


@dataclass(frozen=True)
class SubsolutionReport:
    """Outcome of checking a candidate subsolution.

    ``piece_checks`` holds H at each scaled piece gradient (empty when
    the family has no Hamiltonian to check against); ``probe_checks``
    holds the candidate's values on target-boundary probes, which must
    be nonpositive.
    """

    piece_checks: tuple[PieceCheck, ...]
    probe_checks: tuple[ProbeCheck, ...]
    passed: bool

    def worst_piece(self) -> Optional[PieceCheck]:
        if not self.piece_checks:
            return None
        return min(self.piece_checks, key=lambda c: c.h_value)

    def worst_probe(self) -> Optional[ProbeCheck]:
        if not self.probe_checks:
            return None
        return max(self.probe_checks, key=lambda c: c.value)

    def to_json(self) -> str:
        return json.dumps(
            {
                "passed": self.passed,
                "pieces": [
                    {
                        "index": c.piece_index,
                        "gradient": list(c.gradient),
                        "h_value": c.h_value,
                        "passed": c.passed,
                    }
                    for c in self.piece_checks
                ],
                "probes": [
                    {"position": list(c.position), "value": c.value, "passed": c.passed}
                    for c in self.probe_checks
                ],
            },
            indent=2,
        )


def verify_subsolution(
    subsolution: Subsolution,
    hamiltonian: Optional[Hamiltonian],
    probes: Sequence[Sequence[float]],
    tol: float = 1e-9,
) -> SubsolutionReport:
    """Check the two subsolution conditions at tolerance ``tol``:
    H(scale * gradient) >= -tol for every piece, and value <= tol at
    every boundary probe.  With ``hamiltonian`` None only the boundary
    condition is checked.
    """
    piece_checks = []
    if hamiltonian is not None:
        for idx, piece in enumerate(subsolution.pieces):
            scaled = tuple(subsolution.scale * g for g in piece.gradient)
            h = hamiltonian.value(scaled)
            piece_checks.append(
                PieceCheck(piece_index=idx, gradient=scaled, h_value=h, passed=h >= -tol)
            )
    probe_checks = []
    for probe in probes:
        v = subsolution.value_at(probe)
        probe_checks.append(
            ProbeCheck(position=tuple(probe), value=v, passed=v <= tol)
        )
    passed = all(c.passed for c in piece_checks) and all(c.passed for c in probe_checks)
    return SubsolutionReport(
        piece_checks=tuple(piece_checks),
        probe_checks=tuple(probe_checks),
        passed=passed,
    )
