"""Rare-event estimation by multilevel splitting.

The package is organized around one workflow: describe a model
(``models``), build a candidate importance function from affine pieces
and certify it (``importance``), pick a splitting mechanism
(``mechanism``), run batches of splitting runs (``engine``), and reduce
them to estimates (``stats``).  Analysis-side reference values live in
``oracle`` and a batch front end in ``cli``.
"""

from .engine import (
    DEFAULT_CAP,
    RunRecord,
    particle_stream,
    reference_run,
    run_batch,
    run_seed_for,
    run_splitting,
)
from .importance import (
    AffinePiece,
    GaussianPathHamiltonian,
    ImportanceScheme,
    Subsolution,
    SubsolutionReport,
    TandemHamiltonian,
    evaluate,
    hamiltonian_for,
    importance_from_subsolution,
    level_count,
    optimal_subsolution,
    stage_stopped,
    stage_threshold,
    verify_subsolution,
)
from .mechanism import (
    SplittingMechanism,
    canonical,
    is_unbiased,
    mean_offspring,
    sample,
    unbiasedness_gap,
    weight_second_moment,
)
from .models import (
    FAMILIES,
    GaussianMeanSpec,
    ModelSpec,
    ModulatedTandemSpec,
    TandemSpec,
    boundary_probes,
    in_taboo,
    in_target,
    jump_table,
    limit_position,
    scaled_position,
    standard_normal_pair,
    start_state,
    step,
)
from .oracle import (
    LinearSystemSolution,
    SfbRun,
    exact_hitting_probability,
    fixture_entry,
    fixture_key,
    gaussian_exact,
    run_sfb,
    transition_probabilities,
)
from .stats import (
    EstimateSummary,
    InstabilityError,
    decay_rate,
    second_moment_rate,
    summarize,
)
from .cli import ConfigError, ExperimentConfig, load_config, main, read_config

__version__ = "0.1.0"

__all__ = [
    "AffinePiece",
    "ConfigError",
    "DEFAULT_CAP",
    "EstimateSummary",
    "ExperimentConfig",
    "FAMILIES",
    "GaussianMeanSpec",
    "GaussianPathHamiltonian",
    "ImportanceScheme",
    "InstabilityError",
    "LinearSystemSolution",
    "ModelSpec",
    "ModulatedTandemSpec",
    "RunRecord",
    "SfbRun",
    "SplittingMechanism",
    "Subsolution",
    "SubsolutionReport",
    "TandemHamiltonian",
    "TandemSpec",
    "boundary_probes",
    "canonical",
    "decay_rate",
    "evaluate",
    "exact_hitting_probability",
    "fixture_entry",
    "fixture_key",
    "gaussian_exact",
    "hamiltonian_for",
    "importance_from_subsolution",
    "in_taboo",
    "in_target",
    "is_unbiased",
    "jump_table",
    "level_count",
    "limit_position",
    "load_config",
    "main",
    "mean_offspring",
    "optimal_subsolution",
    "particle_stream",
    "read_config",
    "reference_run",
    "run_batch",
    "run_seed_for",
    "run_sfb",
    "run_splitting",
    "sample",
    "scaled_position",
    "second_moment_rate",
    "stage_stopped",
    "stage_threshold",
    "standard_normal_pair",
    "start_state",
    "step",
    "summarize",
    "transition_probabilities",
    "unbiasedness_gap",
    "verify_subsolution",
    "weight_second_moment",
]
