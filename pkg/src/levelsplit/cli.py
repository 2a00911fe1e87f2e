"""Command line front end.

Three subcommands share one JSON experiment-config format:

* ``run``    -- batches of splitting runs, one column per n, printed as
                a table and optionally exported as results.json/.csv;
* ``check``  -- verify a candidate importance function before spending
                compute on it, and report its predicted rate;
* ``oracle`` -- reference values from the analysis routes (linear
                solves, closed forms, optional full-branching runs).

A config names a model family and its parameters, the n values to
sweep, the importance-function candidate, and the run budget:

    {
      "name": "table01",
      "model": {"family": "tandem-shared", "arrival": 1.0,
                "mu1": 4.5, "mu2": 4.5},
      "n": [30, 40, 50],
      "scheme": {"kind": "optimal", "scale": 1.0},
      "mechanism": {"offspring_mean": 2.0},
      "runs": 20000,
      "seed": 0
    }

``scheme.kind`` is "optimal" for families with a closed-form maximal
candidate, or "pieces" with explicit affine pieces (and an optional
"combine": "max" for candidates like rescalings of the target set).
Omitted fields take defaults: offspring mean 2, delta log 2, scale 1,
population cap 10^6, workers = all cores.  The positional config
argument is a path, or the name of a packaged preset (table01 ..
table10, unstable_min).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import engine, importance, mechanism, models, oracle, stats

DEFAULT_DELTA = math.log(2.0)
DEFAULT_OFFSPRING_MEAN = 2.0
DEFAULT_RUNS = 1000

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3


class ConfigError(ValueError):
    """A config field is missing, malformed, or inconsistent."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for
    the JSON shape this mirrors."""

    name: str
    family: str
    model: dict
    ns: tuple[int, ...]
    scheme_kind: str
    pieces: Optional[tuple[tuple[float, tuple[float, ...]], ...]]
    combine: str
    scale: float
    offspring_mean: float
    delta: float
    runs: int
    seed: int
    cap: int
    workers: Optional[int]
    sfb_runs: int
    truncation: Optional[int]


# ---------------------------------------------------------------------------
# parsing


def _require_number(container: dict, key: str, field: str, *, positive: bool = True) -> float:
    if key not in container:
        raise ConfigError(field, "is required")
    value = container[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(field, f"must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    return float(value)


def _optional_int(data: dict, key: str, default, *, minimum: int) -> Optional[int]:
    if key not in data or data[key] is None:
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(key, f"must be at least {minimum}, got {value}")
    return value


def _rate_pair(container: dict, key: str, field: str) -> tuple[float, float]:
    value = container.get(key)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, f"must be a pair of rates [mode1, mode2], got {value!r}")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
            raise ConfigError(f"{field}[{i}]", f"must be a positive finite rate, got {v!r}")
        out.append(float(v))
    return (out[0], out[1])


_MODEL_FIELDS = {
    "tandem-shared": {"family", "arrival", "mu1", "mu2"},
    "tandem-separate": {"family", "arrival", "mu1", "mu2"},
    "modulated-tandem": {"family", "arrival", "mu1", "mu2", "switch", "buffers", "initial_mode"},
    "gaussian-mean": {"family", "normals"},
}


def _parse_model(data) -> tuple[str, dict]:
    if not isinstance(data, dict):
        raise ConfigError("model", f"must be an object, got {type(data).__name__}")
    family = data.get("family")
    if family not in models.FAMILIES:
        raise ConfigError("model.family", f"must be one of {', '.join(models.FAMILIES)}, got {family!r}")
    for key in data:
        if key not in _MODEL_FIELDS[family]:
            raise ConfigError(f"model.{key}", f"unknown field for family {family}")
    params: dict = {}
    if family in ("tandem-shared", "tandem-separate"):
        for key in ("arrival", "mu1", "mu2"):
            params[key] = _require_number(data, key, f"model.{key}")
    elif family == "modulated-tandem":
        for key in ("arrival", "mu1", "mu2", "switch"):
            params[key] = _rate_pair(data, key, f"model.{key}")
        buffers = data.get("buffers", "shared")
        if buffers not in ("shared", "separate"):
            raise ConfigError("model.buffers", f"must be 'shared' or 'separate', got {buffers!r}")
        params["buffers"] = buffers
        initial_mode = data.get("initial_mode", 1)
        if initial_mode not in (1, 2):
            raise ConfigError("model.initial_mode", f"must be 1 or 2, got {initial_mode!r}")
        params["initial_mode"] = initial_mode
    else:
        raw = data.get("normals")
        if not isinstance(raw, (list, tuple)) or not 1 <= len(raw) <= 2:
            raise ConfigError("model.normals", f"must be a list of one or two vectors, got {raw!r}")
        vectors = []
        for i, vec in enumerate(raw):
            if not isinstance(vec, (list, tuple)) or not vec:
                raise ConfigError(f"model.normals[{i}]", f"must be a nonempty vector, got {vec!r}")
            for v in vec:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(f"model.normals[{i}]", f"entries must be finite numbers, got {v!r}")
            vectors.append(tuple(float(v) for v in vec))
        params["normals"] = tuple(vectors)
    return family, params


def _parse_ns(data) -> tuple[int, ...]:
    raw = data.get("n")
    if raw is None:
        raise ConfigError("n", "is required (an integer or a list of integers)")
    values = raw if isinstance(raw, (list, tuple)) else [raw]
    if not values:
        raise ConfigError("n", "needs at least one value")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError("n", f"values must be positive integers, got {v!r}")
        out.append(v)
    return tuple(out)


def _parse_scheme(data) -> tuple[str, Optional[tuple], str, float]:
    raw = data.get("scheme", {"kind": "optimal"})
    if not isinstance(raw, dict):
        raise ConfigError("scheme", f"must be an object, got {type(raw).__name__}")
    kind = raw.get("kind")
    if kind not in ("optimal", "pieces"):
        raise ConfigError("scheme.kind", f"must be 'optimal' or 'pieces', got {kind!r}")
    allowed = {"kind", "scale"} | ({"pieces", "combine"} if kind == "pieces" else set())
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"scheme.{key}", f"unknown field for kind {kind}")
    scale = float(raw.get("scale", 1.0))
    if not (isinstance(raw.get("scale", 1.0), (int, float)) and 0.0 < scale <= 1.0):
        raise ConfigError("scheme.scale", f"must lie in (0, 1], got {raw.get('scale')!r}")
    pieces = None
    combine = raw.get("combine", "min")
    if combine not in ("min", "max"):
        raise ConfigError("scheme.combine", f"must be 'min' or 'max', got {combine!r}")
    if kind == "pieces":
        raw_pieces = raw.get("pieces")
        if not isinstance(raw_pieces, (list, tuple)) or not raw_pieces:
            raise ConfigError("scheme.pieces", "must be a nonempty list of {offset, gradient} objects")
        parsed = []
        for i, piece in enumerate(raw_pieces):
            if not isinstance(piece, dict) or set(piece) != {"offset", "gradient"}:
                raise ConfigError(
                    f"scheme.pieces[{i}]", "must be an object with exactly 'offset' and 'gradient'"
                )
            offset = _require_number(piece, "offset", f"scheme.pieces[{i}].offset", positive=False)
            grad = piece["gradient"]
            if not isinstance(grad, (list, tuple)) or not grad:
                raise ConfigError(f"scheme.pieces[{i}].gradient", "must be a nonempty vector")
            for v in grad:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(
                        f"scheme.pieces[{i}].gradient", f"entries must be finite numbers, got {v!r}"
                    )
            parsed.append((offset, tuple(float(v) for v in grad)))
        pieces = tuple(parsed)
    return kind, pieces, combine, scale


_TOP_LEVEL_FIELDS = {
    "name", "model", "n", "scheme", "mechanism",
    "delta", "runs", "seed", "cap", "workers", "sfb_runs", "truncation",
}


def load_config(data: dict, name: str = "experiment") -> ExperimentConfig:
    """Validate a config dict; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError("config", f"must be an object, got {type(data).__name__}")
    for key in data:
        if key not in _TOP_LEVEL_FIELDS:
            raise ConfigError(key, "unknown field")
    if "model" not in data:
        raise ConfigError("model", "is required")
    family, model = _parse_model(data["model"])
    ns = _parse_ns(data)
    scheme_kind, pieces, combine, scale = _parse_scheme(data)
    mech_raw = data.get("mechanism", {})
    if not isinstance(mech_raw, dict):
        raise ConfigError("mechanism", f"must be an object, got {type(mech_raw).__name__}")
    for key in mech_raw:
        if key != "offspring_mean":
            raise ConfigError(f"mechanism.{key}", "unknown field")
    if "offspring_mean" in mech_raw:
        offspring_mean = _require_number(mech_raw, "offspring_mean", "mechanism.offspring_mean")
        if offspring_mean <= 1.0:
            raise ConfigError("mechanism.offspring_mean", f"must exceed 1, got {offspring_mean}")
    else:
        offspring_mean = DEFAULT_OFFSPRING_MEAN
    delta = (
        _require_number(data, "delta", "delta") if "delta" in data and data["delta"] is not None
        else DEFAULT_DELTA
    )
    runs = _optional_int(data, "runs", DEFAULT_RUNS, minimum=1)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", f"must be an integer, got {seed!r}")
    cap = _optional_int(data, "cap", engine.DEFAULT_CAP, minimum=1)
    workers = _optional_int(data, "workers", None, minimum=1)
    sfb_runs = _optional_int(data, "sfb_runs", 0, minimum=0)
    truncation = _optional_int(data, "truncation", None, minimum=1)
    raw_name = data.get("name", name)
    if not isinstance(raw_name, str) or not raw_name:
        raise ConfigError("name", f"must be a nonempty string, got {raw_name!r}")
    config = ExperimentConfig(
        name=raw_name,
        family=family,
        model=model,
        ns=ns,
        scheme_kind=scheme_kind,
        pieces=pieces,
        combine=combine,
        scale=scale,
        offspring_mean=offspring_mean,
        delta=delta,
        runs=runs,
        seed=seed,
        cap=cap,
        workers=workers,
        sfb_runs=sfb_runs,
        truncation=truncation,
    )
    # fail fast on semantic problems (queue stability, piece dimensions)
    spec = spec_for(config, ns[0])
    subsolution_for(config, spec)
    return config


def preset_names() -> list[str]:
    root = resources.files("levelsplit").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_config(source: str) -> ExperimentConfig:
    """Load a config from a filesystem path or a packaged preset name."""
    path = Path(source)
    if path.exists():
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{source} is not valid JSON: {exc}") from exc
        return load_config(data, name=path.stem)
    stem = source[:-5] if source.endswith(".json") else source
    candidate = resources.files("levelsplit").joinpath("configs", stem + ".json")
    if candidate.is_file():
        return load_config(json.loads(candidate.read_text(encoding="utf-8")), name=stem)
    raise ConfigError(
        "config",
        f"no file or preset named {source!r}; presets: {', '.join(preset_names())}",
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    """JSON-ready echo of a config; feeding it back to load_config gives
    the same experiment."""
    scheme: dict = {"kind": config.scheme_kind, "scale": config.scale}
    if config.scheme_kind == "pieces":
        scheme["pieces"] = [
            {"offset": offset, "gradient": list(gradient)} for offset, gradient in config.pieces
        ]
        scheme["combine"] = config.combine
    model = {"family": config.family}
    for key, value in config.model.items():
        if isinstance(value, tuple):
            model[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        else:
            model[key] = value
    return {
        "name": config.name,
        "model": model,
        "n": list(config.ns),
        "scheme": scheme,
        "mechanism": {"offspring_mean": config.offspring_mean},
        "delta": config.delta,
        "runs": config.runs,
        "seed": config.seed,
        "cap": config.cap,
        "workers": config.workers,
        "sfb_runs": config.sfb_runs,
        "truncation": config.truncation,
    }


# ---------------------------------------------------------------------------
# builders


def spec_for(config: ExperimentConfig, n: int) -> models.ModelSpec:
    try:
        if config.family in ("tandem-shared", "tandem-separate"):
            return models.TandemSpec(
                arrival=config.model["arrival"],
                mu1=config.model["mu1"],
                mu2=config.model["mu2"],
                n=n,
                buffers="shared" if config.family == "tandem-shared" else "separate",
            )
        if config.family == "modulated-tandem":
            return models.ModulatedTandemSpec(
                arrival=config.model["arrival"],
                mu1=config.model["mu1"],
                mu2=config.model["mu2"],
                switch=config.model["switch"],
                n=n,
                buffers=config.model["buffers"],
                initial_mode=config.model["initial_mode"],
            )
        return models.GaussianMeanSpec(normals=config.model["normals"], n=n)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc


def subsolution_for(config: ExperimentConfig, spec: models.ModelSpec) -> importance.Subsolution:
    if config.scheme_kind == "optimal":
        try:
            return importance.optimal_subsolution(spec, scale=config.scale)
        except ValueError as exc:
            raise ConfigError("scheme.kind", str(exc)) from exc
    dim = len(models.limit_position(spec))
    pieces = []
    for i, (offset, gradient) in enumerate(config.pieces):
        if len(gradient) != dim:
            raise ConfigError(
                f"scheme.pieces[{i}].gradient",
                f"needs {dim} components for family {config.family}, got {len(gradient)}",
            )
        pieces.append(importance.AffinePiece(offset=offset, gradient=gradient))
    return importance.Subsolution(pieces=tuple(pieces), scale=config.scale, combine=config.combine)


def scheme_for(config: ExperimentConfig, spec: models.ModelSpec) -> importance.ImportanceScheme:
    return importance.importance_from_subsolution(
        subsolution_for(config, spec), config.delta, config.offspring_mean
    )


def mechanism_for(config: ExperimentConfig) -> mechanism.SplittingMechanism:
    return mechanism.canonical(config.offspring_mean)


# ---------------------------------------------------------------------------
# rendering and export


def result_row(n: int, summary: stats.EstimateSummary) -> dict:
    return {
        "n": n,
        "estimate": summary.mean,
        "std_error": summary.std_error,
        "ci_low": summary.ci_low,
        "ci_high": summary.ci_high,
        "time_s": summary.wall_time_s,
        "runs": summary.runs,
        "capped_runs": summary.capped_runs,
        "avg_particles": summary.avg_max_population,
        "sd_particles": summary.sd_max_population,
        "max_particles": summary.peak_population,
    }


_TABLE_ROWS = (
    ("Estimate", lambda r: f"{r['estimate']:.4g}"),
    ("Std. Err.", lambda r: f"{r['std_error']:.3g}"),
    ("95% C.I.", lambda r: f"[{r['ci_low']:.3g}, {r['ci_high']:.3g}]"),
    ("Time Taken (s)", lambda r: f"{r['time_s']:.1f}"),
    ("Average no. particles", lambda r: f"{r['avg_particles']:.1f}"),
    ("S.D. no. particles", lambda r: f"{r['sd_particles']:.1f}"),
    ("Max no. particles", lambda r: f"{r['max_particles']:d}"),
)


def render_table(title: str, rows: Sequence[dict]) -> str:
    """Paper-style results table, one column per n."""
    headers = [f"n = {row['n']}" for row in rows]
    cells = [[render(row) for row in rows] for _, render in _TABLE_ROWS]
    label_width = max(len(label) for label, _ in _TABLE_ROWS)
    widths = [
        max(len(headers[j]), max(len(cells[i][j]) for i in range(len(cells))))
        for j in range(len(rows))
    ]
    lines = [title]
    lines.append(
        " " * label_width + "  " + "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    )
    for (label, _), row_cells in zip(_TABLE_ROWS, cells):
        lines.append(
            label.ljust(label_width) + "  "
            + "  ".join(c.rjust(w) for c, w in zip(row_cells, widths))
        )
    return "\n".join(lines)


CSV_HEADER = "n, estimate, stderr, ci_lo, ci_hi, time_s, avg_particles, sd_particles, max_particles"


def render_csv(rows: Sequence[dict]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r['n']},{r['estimate']!r},{r['std_error']!r},{r['ci_low']!r},{r['ci_high']!r},"
            f"{r['time_s']!r},{r['avg_particles']!r},{r['sd_particles']!r},{r['max_particles']}"
        )
    return "\n".join(lines) + "\n"


def _write_out(out_dir: str, filename: str, text: str) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / filename).write_text(text, encoding="utf-8")


def _model_label(config: ExperimentConfig) -> str:
    parts = [config.family]
    for key, value in config.model.items():
        parts.append(f"{key}={value}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# commands


def cmd_run(config: ExperimentConfig, out_dir: Optional[str]) -> int:
    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    split_mechanism = mechanism_for(config)
    rows = []
    for n in config.ns:
        spec = spec_for(config, n)
        scheme = scheme_for(config, spec)
        started = time.perf_counter()
        try:
            records = engine.run_batch(
                spec,
                scheme,
                split_mechanism,
                config.runs,
                master_seed=config.seed,
                cap=config.cap,
                workers=workers,
            )
            summary = stats.summarize(records, wall_time_s=time.perf_counter() - started)
        except stats.InstabilityError as exc:
            print(f"instability at n={n}: {exc}", file=sys.stderr)
            return EXIT_INSTABILITY
        rows.append(result_row(n, summary))
        if summary.capped_runs:
            print(
                f"note: {summary.capped_runs} of {summary.runs} runs at n={n} hit the "
                f"population cap and were excluded from the estimate",
                file=sys.stderr,
            )
    title = f"{config.name}: {_model_label(config)} ({config.runs} runs, seed {config.seed})"
    print(render_table(title, rows))
    if out_dir is not None:
        payload = {"config": config_to_dict(config), "results": rows}
        _write_out(out_dir, "results.json", json.dumps(payload, indent=2) + "\n")
        _write_out(out_dir, "results.csv", render_csv(rows))
    return EXIT_OK


def cmd_check(config: ExperimentConfig, out_dir: Optional[str]) -> int:
    spec = spec_for(config, config.ns[0])
    sub = subsolution_for(config, spec)
    hamiltonian = importance.hamiltonian_for(spec)
    probes = models.boundary_probes(spec)
    report = importance.verify_subsolution(sub, hamiltonian, probes)
    print(f"candidate check: {config.name} ({_model_label(config)}, n={config.ns[0]})")
    if hamiltonian is None:
        print("  gradient checks skipped: no closed-form Hamiltonian for this family")
    for piece in report.piece_checks:
        grad = ", ".join(f"{g:.6g}" for g in piece.gradient)
        status = "ok" if piece.passed else "VIOLATION"
        print(f"  piece {piece.piece_index}: gradient ({grad})  H = {piece.h_value:+.6e}  {status}")
    worst = report.worst_probe()
    if worst is not None:
        pos = ", ".join(f"{x:.4g}" for x in worst.position)
        status = "ok" if worst.passed else "VIOLATION"
        print(
            f"  boundary: worst value {worst.value:+.4e} at ({pos}) "
            f"over {len(report.probe_checks)} probes  {status}"
        )
    x0 = models.limit_position(spec)
    candidate_value = sub.value_at(x0) / sub.scale
    predicted = (1.0 + sub.scale) * candidate_value
    if report.passed:
        verdict = "PASS: candidate verifies as a subsolution"
    else:
        bad_piece = next((c for c in report.piece_checks if not c.passed), None)
        if bad_piece is not None:
            verdict = (
                f"FAIL: piece {bad_piece.piece_index} violates the Hamiltonian condition "
                f"(H = {bad_piece.h_value:.6g} < 0); expect unstable populations"
            )
        else:
            bad_probe = report.worst_probe()
            verdict = (
                f"FAIL: positive boundary value {bad_probe.value:.6g}; "
                "the candidate does not cover the target set"
            )
    print(verdict)
    print(
        f"predicted second-moment decay rate if the candidate is tight: "
        f"{predicted:.6g} per unit n (candidate value {candidate_value:.6g}, "
        f"scale {sub.scale})"
    )
    if out_dir is not None:
        payload = json.loads(report.to_json())
        payload["verdict"] = verdict
        payload["predicted_rate"] = predicted
        _write_out(out_dir, "check.json", json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if report.passed else EXIT_FAILED_CHECK


def cmd_oracle(config: ExperimentConfig, out_dir: Optional[str]) -> int:
    entries = []
    split_mechanism = mechanism_for(config)
    for n in config.ns:
        spec = spec_for(config, n)
        if config.family == "gaussian-mean":
            value = oracle.gaussian_exact(spec)
            extra = {"method": "inclusion-exclusion"}
            print(f"n={n}: {value:.9e}")
        else:
            try:
                solution = oracle.exact_hitting_probability(spec, truncation=config.truncation)
            except ValueError as exc:
                print(f"oracle error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            value = solution.start_probability
            extra = {
                "method": "linear-solve",
                "truncation": solution.truncation,
                "residual": solution.residual,
                "sweeps": solution.sweeps,
                "sensitivity": solution.sensitivity,
            }
            detail = f"sweeps={solution.sweeps}, residual={solution.residual:.2e}"
            if solution.truncation is not None:
                detail += f", truncation={solution.truncation}"
                detail += f", sensitivity={solution.sensitivity:.2e}"
            print(f"n={n}: {value:.9e}  ({detail})")
        if config.sfb_runs > 0:
            scheme = scheme_for(config, spec)
            try:
                sfb_values = [
                    oracle.run_sfb(
                        spec, scheme, split_mechanism, engine.run_seed_for(config.seed, i)
                    ).estimate
                    for i in range(config.sfb_runs)
                ]
            except ValueError as exc:
                print(f"oracle error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            mean = math.fsum(sfb_values) / len(sfb_values)
            sd = math.sqrt(
                math.fsum((v - mean) ** 2 for v in sfb_values) / max(1, len(sfb_values) - 1)
            )
            se = sd / math.sqrt(len(sfb_values))
            print(f"        full branching over {config.sfb_runs} runs: {mean:.6e} (s.e. {se:.2e})")
            extra["sfb_mean"] = mean
            extra["sfb_std_error"] = se
            extra["sfb_runs"] = config.sfb_runs
        entries.append(oracle.fixture_entry(spec, value, **extra))
    if out_dir is not None:
        keyed = {entry["key"]: entry for entry in entries}
        _write_out(out_dir, "fixtures.json", json.dumps(keyed, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelsplit",
        description="Rare-event estimation by multilevel splitting with "
        "subsolution-derived importance functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run splitting batches and print a results table"),
        ("check", "verify a candidate importance function"),
        ("oracle", "compute reference values from the analysis routes"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="config file path or packaged preset name")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--runs", type=int, default=None, help="override the run count")
        p.add_argument("--workers", type=int, default=None, help="override the worker count")
        p.add_argument("--cap", type=int, default=None, help="override the population cap")
        p.add_argument("--out", default=None, metavar="DIR", help="directory for exports")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = read_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.runs is not None:
            if args.runs < 1:
                raise ConfigError("runs", f"must be at least 1, got {args.runs}")
            overrides["runs"] = args.runs
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("workers", f"must be at least 1, got {args.workers}")
            overrides["workers"] = args.workers
        if args.cap is not None:
            if args.cap < 1:
                raise ConfigError("cap", f"must be at least 1, got {args.cap}")
            overrides["cap"] = args.cap
        if overrides:
            config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(config, args.out)
    if args.command == "check":
        return cmd_check(config, args.out)
    return cmd_oracle(config, args.out)


if __name__ == "__main__":
    sys.exit(main())
