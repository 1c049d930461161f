"""Command-line front end.

Single-query commands print JSON on stdout. Batch commands read a JSON
config, write CSV/JSON artifacts plus ``manifest.json`` into ``--out``, and
log to stderr.

Exit codes: 0 success, 1 unexpected failure, 2 invalid config, 3 infeasible
circuit or design.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, optimize, states, tomography
from .circuit import CircuitSpec, circuit_unitary, input_submatrix
from .combinatorics import free_parameter_counts, min_output_ports
from .exceptions import DesignInfeasibleError, PreconditionError, ValidationError

logger = logging.getLogger("splitstate")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POS_INT = {"type": "integer", "minimum": 1}

STATE_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"n": _POS_INT, "first_row": {"type": "array", "items": _COMPLEX}},
            "required": ["n", "first_row"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"overlaps": {"type": "array", "items": {"type": "array", "items": _COMPLEX}}},
            "required": ["overlaps"],
            "additionalProperties": False,
        },
    ]
}

CIRCUIT_SCHEMA = {
    "type": "object",
    "properties": {
        "m": _POS_INT,
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "section_lengths": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "phase_layers": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "input_ports": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    },
    "required": ["m", "section_lengths", "input_ports"],
    "additionalProperties": False,
}

_PROBLEM_PROPS = {
    "m": _POS_INT,
    "n": _POS_INT,
    "input_ports": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    "sections": _POS_INT,
    "total_length": {"type": "number", "minimum": 0},
    "starts": _POS_INT,
    "seed": {"type": "integer", "minimum": 0},
    "optimize_length": {"type": "boolean"},
    "kappa": {"type": "number", "exclusiveMinimum": 0},
    "step": {"type": "number", "exclusiveMinimum": 0},
    "max_evals": _POS_INT,
    "polish": {"type": "integer", "minimum": 0},
    "restart_tol": {"type": "number", "minimum": 0},
    "max_restarts": {"type": "integer", "minimum": 0},
}
_PROBLEM_REQUIRED = ["m", "n", "input_ports", "sections"]

SCHEMAS = {
    "simulate": {
        "type": "object",
        "properties": {"state": STATE_SCHEMA, "circuit": CIRCUIT_SCHEMA},
        "required": ["state", "circuit"],
        "additionalProperties": False,
    },
    "design": {
        "type": "object",
        "properties": _PROBLEM_PROPS,
        "required": [*_PROBLEM_REQUIRED, "total_length"],
        "additionalProperties": False,
    },
    "sweep": {
        "type": "object",
        "properties": {
            **_PROBLEM_PROPS,
            "lengths": {
                "oneOf": [
                    {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                    {
                        "type": "object",
                        "properties": {
                            "start": {"type": "number", "minimum": 0},
                            "stop": {"type": "number", "minimum": 0},
                            "step": {"type": "number", "exclusiveMinimum": 0},
                        },
                        "required": ["start", "stop", "step"],
                        "additionalProperties": False,
                    },
                ]
            },
        },
        "required": [*_PROBLEM_REQUIRED, "lengths"],
        "additionalProperties": False,
    },
    "reconstruct": {
        "type": "object",
        "properties": {
            "circuit": CIRCUIT_SCHEMA,
            "correlations": {"type": "array", "items": {"type": "number"}},
            "correlations_csv": {"type": "string"},
            "normalize": {"type": "boolean"},
            "project": {"type": "boolean"},
            "truth": STATE_SCHEMA,
        },
        "required": ["circuit"],
        "oneOf": [{"required": ["correlations"]}, {"required": ["correlations_csv"]}],
        "additionalProperties": False,
    },
    "noise": {
        "type": "object",
        "properties": {
            "circuit": CIRCUIT_SCHEMA,
            "state": STATE_SCHEMA,
            "relative_sigma": {"type": "number", "minimum": 0},
            "trials": _POS_INT,
            "seed": {"type": "integer", "minimum": 0},
            "mode": {"enum": ["relative", "absolute"]},
        },
        "required": ["circuit", "state", "relative_sigma"],
        "additionalProperties": False,
    },
    "tolerance": {
        "type": "object",
        "properties": {
            "circuit": CIRCUIT_SCHEMA,
            "magnitudes": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            "trials": _POS_INT,
            "seed": {"type": "integer", "minimum": 0},
            "distribution": {"enum": ["uniform", "gaussian"]},
        },
        "required": ["circuit", "magnitudes"],
        "additionalProperties": False,
    },
}


class ConfigError(Exception):
    pass


class InfeasibleError(Exception):
    pass


def _version(pkg: str) -> str:
    try:
        return metadata.version(pkg)
    except metadata.PackageNotFoundError:
        return "unknown"


def load_config(path: str, command: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid {command} config: {exc.message}") from exc
    return doc


def parse_state(doc: dict) -> states.SplitStateDensity:
    if "overlaps" in doc:
        mat = np.array([[complex(re, im) for re, im in row] for row in doc["overlaps"]])
        return states.density_from_overlaps(mat)
    return states.SplitStateDensity.from_json(doc)


def parse_circuit(doc: dict) -> CircuitSpec:
    try:
        return CircuitSpec.from_json(doc)
    except ValueError as exc:
        raise InfeasibleError(f"invalid circuit: {exc}") from exc


def _problem(doc: dict, seed: int | None) -> optimize.DesignProblem:
    fields = {k: v for k, v in doc.items() if k in _PROBLEM_PROPS}
    fields.setdefault("total_length", 0.0)
    if seed is not None:
        fields["seed"] = seed
    fields["input_ports"] = tuple(fields["input_ports"])
    try:
        return optimize.DesignProblem(**fields)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc


def _check_ports(circuit: CircuitSpec, n: int) -> None:
    if len(circuit.input_ports) != n:
        raise InfeasibleError(f"circuit has {len(circuit.input_ports)} input ports for {n} photons")


class Run:
    """Output directory of one batch command, finished by a manifest."""

    def __init__(self, out: str, command: str, config: dict, seed: int | None):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.seed = seed
        self.files: list[str] = []

    def write_text(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text)
        self.files.append(name)

    def write_json(self, name: str, doc) -> None:
        self.write_text(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def finish(self) -> None:
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
            "seed": self.seed,
            "outputs": sorted(self.files),
            "versions": {
                "splitstate": _version("artifact"),
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _complex_json(mat: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def cmd_params(args) -> int:
    n = args.photons
    if n < 1:
        raise ConfigError(f"--photons must be >= 1, got {n}")
    counts = free_parameter_counts(n)
    doc = {"total": counts.total, "real": counts.real, "imag": counts.imag, "min_output_ports": min_output_ports(n)}
    print(json.dumps(doc))
    return EXIT_OK


def cmd_simulate(args, cfg: dict) -> int:
    rho = parse_state(cfg["state"])
    circuit = parse_circuit(cfg["circuit"])
    _check_ports(circuit, rho.n)
    t = analysis.measurement_for(circuit, rho.n)
    gamma = tomography.predict_correlations(t, states.to_free_vector(rho))
    run = Run(args.out, "simulate", cfg, args.seed)
    run.write_text("correlations.csv", tomography.correlations_to_csv(gamma, circuit.m, rho.n))
    run.write_text("measurement_matrix.csv", t.to_csv())
    run.write_json(
        "state.json",
        {
            **rho.to_json(),
            "free_vector": states.to_free_vector(rho).tolist(),
            "support_block": _complex_json(states.support_block(rho)),
            "condition_number": tomography.condition_number(t),
            "measurement": t.metadata(),
        },
    )
    run.finish()
    return EXIT_OK


def cmd_design(args, cfg: dict) -> int:
    problem = _problem(cfg, args.seed)
    try:
        result = optimize.optimize_phases(problem, workers=args.threads)
    except DesignInfeasibleError as exc:
        raise InfeasibleError(str(exc)) from exc
    run = Run(args.out, "design", cfg, problem.seed)
    run.write_json("design.json", result.to_json())
    run.write_json("circuit.json", result.circuit().to_json())
    run.finish()
    logger.info("best condition number %.6g", result.best_condition_number)
    return EXIT_OK


def cmd_sweep(args, cfg: dict) -> int:
    lengths = cfg["lengths"]
    grid = optimize.length_grid(**lengths) if isinstance(lengths, dict) else np.array(lengths, dtype=float)
    problem = _problem(cfg, args.seed)
    rows = optimize.length_sweep(problem, grid, workers=args.threads)
    run = Run(args.out, "sweep", cfg, problem.seed)
    run.write_text("sweep.csv", optimize.sweep_to_csv(rows))
    run.write_json(
        "sweep.json",
        [
            {
                "total_length": r.total_length,
                "condition_number": r.condition_number if np.isfinite(r.condition_number) else None,
                "phases": r.phases.tolist(),
                "error": r.error,
            }
            for r in rows
        ],
    )
    run.finish()
    return EXIT_OK


def cmd_reconstruct(args, cfg: dict) -> int:
    circuit = parse_circuit(cfg["circuit"])
    n = len(circuit.input_ports)
    t = analysis.measurement_for(circuit, n)
    if "correlations" in cfg:
        gamma = np.array(cfg["correlations"], dtype=float)
    else:
        path = Path(cfg["correlations_csv"])
        if not path.is_absolute():
            path = Path(args.config).parent / path
        gamma = tomography.correlations_from_csv(path.read_text(), circuit.m, n)
    if gamma.shape != (t.t_real.shape[0],):
        raise ConfigError(f"expected {t.t_real.shape[0]} correlations, got {gamma.size}")
    cond = tomography.condition_number(t)
    if not np.isfinite(cond):
        raise InfeasibleError("circuit cannot reconstruct this state (infinite condition number)")
    v = tomography.reconstruct(t, gamma, normalize=cfg.get("normalize", False))
    rho = states.from_free_vector(v, n)
    if cfg.get("project", True):
        rho = tomography.project_physical(rho)
    diag = states.validate_physical(rho)
    doc = {
        **rho.to_json(),
        "free_vector": states.to_free_vector(rho).tolist(),
        "raw_free_vector": v.tolist(),
        "condition_number": cond,
        "diagnostics": {
            "pairing_residual": diag.pairing_residual,
            "trace_deviation": diag.trace_deviation,
            "min_eigenvalue": diag.min_eigenvalue,
        },
    }
    if "truth" in cfg:
        doc["fidelity"] = tomography.fidelity(parse_state(cfg["truth"]), rho)
    run = Run(args.out, "reconstruct", cfg, args.seed)
    run.write_json("reconstruction.json", doc)
    run.finish()
    return EXIT_OK


def cmd_noise(args, cfg: dict) -> int:
    rho = parse_state(cfg["state"])
    circuit = parse_circuit(cfg["circuit"])
    _check_ports(circuit, rho.n)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    study = analysis.NoiseStudyConfig(
        design=circuit,
        true_state=rho,
        relative_sigma=cfg["relative_sigma"],
        trials=cfg.get("trials", 5000),
        seed=seed,
        mode=cfg.get("mode", "relative"),
    )
    try:
        summary = analysis.noise_study(study, workers=args.threads)
    except PreconditionError as exc:
        raise InfeasibleError(str(exc)) from exc
    run = Run(args.out, "noise", cfg, seed)
    run.write_text("trials.csv", analysis.trials_to_csv(summary, "fidelity"))
    run.write_text("summary.csv", analysis.summary_to_csv(summary))
    run.write_json("summary.json", summary.to_json())
    run.finish()
    logger.info("mean fidelity %.6f, min %.6f", summary.mean, summary.min)
    return EXIT_OK


def cmd_tolerance(args, cfg: dict) -> int:
    circuit = parse_circuit(cfg["circuit"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    study = analysis.ToleranceStudyConfig(
        design=circuit,
        perturbation_magnitudes=tuple(cfg["magnitudes"]),
        trials=cfg.get("trials", 5000),
        seed=seed,
        distribution=cfg.get("distribution", "uniform"),
    )
    summaries = analysis.tolerance_study(study, workers=args.threads)
    run = Run(args.out, "tolerance", cfg, seed)
    run.write_text("trials.csv", analysis.trials_to_csv(summaries, "condition_number"))
    run.write_text("summary.csv", analysis.summary_to_csv(summaries))
    run.write_json("summary.json", {f"{k:.12g}": s.to_json() for k, s in summaries.items()})
    run.finish()
    return EXIT_OK


BATCH = {
    "simulate": (cmd_simulate, "predict coincidence probabilities for a state and circuit"),
    "design": (cmd_design, "optimize hidden-layer phases for minimum condition number"),
    "sweep": (cmd_sweep, "optimize phases over a grid of total lengths"),
    "reconstruct": (cmd_reconstruct, "reconstruct a state from measured correlations"),
    "noise": (cmd_noise, "fidelity statistics under noisy correlations"),
    "tolerance": (cmd_tolerance, "condition-number statistics under phase errors"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitstate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("params", help="parameter counts and minimum output ports")
    p.add_argument("--photons", type=int, required=True, help="number of photons N")
    for name, (_, help_text) in BATCH.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "params":
            return cmd_params(args)
        handler = BATCH[args.command][0]
        return handler(args, load_config(args.config, args.command))
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except ValidationError as exc:
        logger.error("invalid state: %s", exc)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        logger.error("%s", exc)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure: %s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
