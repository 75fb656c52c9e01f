"""Command-line interface.

Exit codes: 0 success, 1 input/parse error, 2 invalid flags or partition,
3 internal invariant violation (a discovered net failed validation).

Every JSON output embeds a run manifest holding the command, the effective
parameters, input paths with SHA-256 digests and the tool version. Output
locations are not part of the manifest, so ``trafficmine rerun`` can replay a
manifest into another directory and produce byte-identical files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .diagnostics import DEFAULT_MARGIN, calibrate_tau, detect_delays, detect_loops
from .discovery import AUTO, SINGLE, DiscoveryConfig, PartitionError, discover_detailed, validate_wfnet
from .eventlog import EventLogError, parse_csv, parse_offset, parse_xes_subset, write_csv
from .export import dumps_json, to_dot, to_pnml
from .interest import DEFAULT_THETA
from .simulator import (
    GroundTruthModel,
    SimulationConfig,
    generate_log,
    generate_model,
    measure_error,
    run_discovery_timed,
)

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3
REFERENCE_APE = 13.0


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") is not None or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(command: str, params: dict, inputs: dict) -> dict:
    return {
        "command": command,
        "params": params,
        "inputs": {k: {"path": str(Path(p).resolve()), "sha256": _digest(p)} for k, p in sorted(inputs.items())},
        "tool_version": __version__,
    }


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))


def _load_log(path, fmt: str, default_offset: Optional[str]):
    offset = parse_offset(default_offset) if default_offset else None
    data = Path(path).read_bytes()
    if fmt == "xes":
        return parse_xes_subset(data, default_offset=offset)
    return parse_csv(data, default_offset=offset)


# -- commands: each takes effective params plus output locations ----------------

def run_discover(params: dict, inputs: dict, output: Optional[str]) -> int:
    log = _load_log(inputs["log"], params["format"], params["default_offset"])
    partition = params["partition"]
    if not isinstance(partition, str):
        partition = [frozenset(s) for s in partition]
    try:
        config = DiscoveryConfig(theta=params["theta"], partition=partition,
                                 max_subset_size=params["max_subset_size"],
                                 min_confidence=params["min_confidence"])
        result = discover_detailed(log, config)
    except (PartitionError, ValueError) as exc:
        if isinstance(exc, EventLogError):
            raise
        raise UsageError(str(exc)) from None
    violations = validate_wfnet(result.net)
    if violations:
        raise InvariantError("; ".join(violations))

    notes = result.edge_annotations()
    edges = []
    for g_index, g in enumerate(result.graphs):
        for e in g.edges:
            edges.append({**e.to_dict(), "subset": g_index})
    report = {
        "manifest": _manifest("discover", params, inputs),
        "net": result.net.to_dict(),
        "partition": [sorted(s) for s in result.partition],
        "edges": edges,
        "coverage_gaps": [list(p) for p in result.coverage_gaps],
        "violations": violations,
    }
    stem = Path(output) if output else None
    if stem is not None:
        for fmt in params["out"]:
            if fmt == "dot":
                _write(stem.with_suffix(".dot"), to_dot(result.net, notes))
            elif fmt == "pnml":
                _write(stem.with_suffix(".pnml"), to_pnml(result.net))
        _write(stem.with_suffix(".json"), dumps_json(report))
    else:
        sys.stdout.write(to_dot(result.net, notes) if params["out"] == ["dot"] else dumps_json(report))
    n_t, n_p = len(result.net.transitions), len(result.net.places)
    print(_color(f"discovered net: {n_t} transitions, {n_p} places, {len(result.net.arcs)} arcs", "32"),
          file=sys.stderr)
    if result.coverage_gaps:
        print(_color(f"warning: {len(result.coverage_gaps)} directly-follows pair(s) span no subset", "33"),
              file=sys.stderr)
    return EXIT_OK


def run_diagnose(params: dict, inputs: dict, output: Optional[str]) -> int:
    log = _load_log(inputs["log"], params["format"], params["default_offset"])
    calibration = None
    if params["tau"] == "auto":
        tau, calibration = calibrate_tau(log, params["margin"])
    else:
        tau = float(params["tau"])
    loops = detect_loops(log, tau)
    delays = detect_delays(log, params["top_k"])
    report = {
        "manifest": _manifest("diagnose", params, inputs),
        "tau": tau,
        "calibration": calibration,
        "loops": [r.to_dict() for r in loops],
        "delays": [r.to_dict() for r in delays],
    }
    text = dumps_json(report)
    if output:
        _write(output, text)
    else:
        sys.stdout.write(text)
    flagged = [r.activity for r in loops if r.flagged]
    print(_color(f"flagged loops: {', '.join(flagged) or 'none'} (tau={tau:.4g})", "33" if flagged else "32"),
          file=sys.stderr)
    return EXIT_OK


def _model_from_params(params: dict) -> GroundTruthModel:
    return generate_model(params["activities"], params["arcs"], params["seed"],
                          num_loops=params["loops"], loop_probability=params["loop_prob"])


def run_simulate(params: dict, inputs: dict, log_out: Optional[str], model_out: Optional[str]) -> int:
    model = _model_from_params(params)
    log = generate_log(model, SimulationConfig(params["traces"], params["noise"], params["seed"]))
    csv_bytes = write_csv(log)
    if log_out:
        Path(log_out).parent.mkdir(parents=True, exist_ok=True)
        Path(log_out).write_bytes(csv_bytes)
    else:
        sys.stdout.write(csv_bytes.decode("utf-8"))
    if model_out:
        _write(model_out, dumps_json({"manifest": _manifest("simulate", params, inputs), **model.to_dict()}))
    print(_color(f"simulated {len(log)} traces, {log.num_events} events on a {model.arc_count}-arc net", "32"),
          file=sys.stderr)
    return EXIT_OK


def run_bench(params: dict, inputs: dict, output: Optional[str]) -> int:
    model = _model_from_params({**params, "loops": 0, "loop_prob": 0.0})
    log = generate_log(model, SimulationConfig(params["traces"], params["noise"], params["seed"]))
    config = DiscoveryConfig(theta=params["theta"], min_confidence=params["min_confidence"])
    net, cpu_ms = run_discovery_timed(log, config, params["parallel"])
    violations = validate_wfnet(net)
    if violations:
        raise InvariantError("; ".join(violations))
    err = measure_error(model, net, cpu_ms)
    report = {
        "manifest": _manifest("bench", params, inputs),
        **err.to_dict(),
        "model_arcs": model.arc_count,
        "num_events": log.num_events,
        "reference_ape": REFERENCE_APE,
    }
    text = dumps_json(report)
    if output:
        _write(output, text)
    else:
        sys.stdout.write(text)
    print(_color(f"ape={err.ape:.2f}% (reference: about {REFERENCE_APE:.0f}%), discovery cpu={cpu_ms} ms", "32"),
          file=sys.stderr)
    return EXIT_OK


# -- argument handling ----------------------------------------------------------------

def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _unit_float(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _tau(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'auto'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trafficmine", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def log_args(p):
        p.add_argument("log_path")
        p.add_argument("--format", choices=("csv", "xes"), default="csv")
        p.add_argument("--default-offset", default=None,
                       help="UTC offset (e.g. +01:00) applied to naive timestamps")

    p = sub.add_parser("discover", help="discover a workflow net from an event log")
    log_args(p)
    p.add_argument("--theta", type=_positive_float, default=DEFAULT_THETA)
    p.add_argument("--min-confidence", type=_unit_float, default=0.0)
    p.add_argument("--partition", default=SINGLE,
                   help="'single', 'auto', or a JSON file holding a list of label lists")
    p.add_argument("--max-subset-size", type=int, default=8)
    p.add_argument("--out", default="dot,json",
                   help="comma-separated formats among dot, json, pnml")
    p.add_argument("--output", default=None, help="output path stem; '<stem>.json' is always written")

    p = sub.add_parser("diagnose", help="report rework loops and waiting times")
    log_args(p)
    p.add_argument("--tau", type=_tau, default="auto")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--top-k", type=_positive_int, default=10)
    p.add_argument("--output", default=None)

    def sim_args(p, arcs):
        p.add_argument("--activities", type=int, default=None, help="defaults to arcs // 10")
        p.add_argument("--arcs", type=int, default=arcs)
        p.add_argument("--traces", type=_positive_int, default=1000)
        p.add_argument("--noise", type=_unit_float, default=0.0)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="generate a ground-truth model and a synthetic log")
    sim_args(p, 200)
    p.add_argument("--loops", type=int, default=0, help="number of activities given rework repeats")
    p.add_argument("--loop-prob", type=_unit_float, default=0.3)
    p.add_argument("--log-out", default=None)
    p.add_argument("--model-out", default=None)

    p = sub.add_parser("bench", help="simulate, discover and measure error and CPU time")
    sim_args(p, 2000)
    p.set_defaults(noise=0.1)
    p.add_argument("--theta", type=_positive_float, default=DEFAULT_THETA)
    p.add_argument("--min-confidence", type=_unit_float, default=0.0)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--output", default=None)

    p = sub.add_parser("rerun", help="replay the manifest embedded in a JSON report")
    p.add_argument("manifest_path")
    p.add_argument("--output-dir", required=True)
    return parser


def _params_from_args(args) -> tuple:
    """Effective parameters and input paths for the parsed command."""
    if args.command == "discover":
        formats = [f.strip() for f in args.out.split(",") if f.strip()]
        bad = sorted(set(formats) - {"dot", "json", "pnml"})
        if bad or not formats:
            raise UsageError(f"unknown output format(s): {bad}")
        inputs = {"log": args.log_path}
        partition = args.partition
        if partition not in (AUTO, SINGLE):
            inputs["partition"] = partition
            try:
                partition = json.loads(Path(partition).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read partition file: {exc}") from None
            if not isinstance(partition, list) or not all(isinstance(s, list) for s in partition):
                raise UsageError("partition file must hold a list of label lists")
            partition = [sorted(set(s)) for s in partition]
        params = {"format": args.format, "default_offset": args.default_offset, "theta": args.theta,
                  "min_confidence": args.min_confidence, "partition": partition,
                  "max_subset_size": args.max_subset_size, "out": formats}
        return params, inputs
    if args.command == "diagnose":
        return ({"format": args.format, "default_offset": args.default_offset, "tau": args.tau,
                 "margin": args.margin, "top_k": args.top_k}, {"log": args.log_path})
    activities = args.activities if args.activities is not None else max(3, args.arcs // 10)
    base = {"activities": activities, "arcs": args.arcs, "traces": args.traces,
            "noise": args.noise, "seed": args.seed}
    if args.command == "simulate":
        return {**base, "loops": args.loops, "loop_prob": args.loop_prob}, {}
    return {**base, "theta": args.theta, "min_confidence": args.min_confidence,
            "parallel": args.parallel}, {}


def _dispatch(command: str, params: dict, inputs: dict, outputs: dict) -> int:
    if command == "discover":
        return run_discover(params, inputs, outputs.get("output"))
    if command == "diagnose":
        return run_diagnose(params, inputs, outputs.get("output"))
    if command == "simulate":
        return run_simulate(params, inputs, outputs.get("log_out"), outputs.get("model_out"))
    if command == "bench":
        return run_bench(params, inputs, outputs.get("output"))
    raise UsageError(f"unknown command {command!r}")


RERUN_OUTPUTS = {
    "discover": {"output": "net"},
    "diagnose": {"output": "diagnose.json"},
    "simulate": {"log_out": "log.csv", "model_out": "model.json"},
    "bench": {"output": "bench.json"},
}


def _rerun(manifest_path: str, output_dir: str) -> int:
    data = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    manifest = data.get("manifest", data)
    command = manifest["command"]
    inputs = {k: v["path"] for k, v in manifest["inputs"].items()}
    for k, v in manifest["inputs"].items():
        if _digest(v["path"]) != v["sha256"]:
            print(_color(f"warning: input {k} changed since the manifest was written", "33"), file=sys.stderr)
    outputs = {k: str(Path(output_dir) / name) for k, name in RERUN_OUTPUTS[command].items()}
    return _dispatch(command, manifest["params"], inputs, outputs)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            return _rerun(args.manifest_path, args.output_dir)
        params, inputs = _params_from_args(args)
        outputs = {k: getattr(args, k, None) for k in ("output", "log_out", "model_out")}
        return _dispatch(args.command, params, inputs, outputs)
    except UsageError as exc:
        print(_color(f"error: {exc}", "31"), file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(_color(f"internal error: invariant violated: {exc}", "31"), file=sys.stderr)
        return EXIT_INVARIANT
    except (EventLogError, OSError) as exc:
        print(_color(f"error: {exc}", "31"), file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(_color(f"error: {exc}", "31"), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
