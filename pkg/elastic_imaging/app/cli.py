from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from elastic_imaging.adapters.storage.config_store import load_config
from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.enums import DataSource
from elastic_imaging.domain.errors import ConfigError, OutputExistsError, StageError
from elastic_imaging.domain.result import ReconstructionResult
from elastic_imaging.services.scenario.runner import (
    MEASUREMENTS_DIR,
    RESULTS_DIR,
    SPECTRUM_DIR,
    run_invert,
    run_scenario,
    run_simulate,
    run_spectrum,
)
from elastic_imaging.services.scenario.verification import run_verification

logger = logging.getLogger(__name__)

THREADS_ENV = "ELASTIC_IMAGING_THREADS"

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_CONFIG = 2
EXIT_EXISTS = 3


# -----------------------------
# Parsing helpers
# -----------------------------
def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError("must be an integer") from e
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(s: str) -> int:
    try:
        v = int(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError("seed must be an integer") from e
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def resolve_threads(flag: Optional[int], config: ScenarioConfig, environ=None) -> int:
    """--threads > ELASTIC_IMAGING_THREADS > config.threads > 1"""
    if flag is not None:
        return flag
    env = (os.environ if environ is None else environ).get(THREADS_ENV)
    if env:
        try:
            v = int(env)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from e
        if v < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return v
    if config.threads is not None:
        return config.threads
    return 1


def apply_overrides(config: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    update = {}
    if args.seed is not None:
        update["noise"] = config.noise.model_copy(update={"seed": args.seed})
    if args.source is not None:
        update["source"] = DataSource(args.source)
    if args.out is not None:
        update["output"] = config.output.model_copy(update={"directory": args.out})
    return config.model_copy(update=update) if update else config


# -----------------------------
# Argparse
# -----------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="elastic-imaging",
        description="Elastic density imaging with resonant injected inclusions.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", type=str, required=True, help="Scenario YAML file.")
        sp.add_argument("--out", type=str, default=None, help="Output directory (default: output.directory).")
        sp.add_argument("--seed", type=_seed, default=None, help="Noise seed (overrides noise.seed).")
        sp.add_argument("--source", choices=[s.value for s in DataSource], default=None, help="Measurement source.")
        sp.add_argument("--force", action="store_true", help="Overwrite an existing output directory.")
        sp.add_argument("--dry-run", action="store_true", help="Validate the config, print the plan, write nothing.")
        sp.add_argument("--threads", type=_positive_int, default=None, help=f"Worker threads (env {THREADS_ENV}).")

    common(sub.add_parser("simulate", help="Generate and store measurements."))
    common(sub.add_parser("invert", help="Run the inversion on stored measurements."))
    common(sub.add_parser("roundtrip", help="Simulate, then invert."))
    common(sub.add_parser("spectrum", help="Newtonian eigensystem and resonance report."))
    common(sub.add_parser("verify", help="Run the invariant suite."))
    return p


# -----------------------------
# Output
# -----------------------------
def _plan_lines(command: str, config: ScenarioConfig, out: Path, threads: int) -> List[str]:
    dirs = {
        "simulate": [MEASUREMENTS_DIR],
        "invert": [RESULTS_DIR],
        "roundtrip": [MEASUREMENTS_DIR, RESULTS_DIR],
        "spectrum": [SPECTRUM_DIR],
        "verify": [],
    }[command]
    n = config.sweep.n
    lines = [
        f"command:    {command}",
        f"config:     hash {config.config_hash()[:12]}",
        f"phantom:    {config.phantom.kind.value} (amplitude {config.phantom.amplitude:g})",
        f"domain:     radius {config.domain.radius:g}, resolution {config.domain.resolution}",
        f"inclusion:  a={config.inclusion.a:g}, c1={config.inclusion.c1:g}",
        f"lattice:    {n}x{n}x{n} nodes, stride {config.sweep.stride}",
        f"source:     {config.source.value}, recovery {config.exterior_recovery().value}",
        f"noise:      delta={config.noise.delta:g}, delta1={config.noise.delta1:g}, seed={config.noise.seed}",
        f"threads:    {threads}",
    ]
    for d in dirs:
        lines.append(f"writes:     {out / d}")
    return lines


def _print_result(result: ReconstructionResult) -> None:
    m = result.metrics
    print("\nReconstruction")
    print("--------------")
    print(f"valid nodes:      {int(result.valid.sum())} / {result.valid.size}")
    for key in ("linf_rel_error", "l2_rel_error", "linf_vs_true", "l2_vs_true", "linf_vs_model", "linf_model_vs_true"):
        v = m.get(key)
        print(f"{key + ':':<20}{'n/a' if v is None else f'{v:.3e}'}")
    masked = result.diagnostics.get("masked", {})
    if masked:
        print("masked:           " + ", ".join(f"{k}={v}" for k, v in sorted(masked.items())))
    print()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = apply_overrides(load_config(args.config), args)
        threads = resolve_threads(args.threads, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(config.output.directory)

    if args.dry_run:
        print("\n".join(_plan_lines(args.command, config, out, threads)))
        return EXIT_OK

    try:
        if args.command == "simulate":
            sweep = run_simulate(config, out, threads=threads, force=args.force)
            failed = sum(1 for n in sweep.nodes if n.failed)
            print(f"\nMeasurements: {len(sweep.nodes)} nodes ({failed} failed) -> {out / MEASUREMENTS_DIR}\n")
        elif args.command == "invert":
            _print_result(run_invert(config, out, force=args.force))
            print(f"Results: {out / RESULTS_DIR}\n")
        elif args.command == "roundtrip":
            _print_result(run_scenario(config, out, threads=threads, force=args.force))
            print(f"Results: {out / RESULTS_DIR}\n")
        elif args.command == "spectrum":
            report = run_spectrum(config, out, force=args.force)
            print(json.dumps(report["resonance"], indent=2))
        else:
            results = run_verification(config)
            width = max(len(r.name) for r in results)
            for r in results:
                value = "" if r.value is None else f"{r.value:.3e}"
                print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {value}  {r.detail}")
            if not all(r.passed for r in results):
                return EXIT_STAGE
    except OutputExistsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EXISTS
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
