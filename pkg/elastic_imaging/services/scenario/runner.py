"""
Stage orchestration for one scenario: spectrum, resonance, phantom,
measurements, inversion and export. A fatal error inside a stage surfaces as
StageError labelled with the stage name.
"""
from __future__ import annotations

import json
import logging
import platform
import shutil
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np
import pydantic
import scipy

import elastic_imaging
from elastic_imaging.adapters.export.csv_export import export_far_field_csv
from elastic_imaging.adapters.export.json_export import export_result, write_metadata
from elastic_imaging.adapters.storage.config_store import save_config
from elastic_imaging.adapters.storage.eigen_cache import load_eigensystem, save_eigensystem
from elastic_imaging.adapters.storage.measurement_store import load_manifest, load_sweep, save_sweep
from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.errors import ConfigError, OutputExistsError, StageError
from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.domain.result import ReconstructionResult
from elastic_imaging.domain.spectrum import EigenSystem, ResonanceInfo
from elastic_imaging.domain.sweep import InjectionSweep
from elastic_imaging.services.inversion.pipeline import run_inversion
from elastic_imaging.services.scenario.measurements import (
    NOISE_MODEL,
    build_lattice,
    generate_measurements,
    lattice_cells,
    resonance_for,
)
from elastic_imaging.services.scenario.phantom import build_phantom
from elastic_imaging.services.spectrum.newtonian import newtonian_eigensystem, sigma_gap
from elastic_imaging.services.spectrum.shapes import reference_shape

logger = logging.getLogger(__name__)

MEASUREMENTS_DIR = "measurements"
RESULTS_DIR = "results"
SPECTRUM_DIR = "spectrum"


@dataclass
class RunLog:
    """Wall-clock timings per stage; goes to metadata.json only."""
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    timings: Dict[str, float] = field(default_factory=dict)


@contextmanager
def stage(name: str, log: Optional[RunLog] = None) -> Iterator[None]:
    t0 = time.perf_counter()
    logger.info("stage %s: start", name)
    try:
        yield
    except (StageError, ConfigError, OutputExistsError):
        raise
    except Exception as e:
        logger.error("stage %s failed: %s", name, e)
        raise StageError(name, e) from e
    finally:
        if log is not None:
            log.timings[name] = time.perf_counter() - t0
    logger.info("stage %s: done", name)


def prepare_output(directory: str | Path, force: bool = False) -> Path:
    """Create an empty output directory; an existing non-empty one needs force."""
    d = Path(directory)
    if d.exists() and any(d.iterdir()):
        if not force:
            raise OutputExistsError(f"{d} already exists; pass --force to overwrite it")
        shutil.rmtree(d)
    d.mkdir(parents=True, exist_ok=True)
    return d


def versions() -> Dict[str, str]:
    return {
        "elastic_imaging": elastic_imaging.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def _metadata(config: ScenarioConfig, log: RunLog, **extra: Any) -> Dict[str, Any]:
    meta = {
        "started_at": log.started_at,
        "timings_s": log.timings,
        "versions": versions(),
        "config_hash": config.config_hash(),
        "seed": config.noise.seed,
        "noise_model": NOISE_MODEL,
        "source": config.source.value,
    }
    meta.update(extra)
    return meta


# -----------------------------
# Stages
# -----------------------------
def _spectrum_medium(config: ScenarioConfig) -> ElasticMedium:
    m = config.medium
    return ElasticMedium(lam=m.lam, mu=m.mu, rho_tilde=m.rho_tilde)


def _cache_params(config: ScenarioConfig) -> Dict[str, Any]:
    return {
        "reference_shape": config.reference_shape.model_dump(mode="json"),
        "lam": config.medium.lam,
        "mu": config.medium.mu,
    }


def compute_spectrum(config: ScenarioConfig, log: Optional[RunLog] = None) -> Tuple[EigenSystem, ResonanceInfo]:
    with stage("spectrum", log):
        cache = config.output.eigen_cache
        params = _cache_params(config)
        eig = load_eigensystem(cache, params) if cache else None
        if eig is None:
            shape = config.reference_shape
            gridB = reference_shape(shape.kind, shape.resolution, shape.axes)
            eig = newtonian_eigensystem(gridB, _spectrum_medium(config))
            if cache:
                save_eigensystem(eig, cache, params)
    with stage("resonance", log):
        res = resonance_for(config, eig)
    return eig, res


def simulate(
    config: ScenarioConfig,
    threads: int = 1,
    log: Optional[RunLog] = None,
) -> Tuple[ElasticMedium, EigenSystem, InjectionSweep]:
    with stage("phantom", log):
        medium = build_phantom(config)
    eig, res = compute_spectrum(config, log)
    with stage("measurements", log):
        sweep = generate_measurements(config, medium, eig, resonance=res, threads=threads)
    return medium, eig, sweep


def write_measurements(config: ScenarioConfig, sweep: InjectionSweep, directory: Path, log: RunLog) -> None:
    with stage("export_measurements", log):
        save_sweep(sweep, directory, extra={"config_hash": config.config_hash()})
        save_config(config, directory / "config.yaml")
        write_metadata(_metadata(config, log), directory)


def invert(config: ScenarioConfig, sweep: InjectionSweep, log: Optional[RunLog] = None) -> ReconstructionResult:
    with stage("inversion", log):
        return run_inversion(sweep, config)


def write_results(
    config: ScenarioConfig,
    result: ReconstructionResult,
    sweep: InjectionSweep,
    directory: Path,
    log: RunLog,
) -> None:
    with stage("export_results", log):
        export_result(result, directory)
        if sweep.bank_V is not None:
            export_far_field_csv(sweep.bank_V, directory / "farfields" / "background.csv")
            for node in sweep.nodes:
                if node.bank_U is not None:
                    export_far_field_csv(node.bank_U, directory / "farfields" / f"node_{node.index:04d}.csv")
        write_metadata(_metadata(config, log), directory)
    logger.info("results written to %s", directory)


# -----------------------------
# Subcommand entry points
# -----------------------------
def run_simulate(config: ScenarioConfig, out: str | Path, threads: int = 1, force: bool = False) -> InjectionSweep:
    directory = prepare_output(Path(out) / MEASUREMENTS_DIR, force)
    log = RunLog()
    _, _, sweep = simulate(config, threads, log)
    write_measurements(config, sweep, directory, log)
    return sweep


def run_invert(config: ScenarioConfig, out: str | Path, force: bool = False) -> ReconstructionResult:
    """Invert the archive under out/measurements into out/results."""
    with stage("load"):
        sweep = load_sweep(Path(out) / MEASUREMENTS_DIR)
        stored_hash = load_manifest(Path(out) / MEASUREMENTS_DIR).get("config_hash")
    if stored_hash != config.config_hash():
        logger.warning("measurements were simulated with a different config (hash %s)", str(stored_hash)[:12])
    directory = prepare_output(Path(out) / RESULTS_DIR, force)
    log = RunLog()
    result = invert(config, sweep, log)
    write_results(config, result, sweep, directory, log)
    return result


def run_scenario(config: ScenarioConfig, out: str | Path, threads: int = 1, force: bool = False) -> ReconstructionResult:
    """Full loop: spectrum, resonance, measurements, inversion; writes both archives."""
    out = Path(out)
    mdir = prepare_output(out / MEASUREMENTS_DIR, force)
    rdir = prepare_output(out / RESULTS_DIR, force)
    log = RunLog()
    _, _, sweep = simulate(config, threads, log)
    write_measurements(config, sweep, mdir, log)
    result = invert(config, sweep, log)
    write_results(config, result, sweep, rdir, log)
    return result


def spectrum_report(config: ScenarioConfig, n_modes: int = 10) -> Dict[str, Any]:
    """
    Leading modes and the resonance. The sigma gap uses the phantom density
    rho_0(z) at the sweep centre; gap_ratio_min is the smallest
    gap_other / gap_n0 over the lattice nodes.
    """
    eig, res = compute_spectrum(config)
    k = min(n_modes, eig.size)
    medium = build_phantom(config)
    lattice = build_lattice(config, medium.grid)
    node_rho = medium.rho_field[lattice_cells(lattice, medium.grid)]
    rho0 = float(medium.rho_field[medium.grid.locate(lattice.center)[0]])
    gap_n0, gap_other = sigma_gap(eig, res.n0, res.rho1, rho0, res.omega, a=res.a, exclude=res.cluster)
    ratios = []
    for rho in node_rho:
        g0, g1 = sigma_gap(eig, res.n0, res.rho1, float(rho), res.omega, a=res.a, exclude=res.cluster)
        ratios.append(g1 / g0)
    return {
        "cells": eig.grid.n_cells,
        "modes": [
            {
                "index": n,
                "eigenvalue": float(eig.eigenvalues[n]),
                "moment": [float(v) for v in eig.moments[n]],
                "moment_norm": float(np.linalg.norm(eig.moments[n])),
            }
            for n in range(k)
        ],
        "resonance": {
            "n0": res.n0,
            "lambda_n0_B": res.lambda_n0_B,
            "omega_n0": res.omega_n0,
            "omega": res.omega,
            "rho1": res.rho1,
            "degenerate": res.degenerate,
            "cluster": res.cluster,
            "rho0_z": rho0,
            "gap_n0": gap_n0,
            "gap_other": gap_other,
            "gap_ratio_min": float(min(ratios)),
        },
    }


def run_spectrum(config: ScenarioConfig, out: str | Path, force: bool = False) -> Dict[str, Any]:
    directory = prepare_output(Path(out) / SPECTRUM_DIR, force)
    report = spectrum_report(config)
    with (directory / "spectrum.json").open("w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    return report
