from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict

import numpy as np

from elastic_imaging.adapters.export.csv_export import export_lattice_csv, read_lattice_csv
from elastic_imaging.domain.enums import MaskReason
from elastic_imaging.domain.result import ReconstructionResult
from elastic_imaging.domain.sweep import LatticeSpec

LATTICE_CSV = "lattice.csv"
SUMMARY_JSON = "summary.json"
METADATA_JSON = "metadata.json"


def _clean(value: Any) -> Any:
    """Plain JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def result_summary(result: ReconstructionResult) -> Dict[str, Any]:
    lat = result.lattice
    return _clean(
        {
            "lattice": {
                "center": lat.center,
                "n": lat.n,
                "spacing": lat.spacing,
                "anchors": int(result.green_moment.shape[1]),
            },
            "metrics": result.metrics,
            "provenance": result.provenance,
            "diagnostics": result.diagnostics,
        }
    )


def export_result(result: ReconstructionResult, directory: str | Path, indent: int = 2) -> Path:
    """
    lattice.csv plus summary.json. Both are byte-reproducible for a fixed
    config and seed; run timings belong in metadata.json.
    """
    if not result.metrics_consistent():
        raise ValueError("stored metrics do not match the per-node data; refusing to write")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    export_lattice_csv(result, d / LATTICE_CSV)
    with (d / SUMMARY_JSON).open("w", encoding="utf-8") as f:
        json.dump(result_summary(result), f, indent=indent, sort_keys=True)
        f.write("\n")
    return d


def write_metadata(metadata: Dict[str, Any], directory: str | Path, indent: int = 2) -> Path:
    path = Path(directory) / METADATA_JSON
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(_clean(metadata), f, indent=indent, sort_keys=True)
    return path


def load_result(directory: str | Path) -> ReconstructionResult:
    d = Path(directory)
    with (d / SUMMARY_JSON).open("r", encoding="utf-8") as f:
        summary = json.load(f)
    cols = read_lattice_csv(d / LATTICE_CSV)
    lat = summary["lattice"]
    metrics = {k: (None if v is None else float(v)) for k, v in summary["metrics"].items()}
    return ReconstructionResult(
        lattice=LatticeSpec(center=lat["center"], n=lat["n"], spacing=lat["spacing"]),
        positions=cols["positions"],
        rho_true=cols["rho_true"],
        rho_model=cols["rho_model"],
        rho_rec=cols["rho_rec"],
        im_residual=cols["im_residual"],
        valid=cols["valid"],
        reasons=[MaskReason(r) for r in cols["reason"]],
        squared_moment=cols["squared_moment"],
        signed_moment=cols["signed_moment"],
        green_moment=cols["green_moment"],
        metrics=metrics,
        provenance=summary["provenance"],
        diagnostics=summary["diagnostics"],
    )
