"""
Measurement archives: arrays in sweep.npz, scalars and provenance in
manifest.json. `simulate` writes them, `invert` reads them back.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from elastic_imaging.domain.enums import DataSource, SphereRule
from elastic_imaging.domain.farfield import FarField, SphereGrid
from elastic_imaging.domain.medium import PlaneWave
from elastic_imaging.domain.spectrum import ResonanceInfo
from elastic_imaging.domain.sweep import InjectionSweep, LatticeSpec, NodeMeasurement

logger = logging.getLogger(__name__)

ARRAYS_NAME = "sweep.npz"
MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


def _complex_pair(c: complex):
    return [float(c.real), float(c.imag)]


def _stack(values, shape) -> tuple[np.ndarray, np.ndarray]:
    """Stack optional arrays; missing entries become NaN with a False presence flag."""
    out = np.full((len(values),) + tuple(shape), np.nan + 0j, dtype=complex)
    present = np.zeros(len(values), dtype=bool)
    for i, v in enumerate(values):
        if v is not None:
            out[i] = v
            present[i] = True
    return out, present


def save_sweep(sweep: InjectionSweep, directory: str | Path, extra: Optional[Dict[str, Any]] = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if sweep.bank_V is None:
        raise ValueError("only sweeps with far-field banks can be archived")
    sphere = sweep.bank_V.sphere
    m = sphere.size
    a = sweep.anchors.shape[0]
    nodes = sweep.nodes

    back_U, has_back = _stack([n.back_U for n in nodes], (3,))
    bank_p, has_bank = _stack([n.bank_U.p_values if n.bank_U is not None else None for n in nodes], (m, 3))
    bank_s, _ = _stack([n.bank_U.s_values if n.bank_U is not None else None for n in nodes], (m, 3))
    diff, has_diff = _stack([n.planted_diff for n in nodes], (a, 3))
    green, has_green = _stack([n.planted_green for n in nodes], (a, 3))

    res = sweep.resonance
    with (d / ARRAYS_NAME).open("wb") as f:
        np.savez(
            f,
            lattice_center=sweep.lattice.center,
            sphere_nodes=sphere.nodes,
            sphere_weights=sphere.weights,
            back_direction=sweep.back_direction,
            back_V=sweep.back_V,
            bank_V_p=sweep.bank_V.p_values,
            bank_V_s=sweep.bank_V.s_values,
            anchors=sweep.anchors,
            moment=res.moment,
            E_B=res.E_B,
            z=np.array([n.z for n in nodes]),
            rho_true=np.array([n.rho_true for n in nodes], dtype=float),
            back_U=back_U,
            has_back=has_back,
            bank_U_p=bank_p,
            bank_U_s=bank_s,
            has_bank=has_bank,
            planted_diff=diff,
            has_diff=has_diff,
            planted_green=green,
            has_green=has_green,
        )

    manifest = {
        "format_version": FORMAT_VERSION,
        "lattice": {"n": sweep.lattice.n, "spacing": sweep.lattice.spacing},
        "sphere_rule": sphere.rule.value,
        "wave": {
            "theta": sweep.wave.theta.tolist(),
            "theta_perp": sweep.wave.theta_perp.tolist(),
            "beta1": _complex_pair(sweep.wave.beta1),
            "beta2": _complex_pair(sweep.wave.beta2),
            "omega": sweep.wave.omega,
        },
        "resonance": res.model_dump(mode="json", exclude={"moment", "E_B"}),
        "source": sweep.source.value,
        "delta": sweep.delta,
        "delta1": sweep.delta1,
        "seed": sweep.seed,
        "errors": {str(n.index): n.error for n in nodes if n.error is not None},
    }
    if extra:
        manifest.update(extra)
    with (d / MANIFEST_NAME).open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    logger.info("saved %d-node sweep to %s", len(nodes), d)
    return d


def load_manifest(directory: str | Path) -> Dict[str, Any]:
    with (Path(directory) / MANIFEST_NAME).open("r", encoding="utf-8") as f:
        return json.load(f)


def load_sweep(directory: str | Path) -> InjectionSweep:
    d = Path(directory)
    if not (d / ARRAYS_NAME).exists() or not (d / MANIFEST_NAME).exists():
        raise FileNotFoundError(f"no measurement archive in {d}")
    manifest = load_manifest(d)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported measurement archive version {manifest.get('format_version')!r}")

    with np.load(d / ARRAYS_NAME, allow_pickle=False) as data:
        arr = {k: data[k] for k in data.files}

    sphere = SphereGrid(nodes=arr["sphere_nodes"], weights=arr["sphere_weights"], rule=SphereRule(manifest["sphere_rule"]))
    w = manifest["wave"]
    wave = PlaneWave(
        theta=w["theta"], theta_perp=w["theta_perp"], beta1=w["beta1"], beta2=w["beta2"], omega=w["omega"],
    )
    resonance = ResonanceInfo(**manifest["resonance"], moment=arr["moment"], E_B=arr["E_B"])
    lattice = LatticeSpec(center=arr["lattice_center"], n=manifest["lattice"]["n"], spacing=manifest["lattice"]["spacing"])
    errors = manifest.get("errors", {})

    nodes = []
    for i in range(arr["z"].shape[0]):
        bank_U = None
        if arr["has_bank"][i]:
            bank_U = FarField(sphere=sphere, p_values=arr["bank_U_p"][i], s_values=arr["bank_U_s"][i])
        nodes.append(
            NodeMeasurement(
                index=i,
                z=arr["z"][i],
                rho_true=float(arr["rho_true"][i]),
                back_U=arr["back_U"][i] if arr["has_back"][i] else None,
                bank_U=bank_U,
                planted_diff=arr["planted_diff"][i] if arr["has_diff"][i] else None,
                planted_green=arr["planted_green"][i] if arr["has_green"][i] else None,
                error=errors.get(str(i)),
            )
        )
    return InjectionSweep(
        lattice=lattice,
        wave=wave,
        back_direction=arr["back_direction"],
        back_V=arr["back_V"],
        bank_V=FarField(sphere=sphere, p_values=arr["bank_V_p"], s_values=arr["bank_V_s"]),
        anchors=arr["anchors"],
        resonance=resonance,
        source=DataSource(manifest["source"]),
        delta=manifest["delta"],
        delta1=manifest["delta1"],
        seed=manifest["seed"],
        nodes=nodes,
    )
