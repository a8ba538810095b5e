from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List

import numpy as np

from elastic_imaging.domain.enums import SphereRule
from elastic_imaging.domain.farfield import FarField, SphereGrid
from elastic_imaging.domain.result import ReconstructionResult

LATTICE_COLUMNS = [
    "index", "zx", "zy", "zz",
    "rho_true", "rho_model", "rho_rec",
    "mask", "reason", "im_residual",
    "sq_re", "sq_im", "sm_re", "sm_im",
]
FARFIELD_COLUMNS = [
    "node_x", "node_y", "node_z", "weight", "tag",
    "x_re", "x_im", "y_re", "y_im", "z_re", "z_im",
]


def _num(x) -> str:
    # repr keeps every bit, so a written file reads back to the same floats
    return repr(float(x))


def green_columns(n_anchors: int) -> List[str]:
    cols = []
    for a in range(n_anchors):
        for k in "xyz":
            cols += [f"g_{a}_{k}_re", f"g_{a}_{k}_im"]
    return cols


def export_lattice_csv(result: ReconstructionResult, path: str | Path) -> None:
    """
    One row per lattice node. mask is 1 for masked nodes, 0 for valid ones;
    reason is the mask reason ("none" on valid nodes).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_anchors = result.green_moment.shape[1]
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LATTICE_COLUMNS + green_columns(n_anchors))
        for i in range(result.positions.shape[0]):
            z = result.positions[i]
            sq = complex(result.squared_moment[i])
            sm = complex(result.signed_moment[i])
            row = [
                str(i), _num(z[0]), _num(z[1]), _num(z[2]),
                _num(result.rho_true[i]), _num(result.rho_model[i]), _num(result.rho_rec[i]),
                "0" if result.valid[i] else "1", result.reasons[i].value, _num(result.im_residual[i]),
                _num(sq.real), _num(sq.imag), _num(sm.real), _num(sm.imag),
            ]
            for g in result.green_moment[i].reshape(-1):
                row += [_num(g.real), _num(g.imag)]
            w.writerow(row)


def read_lattice_csv(path: str | Path) -> Dict[str, np.ndarray]:
    """Columns of a lattice CSV as arrays (green moments as (L, A, 3) complex)."""
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path} has no lattice rows")
    header = list(rows[0].keys())
    n_anchors = sum(1 for c in header if c.startswith("g_") and c.endswith("_x_re"))

    def col(name, dtype=float):
        return np.array([dtype(r[name]) for r in rows])

    green = np.empty((len(rows), n_anchors, 3), dtype=complex)
    for a in range(n_anchors):
        for j, k in enumerate("xyz"):
            green[:, a, j] = col(f"g_{a}_{k}_re") + 1j * col(f"g_{a}_{k}_im")
    return {
        "index": col("index", int),
        "positions": np.stack([col("zx"), col("zy"), col("zz")], axis=1),
        "rho_true": col("rho_true"),
        "rho_model": col("rho_model"),
        "rho_rec": col("rho_rec"),
        "valid": col("mask", int) == 0,
        "reason": np.array([r["reason"] for r in rows], dtype=object),
        "im_residual": col("im_residual"),
        "squared_moment": col("sq_re") + 1j * col("sq_im"),
        "signed_moment": col("sm_re") + 1j * col("sm_im"),
        "green_moment": green,
    }


def export_far_field_csv(ff: FarField, path: str | Path) -> None:
    """Two rows per sphere node: the p-part (tag p) then the s-part (tag s)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(FARFIELD_COLUMNS)
        for node, weight, p, s in zip(ff.sphere.nodes, ff.sphere.weights, ff.p_values, ff.s_values):
            for tag, v in (("p", p), ("s", s)):
                row = [_num(node[0]), _num(node[1]), _num(node[2]), _num(weight), tag]
                for c in v:
                    row += [_num(c.real), _num(c.imag)]
                w.writerow(row)


def read_far_field_csv(path: str | Path, rule: SphereRule = SphereRule.GAUSS) -> FarField:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    p_rows = [r for r in rows if r["tag"] == "p"]
    s_rows = [r for r in rows if r["tag"] == "s"]
    if len(p_rows) != len(s_rows):
        raise ValueError(f"{path}: every node needs one p row and one s row")

    def vec(r):
        return np.array([float(r[f"{k}_re"]) + 1j * float(r[f"{k}_im"]) for k in "xyz"])

    nodes = np.array([[float(r["node_x"]), float(r["node_y"]), float(r["node_z"])] for r in p_rows])
    weights = np.array([float(r["weight"]) for r in p_rows])
    sphere = SphereGrid(nodes=nodes, weights=weights, rule=rule)
    return FarField(
        sphere=sphere,
        p_values=np.array([vec(r) for r in p_rows]),
        s_values=np.array([vec(r) for r in s_rows]),
    )
