from __future__ import annotations

from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from elastic_imaging.domain.enums import DataSource, MaskReason
from elastic_imaging.domain.sweep import LatticeSpec


class RecoveredField(BaseModel):
    """G(z, x) . m on the lattice for one anchor x (up to one global sign)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray      # (n, n, n, 3), NaN on masked nodes
    sign_mask: np.ndarray   # (n, n, n) in {-1, 0, +1}; 0 = indeterminate
    anchor_x: np.ndarray


def relative_errors(rec: np.ndarray, ref: np.ndarray, valid: np.ndarray) -> Dict[str, Optional[float]]:
    ok = valid & np.isfinite(rec) & np.isfinite(ref)
    if not np.any(ok):
        return {"linf": None, "l2": None}
    diff = rec[ok] - ref[ok]
    linf = float(np.max(np.abs(diff)) / np.max(np.abs(ref[ok])))
    l2 = float(np.linalg.norm(diff) / np.linalg.norm(ref[ok]))
    return {"linf": linf, "l2": l2}


class ReconstructionResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lattice: LatticeSpec
    positions: np.ndarray
    rho_true: np.ndarray
    rho_model: np.ndarray
    rho_rec: np.ndarray
    im_residual: np.ndarray
    valid: np.ndarray
    reasons: List[MaskReason]
    squared_moment: np.ndarray
    signed_moment: np.ndarray
    green_moment: np.ndarray
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)
    provenance: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    def computed_metrics(self) -> Dict[str, Optional[float]]:
        """
        Headline error is against the true phantom, except for surrogate data
        where the pipeline must reproduce the model density exactly.
        """
        true = relative_errors(self.rho_rec, self.rho_true, self.valid)
        model = relative_errors(self.rho_rec, self.rho_model, self.valid)
        floor = relative_errors(self.rho_model, self.rho_true, self.valid)
        out: Dict[str, Optional[float]] = {
            "linf_vs_true": true["linf"],
            "l2_vs_true": true["l2"],
            "linf_vs_model": model["linf"],
            "l2_vs_model": model["l2"],
            "linf_model_vs_true": floor["linf"],
            "valid_nodes": float(int(self.valid.sum())),
        }
        surrogate = self.provenance.get("source") == DataSource.SURROGATE.value
        headline = model if surrogate and np.any(np.isfinite(self.rho_model)) else true
        out["linf_rel_error"] = headline["linf"]
        out["l2_rel_error"] = headline["l2"]
        return out

    def metrics_consistent(self, rtol: float = 1e-12) -> bool:
        fresh = self.computed_metrics()
        for key, value in fresh.items():
            stored = self.metrics.get(key)
            if value is None or stored is None:
                if value is not stored:
                    return False
                continue
            if abs(value - stored) > rtol * max(1.0, abs(value)):
                return False
        return True

    def silent_holes(self) -> int:
        """Masked nodes without a recorded reason."""
        return sum(1 for ok, r in zip(self.valid, self.reasons) if not ok and r == MaskReason.NONE)


class DensityEstimate(BaseModel):
    """Per-node density from one recovered field; arrays share the lattice shape."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rho: np.ndarray
    im_residual: np.ndarray
    valid: np.ndarray
    reasons: np.ndarray     # object array of MaskReason
