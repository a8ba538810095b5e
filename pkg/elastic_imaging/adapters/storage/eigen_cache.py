from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from elastic_imaging.domain.errors import CacheMismatchError
from elastic_imaging.domain.grid import VoxelGrid
from elastic_imaging.domain.spectrum import EigenSystem

logger = logging.getLogger(__name__)


def params_hash(params: Dict[str, Any]) -> str:
    payload = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_eigensystem(eig: EigenSystem, path: str | Path, params: Dict[str, Any]) -> None:
    """npz archive of the eigenpairs plus the hash of the assembly parameters."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    g = eig.grid
    with p.open("wb") as f:
        np.savez(
            f,
            origin=g.origin,
            spacing=np.array(g.spacing),
            cells=g.cells,
            eigenvalues=eig.eigenvalues,
            eigenfunctions=eig.eigenfunctions,
            moments=eig.moments,
            params_hash=np.array(params_hash(params)),
        )
    logger.info("cached eigensystem (%d modes) at %s", eig.size, p)


def load_eigensystem(path: str | Path, params: Dict[str, Any]) -> Optional[EigenSystem]:
    """
    Cached eigensystem, or None when no cache exists.
    Raises CacheMismatchError when the cache was built with other parameters.
    """
    p = Path(path)
    if not p.exists():
        return None
    with np.load(p, allow_pickle=False) as data:
        stored = str(data["params_hash"])
        expected = params_hash(params)
        if stored != expected:
            raise CacheMismatchError(
                f"eigensystem cache {p} was built with different parameters "
                f"({stored[:12]} != {expected[:12]}); delete it or point output.eigen_cache elsewhere"
            )
        grid = VoxelGrid(origin=data["origin"], spacing=float(data["spacing"]), cells=data["cells"])
        eig = EigenSystem(
            grid=grid,
            eigenvalues=data["eigenvalues"],
            eigenfunctions=data["eigenfunctions"],
            moments=data["moments"],
        )
    logger.info("loaded cached eigensystem from %s", p)
    return eig
