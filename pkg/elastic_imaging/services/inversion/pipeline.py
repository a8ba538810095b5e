from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.enums import ExteriorRecovery, MaskReason
from elastic_imaging.domain.errors import DegenerateResonanceError, ElasticImagingError, InsufficientContrastError
from elastic_imaging.domain.herglotz import MeasurementSurfaceK
from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.domain.result import ReconstructionResult, RecoveredField
from elastic_imaging.domain.sweep import InjectionSweep
from elastic_imaging.services.inversion.steps import (
    extract_density,
    resolve_sign,
    step1_backscatter_moment,
    step3_green_moment,
)
from elastic_imaging.services.pointsource.herglotz import AlphaPolicy, HerglotzSystem, backproject_vector

logger = logging.getLogger(__name__)

_NODE_ERRORS = (ElasticImagingError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def _lattice_field(per_node: np.ndarray, shape) -> np.ndarray:
    return per_node.reshape(tuple(shape) + per_node.shape[1:])


def _density_over_anchors(fields: np.ndarray, sign_mask: np.ndarray, sweep: InjectionSweep, config: ScenarioConfig):
    """Average the per-anchor density estimates over the anchors where they are valid."""
    shape = sweep.lattice.shape
    omega = sweep.resonance.omega
    m = config.medium
    estimates = []
    for a, x in enumerate(sweep.anchors):
        rec = RecoveredField(values=_lattice_field(fields[:, a, :], shape), sign_mask=sign_mask, anchor_x=x)
        estimates.append(
            extract_density(rec, omega, m.lam, m.mu, sweep.lattice.spacing, config.inversion.tau_f_factor)
        )
    rho = np.stack([e.rho.reshape(-1) for e in estimates])
    im = np.stack([e.im_residual.reshape(-1) for e in estimates])
    ok = np.stack([e.valid.reshape(-1) for e in estimates])
    count = ok.sum(axis=0)
    with np.errstate(invalid="ignore"):
        rho_mean = np.where(count > 0, np.nansum(np.where(ok, rho, 0.0), axis=0) / np.maximum(count, 1), np.nan)
        im_mean = np.where(count > 0, np.nansum(np.where(ok, im, 0.0), axis=0) / np.maximum(count, 1), np.nan)
    first_reason = estimates[0].reasons.reshape(-1)
    return rho_mean, im_mean, count > 0, first_reason


def run_inversion(
    sweep: InjectionSweep,
    config: ScenarioConfig,
    system: Optional[HerglotzSystem] = None,
) -> ReconstructionResult:
    """Steps 1 to 5 over the injection lattice, isolating failures per node."""
    medium = ElasticMedium(lam=config.medium.lam, mu=config.medium.mu, rho_tilde=config.medium.rho_tilde)
    res = sweep.resonance
    wave = sweep.wave
    lattice = sweep.lattice
    n_nodes = lattice.size
    n_anchor = sweep.anchors.shape[0]
    if len(sweep.nodes) != n_nodes:
        raise ValueError(f"sweep has {len(sweep.nodes)} nodes, lattice needs {n_nodes}")
    if res.degenerate:
        raise DegenerateResonanceError(
            f"resonant eigenvalue is {len(res.cluster)}-fold degenerate (modes {res.cluster}); "
            "the inversion needs a simple resonance, use a reference shape without symmetry such as an ellipsoid",
            cluster=res.cluster,
        )

    reasons: List[MaskReason] = [MaskReason.NONE] * n_nodes
    diagnostics: Dict[str, Any] = {}

    # Step 1
    squared = np.full(n_nodes, np.nan + 0j, dtype=complex)
    floor = config.inversion.step1_noise_floor * float(np.linalg.norm(sweep.back_V))
    for i, node in enumerate(sweep.nodes):
        if node.failed or node.back_U is None:
            reasons[i] = MaskReason.MEASUREMENT_FAILED
            continue
        try:
            squared[i] = step1_backscatter_moment(
                node.back_U, sweep.back_V, sweep.back_direction, wave, res, medium, noise_floor=floor
            )
        except InsufficientContrastError as e:
            logger.debug("node %d: %s", i, e)
            reasons[i] = MaskReason.INSUFFICIENT_CONTRAST
        except _NODE_ERRORS as e:
            logger.warning("node %d step 1 failed: %s", i, e)
            reasons[i] = MaskReason.NUMERICAL
    logger.info("step 1: %d of %d nodes carry a squared moment", int(np.isfinite(squared).sum()), n_nodes)

    # Sign resolution
    signed_lat, sign_mask = resolve_sign(squared.reshape(lattice.shape), config.inversion.tau_factor)
    signed = signed_lat.reshape(-1)
    roots = np.abs(np.sqrt(squared))
    tau = config.inversion.tau_factor * float(np.nanmax(roots))
    for i in range(n_nodes):
        if reasons[i] == MaskReason.NONE and not np.isfinite(signed[i]):
            reasons[i] = MaskReason.SMALL_MOMENT

    # Step 2
    mode = config.exterior_recovery()
    differences = np.full((n_nodes, n_anchor, 3), np.nan + 0j, dtype=complex)
    if mode == ExteriorRecovery.POINT_SOURCE:
        if sweep.bank_V is None:
            raise ValueError("point-source recovery needs far-field banks")
        if system is None:
            kernel_sphere = sweep.bank_V.sphere.mirrored()
            surface = MeasurementSurfaceK.ball(
                kernel_sphere,
                config.surface.radius_factor * config.domain.radius,
                center=config.domain.center,
            )
            system = HerglotzSystem(surface, kernel_sphere, res.omega, medium)
        policy = AlphaPolicy.from_config(config.tikhonov)
        kernel_sets = []
        fit_log = []
        for x in sweep.anchors:
            fits = system.fit_point_source(x, policy)
            kernel_sets.append([f.kernel for f in fits])
            fit_log.append(
                {
                    "anchor": [float(v) for v in x],
                    "alpha": [f.alpha for f in fits],
                    "discrepancy": [f.discrepancy for f in fits],
                    "kernel_norm": [f.kernel_norm for f in fits],
                    "collision_warning": any(f.collision_warning for f in fits),
                }
            )
        diagnostics["kernels"] = fit_log
        for i, node in enumerate(sweep.nodes):
            if reasons[i] != MaskReason.NONE:
                continue
            if node.bank_U is None:
                reasons[i] = MaskReason.MEASUREMENT_FAILED
                continue
            try:
                delta = node.bank_U - sweep.bank_V
                for a, kernels in enumerate(kernel_sets):
                    differences[i, a] = backproject_vector(delta, kernels, medium)
            except _NODE_ERRORS as e:
                logger.warning("node %d back-projection failed: %s", i, e)
                reasons[i] = MaskReason.NUMERICAL
    else:
        for i, node in enumerate(sweep.nodes):
            if reasons[i] != MaskReason.NONE:
                continue
            if node.planted_diff is None:
                reasons[i] = MaskReason.MEASUREMENT_FAILED
                continue
            differences[i] = node.planted_diff
    logger.info("step 2: exterior differences recovered (%s)", mode.value)

    # Step 3
    green = np.full((n_nodes, n_anchor, 3), np.nan + 0j, dtype=complex)
    for i in range(n_nodes):
        if reasons[i] != MaskReason.NONE:
            continue
        for a in range(n_anchor):
            g = step3_green_moment(differences[i, a], signed[i], res, tau)
            if g is None:
                reasons[i] = MaskReason.SMALL_MOMENT
                break
            green[i, a] = g
        if reasons[i] != MaskReason.NONE:
            green[i] = np.nan

    # Steps 4-5
    rho_rec, im_res, valid, fd_reasons = _density_over_anchors(green, sign_mask, sweep, config)
    for i in range(n_nodes):
        if not valid[i] and reasons[i] == MaskReason.NONE:
            reasons[i] = fd_reasons[i] if fd_reasons[i] != MaskReason.NONE else MaskReason.NUMERICAL

    planted = [n.planted_green for n in sweep.nodes]
    if any(p is not None for p in planted):
        model_fields = np.full((n_nodes, n_anchor, 3), np.nan + 0j, dtype=complex)
        for i, p in enumerate(planted):
            if p is not None:
                model_fields[i] = p
        rho_model, _, _, _ = _density_over_anchors(model_fields, sign_mask, sweep, config)
    else:
        rho_model = np.full(n_nodes, np.nan)

    masked = {}
    for r in reasons:
        if r != MaskReason.NONE:
            masked[r.value] = masked.get(r.value, 0) + 1
    if masked:
        logger.warning("masked nodes by reason: %s", masked)
    diagnostics["masked"] = masked
    diagnostics["tau"] = tau
    diagnostics["max_abs_im_residual"] = float(np.nanmax(np.abs(im_res))) if np.any(valid) else None

    result = ReconstructionResult(
        lattice=lattice,
        positions=lattice.positions(),
        rho_true=np.array([n.rho_true for n in sweep.nodes], dtype=float),
        rho_model=rho_model,
        rho_rec=rho_rec,
        im_residual=im_res,
        valid=valid,
        reasons=reasons,
        squared_moment=squared,
        signed_moment=signed,
        green_moment=green,
        provenance={
            "config_hash": config.config_hash(),
            "source": sweep.source.value,
            "exterior_recovery": mode.value,
            "seed": sweep.seed,
        },
        diagnostics=diagnostics,
    )
    result = result.model_copy(update={"metrics": result.computed_metrics()})
    logger.info(
        "inversion done: %d valid nodes, linf_rel_error=%s",
        int(valid.sum()), result.metrics.get("linf_rel_error"),
    )
    return result
