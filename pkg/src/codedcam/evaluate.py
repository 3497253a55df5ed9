"""Trajectory association, rigid alignment, ATE, and ablation sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, AssociationError
from .vo import Trajectory, rigid_fit

__all__ = [
    "AlignmentResult",
    "AblationSpec",
    "associate",
    "rigid_align_no_scale",
    "similarity_align",
    "compute_ate",
    "run_ablation",
]


@dataclass(frozen=True)
class AlignmentResult:
    rotation: np.ndarray
    translation: np.ndarray
    rmse: float
    pairs_used: int
    scale: float = 1.0


@dataclass(frozen=True)
class AblationSpec:
    """One sweep axis: phase-mask size (cells) or focus distance (meters)."""

    axis: str                 # "mask_size" | "focus_distance"
    values: tuple

    def __post_init__(self):
        if self.axis not in ("mask_size", "focus_distance"):
            raise ValueError(f"unknown ablation axis {self.axis!r}")
        if not self.values or len(set(self.values)) != len(self.values):
            raise ValueError("values must be nonempty and distinct")


def associate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02) -> list[tuple[int, int]]:
    """Greedy nearest-timestamp pairing with |dt| <= max_dt, each pose used once."""
    te, tg = est.timestamps, gt.timestamps
    candidates = []
    for i, t in enumerate(te):
        dt = np.abs(tg - t)
        for j in np.nonzero(dt <= max_dt)[0]:
            candidates.append((dt[j], i, int(j)))
    candidates.sort()
    used_e: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_e or j in used_g:
            continue
        used_e.add(i)
        used_g.add(j)
        pairs.append((i, j))
    if not pairs:
        raise AssociationError(f"no pose pairs within {max_dt} s")
    pairs.sort()
    return pairs


def _align(est_positions: np.ndarray, gt_positions: np.ndarray,
           with_scale: bool) -> AlignmentResult:
    est = np.asarray(est_positions, dtype=float).reshape(-1, 3)
    gt = np.asarray(gt_positions, dtype=float).reshape(-1, 3)
    if est.shape != gt.shape:
        raise ValueError("position lists must be paired")
    n = len(est)
    if n < 3:
        raise AlignmentError(f"need >= 3 pairs, got {n}")
    centered = est - est.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1e-12):
        raise AlignmentError("degenerate (collinear) trajectory geometry")
    rot, t = rigid_fit(est, gt)
    scale = 1.0
    if with_scale:
        # Umeyama scale on top of the rotation estimate
        var = (centered**2).sum() / n
        cov = centered.T @ (gt - gt.mean(axis=0)) / n
        u, s, vt = np.linalg.svd(cov)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        scale = float((s[0] + s[1] + d * s[2]) / var) if var > 0 else 1.0
        t = gt.mean(axis=0) - scale * rot @ est.mean(axis=0)
    resid = gt - (scale * est @ rot.T + t)
    rmse = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return AlignmentResult(rotation=rot, translation=t, rmse=rmse, pairs_used=n, scale=scale)


def rigid_align_no_scale(est_positions, gt_positions) -> AlignmentResult:
    """Closed-form SE(3) least-squares alignment; scale fixed at 1."""
    return _align(est_positions, gt_positions, with_scale=False)


def similarity_align(est_positions, gt_positions) -> AlignmentResult:
    """Sim(3) alignment (with scale); for comparison only, never the default."""
    return _align(est_positions, gt_positions, with_scale=True)


def compute_ate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02,
                with_scale: bool = False) -> float:
    """RMSE of translation residuals after associating and rigidly aligning."""
    pairs = associate(est, gt, max_dt)
    ep = est.positions[[i for i, _ in pairs]]
    gp = gt.positions[[j for _, j in pairs]]
    return _align(ep, gp, with_scale=with_scale).rmse


def run_ablation(spec: AblationSpec, dataset, base_config, trials: int = 1) -> list[dict]:
    """Re-run the full pipeline once per swept value; one row per value.

    Rows carry the swept value, depth metrics, and ATE (median over `trials`
    seeded trials).  A failing value is recorded in its row, and the sweep
    continues.
    """
    from .pipeline import run_pipeline  # local import: pipeline pulls in io

    rows = []
    for value in spec.values:
        row = {"axis": spec.axis, "value": value}
        try:
            config = base_config.with_override(spec.axis, value)
            ates, metrics = [], None
            for trial in range(max(1, trials)):
                result = run_pipeline(dataset, config, seed_offset=trial)
                ates.append(result["ate"])
                metrics = result["depth_metrics"]
            row.update(metrics)
            row["ate"] = float(np.median(ates))
            row["error"] = None
        except Exception as exc:  # per-value failures must not kill the sweep
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
