"""Frame-to-frame RGB-D visual odometry on coded frames.

Pipeline per frame: unsharp-mask the coded RGB, detect/match pyramid features
against the previous frame, back-project both sides with their own depth maps
(gated at depth_gate), RANSAC a rigid 3D-3D pose, and compose onto the running
absolute pose.  No keyframes, no loop closure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import PoseEstimationError
from .features import Keypoint, detect_features, match_features, rgb_to_gray
from .render import Intrinsics

__all__ = [
    "Pose",
    "Trajectory",
    "VoConfig",
    "unsharp_mask",
    "backproject",
    "rigid_fit",
    "estimate_relative_pose",
    "run_odometry",
]

log = logging.getLogger(__name__)


@dataclass
class Pose:
    """Camera-to-world rigid transform at a timestamp."""

    rotation: np.ndarray      # (3, 3)
    translation: np.ndarray   # (3,)
    timestamp: float = 0.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6 or abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation must be orthonormal with det +1")

    @classmethod
    def identity(cls, timestamp: float = 0.0) -> "Pose":
        return cls(np.eye(3), np.zeros(3), timestamp)

    def compose(self, other: "Pose", timestamp: float = 0.0) -> "Pose":
        """self then other applied in self's frame: T = self * other."""
        rot = _orthonormalize(self.rotation @ other.rotation)
        t = self.rotation @ other.translation + self.translation
        return Pose(rot, t, timestamp)

    def inverse(self) -> "Pose":
        rot = self.rotation.T
        return Pose(rot, -rot @ self.translation, self.timestamp)


@dataclass
class Trajectory:
    poses: list

    def __post_init__(self):
        if not self.poses:
            raise ValueError("trajectory must be nonempty")
        ts = [p.timestamp for p in self.poses]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.poses])

    @property
    def positions(self) -> np.ndarray:
        return np.stack([p.translation for p in self.poses])

    def __len__(self):
        return len(self.poses)


@dataclass
class VoConfig:
    pyramid_levels: int = 4
    scale_factor: float = 1.2
    max_features: int = 1000
    depth_gate: float = 3.0
    ransac_iterations: int = 500
    inlier_threshold: float = 0.05
    unsharp_amount: float = 1.0
    unsharp_radius: float = 2.0
    min_inliers: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        for name in ("scale_factor", "max_features", "depth_gate", "ransac_iterations",
                     "inlier_threshold", "unsharp_radius", "min_inliers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.unsharp_amount < 0:
            raise ValueError("unsharp_amount must be >= 0")


def _orthonormalize(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def unsharp_mask(image: np.ndarray, amount: float = 1.0, radius: float = 2.0) -> np.ndarray:
    """out = clamp(in + amount*(in - gaussian(in, radius)), 0, 1)."""
    if amount < 0 or radius <= 0:
        raise ValueError("need amount >= 0 and radius > 0")
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        blur = np.stack([ndimage.gaussian_filter(img[:, :, c], radius, mode="nearest")
                         for c in range(img.shape[2])], axis=2)
    else:
        blur = ndimage.gaussian_filter(img, radius, mode="nearest")
    return np.clip(img + amount * (img - blur), 0.0, 1.0)


def backproject(keypoint: Keypoint, depth_map: np.ndarray, intrinsics: Intrinsics,
                depth_gate: float = 3.0) -> np.ndarray | None:
    """Pinhole back-projection of a keypoint; None when depth is missing/gated."""
    h, w = depth_map.shape
    xi = int(round(keypoint.x))
    yi = int(round(keypoint.y))
    if not (0 <= xi < w and 0 <= yi < h):
        return None
    z = depth_map[yi, xi]
    if not np.isfinite(z) or z <= 0 or z > depth_gate:
        return None
    return np.array([
        z * (keypoint.x - intrinsics.cx) / intrinsics.fx,
        z * (keypoint.y - intrinsics.cy) / intrinsics.fy,
        z,
    ])


def rigid_fit(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares (R, t) with dst ~= R @ src + t (SVD, reflection-corrected)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    cov = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cd - rot @ cs
    return rot, t


def _degenerate(points: np.ndarray) -> bool:
    v1 = points[1] - points[0]
    v2 = points[2] - points[0]
    scale = max(np.linalg.norm(v1), np.linalg.norm(v2), 1e-12)
    return np.linalg.norm(np.cross(v1, v2)) < 1e-6 * scale**2


def estimate_relative_pose(points_prev: np.ndarray, points_curr: np.ndarray,
                           config: VoConfig) -> tuple[Pose, int]:
    """RANSAC rigid alignment with points_curr ~= R @ points_prev + t.

    Returns the inlier-refit pose and the inlier count; raises
    PoseEstimationError when correspondences or inliers are insufficient.
    """
    prev = np.asarray(points_prev, dtype=float).reshape(-1, 3)
    curr = np.asarray(points_curr, dtype=float).reshape(-1, 3)
    if prev.shape != curr.shape:
        raise ValueError("point lists must be paired")
    n = len(prev)
    if n < 3:
        raise PoseEstimationError(f"need >= 3 correspondences, got {n}")
    rng = np.random.default_rng(config.seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    best_err = np.inf
    for _ in range(config.ransac_iterations):
        sample = rng.choice(n, size=3, replace=False)
        if _degenerate(prev[sample]):
            continue
        rot, t = rigid_fit(prev[sample], curr[sample])
        resid = np.linalg.norm(curr - (prev @ rot.T + t), axis=1)
        inliers = resid < config.inlier_threshold
        count = int(inliers.sum())
        err = float(resid[inliers].sum()) if count else np.inf
        if count > best_count or (count == best_count and err < best_err):
            best_count, best_err, best_inliers = count, err, inliers
    if best_inliers is None or best_count < max(3, config.min_inliers):
        raise PoseEstimationError(
            f"only {best_count} inliers (min {config.min_inliers})")
    rot, t = rigid_fit(prev[best_inliers], curr[best_inliers])
    return Pose(_orthonormalize(rot), t), best_count


def run_odometry(frames, intrinsics: Intrinsics, config: VoConfig = VoConfig()) -> Trajectory:
    """Frame-to-frame odometry over (rgb, depth, timestamp) triples.

    The first pose is identity; failures fall back to repeating the last
    relative pose (constant velocity) with a logged warning.  Output length
    equals the frame count.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    poses = [Pose.identity(frames[0][2])]
    last_rel = Pose.identity()
    prev_kps: list[Keypoint] | None = None
    prev_depth = None
    for index, (rgb, depth_map, timestamp) in enumerate(frames):
        sharp = unsharp_mask(rgb, config.unsharp_amount, config.unsharp_radius)
        kps = detect_features(sharp, config)
        if index == 0:
            prev_kps, prev_depth = kps, depth_map
            continue
        rel = None
        matches = match_features(prev_kps, kps) if prev_kps else []
        pts_prev, pts_curr = [], []
        for i, j in matches:
            p = backproject(prev_kps[i], prev_depth, intrinsics, config.depth_gate)
            q = backproject(kps[j], depth_map, intrinsics, config.depth_gate)
            if p is not None and q is not None:
                pts_prev.append(p)
                pts_curr.append(q)
        if len(pts_prev) >= 3:
            try:
                frame_cfg = VoConfig(**{**config.__dict__, "seed": config.seed + 7919 * index})
                rel, _ = estimate_relative_pose(np.array(pts_prev), np.array(pts_curr),
                                                frame_cfg)
            except PoseEstimationError as exc:
                log.warning("frame %d: pose estimation failed (%s); using constant velocity",
                            index, exc)
        else:
            log.warning("frame %d: only %d 3D correspondences; using constant velocity",
                        index, len(pts_prev))
        if rel is not None:
            last_rel = rel
        # rel maps prev-frame coords to curr-frame coords; the camera motion is
        # its inverse.
        poses.append(poses[-1].compose(last_rel.inverse(), timestamp))
        prev_kps, prev_depth = kps, depth_map
    return Trajectory(poses)
