"""Pyramid corner detection, binary descriptors, and matching.

Corners come from a min-eigenvalue (Shi-Tomasi) response with non-max
suppression per pyramid level; descriptors are 256-bit binary strings over a
seeded pseudo-random pair pattern with intensity-centroid orientation
compensation.  Everything is deterministic for a fixed image and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "Keypoint",
    "rgb_to_gray",
    "build_pyramid",
    "detect_features",
    "match_features",
    "hamming_distances",
]

PATCH_RADIUS = 15          # descriptor / orientation patch half-size
DESCRIPTOR_BITS = 256
MATCH_RATIO = 0.8
MATCH_MAX_DISTANCE = 64    # Hamming cap


@dataclass
class Keypoint:
    x: float               # level-0 coordinates
    y: float
    pyramid_level: int
    score: float
    descriptor: np.ndarray  # (32,) uint8


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.asarray(image, dtype=float)
    return (0.299 * image[:, :, 0] + 0.587 * image[:, :, 1] + 0.114 * image[:, :, 2])


def build_pyramid(gray: np.ndarray, levels: int, scale_factor: float) -> list[np.ndarray]:
    pyramid = [np.asarray(gray, dtype=float)]
    for level in range(1, levels):
        s = scale_factor**level
        shape = (max(8, int(round(gray.shape[0] / s))), max(8, int(round(gray.shape[1] / s))))
        zoom = (shape[0] / gray.shape[0], shape[1] / gray.shape[1])
        pyramid.append(ndimage.zoom(gray, zoom, order=1, mode="nearest"))
    return pyramid


def _min_eig_response(img: np.ndarray) -> np.ndarray:
    ix = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    iy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    sxx = ndimage.gaussian_filter(ix * ix, 1.5, mode="nearest")
    syy = ndimage.gaussian_filter(iy * iy, 1.5, mode="nearest")
    sxy = ndimage.gaussian_filter(ix * iy, 1.5, mode="nearest")
    tr = sxx + syy
    det_disc = np.sqrt((sxx - syy) ** 2 + 4.0 * sxy**2)
    return 0.5 * (tr - det_disc)


def _sampling_pattern(seed: int) -> np.ndarray:
    """(256, 4) integer offsets (x1, y1, x2, y2) inside the patch."""
    rng = np.random.default_rng(seed ^ 0x5EED)
    sigma = PATCH_RADIUS / 2.0
    pattern = np.clip(rng.normal(0.0, sigma, size=(DESCRIPTOR_BITS, 4)),
                      -PATCH_RADIUS + 1, PATCH_RADIUS - 1)
    return pattern


def _orientation(patch_img: np.ndarray, x: int, y: int) -> float:
    r = PATCH_RADIUS
    patch = patch_img[y - r:y + r + 1, x - r:x + r + 1]
    c = np.arange(-r, r + 1)
    xx, yy = np.meshgrid(c, c)
    circ = (xx * xx + yy * yy) <= r * r
    w = patch * circ
    m10 = float((w * xx).sum())
    m01 = float((w * yy).sum())
    return float(np.arctan2(m01, m10))


def _describe(smooth: np.ndarray, x: int, y: int, angle: float, pattern: np.ndarray) -> np.ndarray:
    ca, sa = np.cos(angle), np.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    p1 = pattern[:, 0:2] @ rot.T
    p2 = pattern[:, 2:4] @ rot.T
    h, w = smooth.shape
    x1 = np.clip(np.round(x + p1[:, 0]).astype(int), 0, w - 1)
    y1 = np.clip(np.round(y + p1[:, 1]).astype(int), 0, h - 1)
    x2 = np.clip(np.round(x + p2[:, 0]).astype(int), 0, w - 1)
    y2 = np.clip(np.round(y + p2[:, 1]).astype(int), 0, h - 1)
    bits = smooth[y1, x1] < smooth[y2, x2]
    return np.packbits(bits.astype(np.uint8))


def detect_features(image: np.ndarray, config) -> list[Keypoint]:
    """Detect up to config.max_features corners across the pyramid.

    `config` needs pyramid_levels, scale_factor, max_features, and seed (a
    VoConfig works).  Returns keypoints in level-0 coordinates with sub-pixel
    refinement at their own level.
    """
    gray = rgb_to_gray(image)
    pattern = _sampling_pattern(config.seed)
    pyramid = build_pyramid(gray, config.pyramid_levels, config.scale_factor)
    areas = np.array([lvl.size for lvl in pyramid], dtype=float)
    quotas = np.maximum(1, np.round(config.max_features * areas / areas.sum()).astype(int))
    margin = PATCH_RADIUS + 1
    keypoints: list[Keypoint] = []
    for level, img in enumerate(pyramid):
        if min(img.shape) <= 2 * margin + 2:
            continue
        resp = _min_eig_response(img)
        resp[:margin], resp[-margin:] = 0, 0
        resp[:, :margin], resp[:, -margin:] = 0, 0
        local_max = resp == ndimage.maximum_filter(resp, size=5, mode="nearest")
        threshold = max(1e-9, 0.01 * resp.max())
        ys, xs = np.nonzero(local_max & (resp > threshold))
        if len(xs) == 0:
            continue
        scores = resp[ys, xs]
        order = np.argsort(-scores, kind="stable")[: quotas[level]]
        smooth = ndimage.gaussian_filter(img, 2.0, mode="nearest")
        scale = config.scale_factor**level
        for i in order:
            x, y = int(xs[i]), int(ys[i])
            # quadratic sub-pixel refinement of the response peak
            dx = 0.5 * (resp[y, x + 1] - resp[y, x - 1])
            dy = 0.5 * (resp[y + 1, x] - resp[y - 1, x])
            dxx = resp[y, x + 1] - 2 * resp[y, x] + resp[y, x - 1]
            dyy = resp[y + 1, x] - 2 * resp[y, x] + resp[y - 1, x]
            sub_x = x - dx / dxx if dxx < 0 else float(x)
            sub_y = y - dy / dyy if dyy < 0 else float(y)
            angle = _orientation(smooth, x, y)
            desc = _describe(smooth, x, y, angle, pattern)
            keypoints.append(Keypoint(x=sub_x * scale, y=sub_y * scale,
                                      pyramid_level=level, score=float(scores[i]),
                                      descriptor=desc))
    keypoints.sort(key=lambda kp: -kp.score)
    return keypoints[: config.max_features]


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def hamming_distances(desc_a: np.ndarray, desc_b: np.ndarray) -> np.ndarray:
    """(Na, Nb) Hamming distance matrix between packed descriptors."""
    x = np.bitwise_xor(desc_a[:, None, :], desc_b[None, :, :])
    return _POPCOUNT[x].sum(axis=2).astype(int)


def match_features(a: list[Keypoint], b: list[Keypoint]) -> list[tuple[int, int]]:
    """Mutual nearest neighbors under Hamming distance with ratio test and cap."""
    if not a or not b:
        return []
    da = np.stack([kp.descriptor for kp in a])
    db = np.stack([kp.descriptor for kp in b])
    if da.shape[1] != db.shape[1]:
        raise ValueError("descriptor lengths differ")
    dist = hamming_distances(da, db)
    best_b = np.argmin(dist, axis=1)
    best_a = np.argmin(dist, axis=0)
    matches = []
    for i, j in enumerate(best_b):
        if best_a[j] != i:
            continue
        d = dist[i, j]
        if d > MATCH_MAX_DISTANCE:
            continue
        if dist.shape[1] > 1:
            row = dist[i].copy()
            row[j] = np.iinfo(int).max
            second = row.min()
            if second == 0 or (d > 0 and d >= MATCH_RATIO * second):
                continue
        matches.append((i, int(j)))
    return matches
