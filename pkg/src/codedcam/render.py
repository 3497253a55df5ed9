"""Depth layering and occlusion-aware coded-frame rendering.

A scene's metric depth map is quantized into D layers; each layer is blurred
by its depth's PSF and the layers are alpha-composited back to front.  With a
single occupied layer this reduces exactly to convolution with that layer's
kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .optics import PsfBank

__all__ = [
    "DepthBins",
    "Intrinsics",
    "SceneFrame",
    "LayerDecomposition",
    "CodedFrame",
    "make_depth_bins",
    "quantize_depth",
    "render_coded",
    "add_sensor_noise",
    "convolve2d_replicate",
]

COVERAGE_EPS = 1e-6     # denominator floor in the layer normalization
COVERAGE_DEFINED = 1e-3  # blurred coverage below this leaves the layer undefined
FFT_KERNEL_MIN = 15      # kernels at least this wide use the FFT path


@dataclass(frozen=True)
class DepthBins:
    """Discrete depth layers; centers ascend from near to far."""

    centers: np.ndarray
    near: float
    far: float
    spacing: str = "inverse"

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", c)
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if np.any(np.diff(c) <= 0):
            raise ValueError("centers must be strictly increasing")
        if c[0] < self.near - 1e-12 or c[-1] > self.far + 1e-12:
            raise ValueError("centers must lie within [near, far]")

    @property
    def count(self) -> int:
        return len(self.centers)


def make_depth_bins(count: int = 27, near: float = 0.5, far: float = 6.0,
                    spacing: str = "inverse") -> DepthBins:
    """Bin centers at the midpoints of `count` uniform bins, in inverse depth
    (default) or plain depth."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not (0 < near < far):
        raise ValueError("need 0 < near < far")
    mids = (np.arange(count) + 0.5) / count
    if spacing == "inverse":
        inv = 1.0 / far + mids * (1.0 / near - 1.0 / far)
        centers = np.sort(1.0 / inv)
    elif spacing == "linear":
        centers = near + mids * (far - near)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    return DepthBins(centers=centers, near=near, far=far, spacing=spacing)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("fx and fy must be positive")


@dataclass
class SceneFrame:
    """All-in-focus linear RGB plus metric depth (0/NaN marks invalid)."""

    rgb: np.ndarray      # (H, W, 3) in [0, 1]
    depth: np.ndarray    # (H, W) meters
    intrinsics: Intrinsics | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=float)
        self.depth = np.asarray(self.depth, dtype=float)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError("rgb must be (H, W, 3)")
        if self.depth.shape != self.rgb.shape[:2]:
            raise ValueError("depth dimensions must match rgb")
        if not np.all(np.isfinite(self.rgb)):
            raise ValueError("rgb must be finite")


@dataclass
class LayerDecomposition:
    """Per-pixel layer assignment: exactly one binary mask per pixel."""

    layer_index: np.ndarray   # (H, W) int, 0-based index into bins.centers
    masks: np.ndarray         # (D, H, W) float 0/1
    invalid: np.ndarray       # (H, W) bool, pixels with no valid depth
    bins: DepthBins


@dataclass
class CodedFrame:
    """Simulated coded (defocus-blurred) RGB frame."""

    rgb: np.ndarray
    bank_depths: np.ndarray | None = None  # provenance: depth bins of the PSF bank
    timestamp: float = 0.0

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=float)
        if not np.all(np.isfinite(self.rgb)) or self.rgb.min() < 0:
            raise ValueError("coded rgb must be finite and nonnegative")


def quantize_depth(frame: SceneFrame, bins: DepthBins) -> LayerDecomposition:
    """Assign every pixel the bin nearest in inverse depth.

    Ties go to the nearer (smaller-depth) bin.  Invalid pixels (depth <= 0 or
    NaN) fall in the farthest bin and are flagged.
    """
    depth = frame.depth
    invalid = ~np.isfinite(depth) | (depth <= 0)
    safe = np.where(invalid, bins.centers[-1], depth)
    inv = 1.0 / safe
    inv_centers = 1.0 / bins.centers  # descending in index
    # distance in inverse depth to every center; first minimal index wins,
    # and searching in ascending-depth order makes ties pick the nearer bin
    dist = np.abs(inv[..., None] - inv_centers[None, None, :])
    idx = np.argmin(dist, axis=-1)
    idx = np.where(invalid, bins.count - 1, idx)
    masks = np.zeros((bins.count,) + depth.shape)
    for d in range(bins.count):
        masks[d] = idx == d
    return LayerDecomposition(layer_index=idx, masks=masks, invalid=invalid, bins=bins)


def convolve2d_replicate(image: np.ndarray, kernel: np.ndarray, method: str = "auto") -> np.ndarray:
    """2D convolution with replicate-edge padding; FFT and direct paths agree."""
    kh, kw = kernel.shape
    if method == "auto":
        method = "fft" if max(kh, kw) >= FFT_KERNEL_MIN else "direct"
    padded = np.pad(image, ((kh // 2, kh - 1 - kh // 2), (kw // 2, kw - 1 - kw // 2)), mode="edge")
    return signal.convolve(padded, kernel, mode="valid", method=method)


def render_coded(frame: SceneFrame, decomposition: LayerDecomposition, bank: PsfBank) -> CodedFrame:
    """Alpha-composite depth layers far to near, each blurred by its PSF.

    Per channel and layer d:  L_d = h_d * (I * O_d),  C_d = h_d * O_d,
    layer value L_d / max(C_d, eps) where C_d is defined, alpha = clip(C_d),
    and nearer layers occlude with weight alpha.
    """
    if not np.array_equal(np.asarray(bank.depth_bins), decomposition.bins.centers):
        raise ValueError("PSF bank depth bins do not match the decomposition's bins")
    height, width = frame.depth.shape
    out = np.zeros((height, width, 3))
    occupied = [d for d in range(decomposition.bins.count) if decomposition.masks[d].any()]
    for d in reversed(occupied):  # far to near
        mask = decomposition.masks[d]
        for ch in range(3):
            kernel = bank.psfs[d][ch].kernel
            coverage = convolve2d_replicate(mask, kernel)
            blurred = convolve2d_replicate(frame.rgb[:, :, ch] * mask, kernel)
            defined = coverage > COVERAGE_DEFINED
            layer = np.where(defined, blurred / np.maximum(coverage, COVERAGE_EPS), 0.0)
            alpha = np.clip(coverage, 0.0, 1.0)
            out[:, :, ch] = layer * alpha + out[:, :, ch] * (1.0 - alpha)
    return CodedFrame(rgb=np.maximum(out, 0.0), bank_depths=np.array(bank.depth_bins),
                      timestamp=frame.timestamp)


def add_sensor_noise(frame: CodedFrame, gaussian_sigma: float, seed: int) -> CodedFrame:
    """Zero-mean Gaussian noise, clamped at 0; deterministic for a seed."""
    if gaussian_sigma < 0:
        raise ValueError("sigma must be >= 0")
    if gaussian_sigma == 0:
        return CodedFrame(rgb=frame.rgb.copy(), bank_depths=frame.bank_depths,
                          timestamp=frame.timestamp)
    rng = np.random.default_rng(seed)
    noisy = frame.rgb + rng.normal(0.0, gaussian_sigma, size=frame.rgb.shape)
    return CodedFrame(rgb=np.maximum(noisy, 0.0), bank_depths=frame.bank_depths,
                      timestamp=frame.timestamp)
