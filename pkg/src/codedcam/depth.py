"""Metric depth from a single coded frame, plus depth metrics and losses.

The estimator is a deterministic hypothesis test over the PSF bank: the local
log power spectrum of the coded image (Hann-windowed block FFTs) is correlated
against each bin's regularized transfer-function log power, and the per-pixel
argmin of (1 - correlation), summed over channels, gives the depth map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import PsfBank
from .render import CodedFrame, DepthBins

__all__ = [
    "DepthEstimate",
    "DepthMetrics",
    "LossWeights",
    "wiener_deconvolve",
    "depth_cost_volume",
    "classify_depth",
    "compute_depth_metrics",
    "l1_loss",
    "depth_weighted_loss",
]


@dataclass
class DepthEstimate:
    """Per-pixel depth snapped to bin centers, with a cost-margin confidence."""

    depth: np.ndarray        # (H, W) meters, values from bins.centers
    confidence: np.ndarray   # (H, W) in [0, 1]
    bins: DepthBins


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    delta1: float
    rmse: float
    l1: float
    l1_under_3m: float       # NaN when no pixel has gt < 3 m
    valid_pixel_count: int

    def as_dict(self) -> dict:
        return {
            "abs_rel": self.abs_rel,
            "delta1": self.delta1,
            "rmse": self.rmse,
            "l1": self.l1,
            "l1_under_3m": self.l1_under_3m,
            "valid_pixel_count": self.valid_pixel_count,
        }


@dataclass(frozen=True)
class LossWeights:
    """Weights alpha^(-beta * gt_depth) for the depth-weighted loss."""

    alpha: float = 2.0
    beta: float = 0.3

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def wiener_deconvolve(image: np.ndarray, kernel: np.ndarray, snr_param: float) -> np.ndarray:
    """Frequency-domain Wiener inverse conj(H) Y / (|H|^2 + 1/snr_param).

    The image is replicate-padded by the kernel size before the FFT to keep
    wrap-around out of the frame; the real part of the crop is returned.
    """
    if snr_param <= 0:
        raise ValueError("snr_param must be positive")
    kh, kw = kernel.shape
    padded = np.pad(image, ((kh, kh), (kw, kw)), mode="edge")
    ph, pw = padded.shape
    kpad = np.zeros((ph, pw))
    kpad[:kh, :kw] = kernel
    # center the kernel on the origin of the periodic grid
    kpad = np.roll(kpad, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    transfer = np.fft.fft2(kpad)
    spectrum = np.fft.fft2(padded)
    est = np.conj(transfer) * spectrum / (np.abs(transfer) ** 2 + 1.0 / snr_param)
    out = np.real(np.fft.ifft2(est))
    return out[kh:-kh, kw:-kw]


# Spatial-frequency band used for the spectral match, cycles per pixel.  The
# low cutoff drops the DC-dominated bins (texture mean, illumination); the high
# cutoff stays below the corner frequencies where the Hann window leaks.
FREQ_BAND = (0.04, 0.46)


def _transfer_log_power(kernel: np.ndarray, window: int, snr_param: float) -> np.ndarray:
    """log(|H|^2 + 1/snr_param) of a kernel on a window x window DFT grid.

    Kernels larger than the window are center-cropped and renormalized; the
    regularizer floors the log where the transfer function has nulls.
    """
    kh = kernel.shape[0]
    if kh > window:
        c, h = kh // 2, window // 2
        kernel = kernel[c - h:c + h + window % 2, c - h:c + h + window % 2]
        kernel = kernel / kernel.sum()
        kh = kernel.shape[0]
    kpad = np.zeros((window, window))
    kpad[:kh, :kh] = kernel
    kpad = np.roll(kpad, (-(kh // 2), -(kh // 2)), axis=(0, 1))
    transfer = np.fft.fft2(kpad)
    return np.log(np.abs(transfer) ** 2 + 1.0 / snr_param)


def depth_cost_volume(coded: CodedFrame, bank: PsfBank, window: int = 57,
                      snr_param: float = 1e3) -> np.ndarray:
    """(D, H, W) spectral-mismatch cost between the image and each bin's PSFs.

    Overlapping Hann-windowed blocks of each channel are Fourier transformed;
    the standardized log power over the FREQ_BAND annulus is correlated with
    each bin's standardized log transfer power, and cost[d] accumulates
    sum over channels of (1 - correlation), Hann overlap-added per pixel.
    Textureless blocks contribute equally to every bin.
    """
    if window < 16:
        raise ValueError("window must be >= 16")
    if snr_param <= 0:
        raise ValueError("snr_param must be positive")
    rgb = coded.rgb
    depth_count = len(bank.depth_bins)
    height, width = rgb.shape[:2]
    stride = max(4, window // 4)
    pad = window // 2
    padded = np.pad(rgb, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    hann = np.outer(np.hanning(window), np.hanning(window))
    fy = np.fft.fftfreq(window)[:, None]
    fx = np.fft.fftfreq(window)[None, :]
    fr = np.hypot(fx, fy)
    band = (fr >= FREQ_BAND[0]) & (fr <= FREQ_BAND[1])

    # reference spectra, standardized and unit-normalized per (bin, channel)
    refs = np.stack([
        [_transfer_log_power(bank.psfs[d][ch].kernel, window, snr_param)[band]
         for ch in range(3)]
        for d in range(depth_count)
    ])
    refs = refs - refs.mean(axis=2, keepdims=True)
    refs = refs / np.linalg.norm(refs, axis=2, keepdims=True)

    cost = np.zeros((depth_count, height, width))
    weight = np.zeros((height, width))
    for y0 in range(0, height + 1, stride):
        for x0 in range(0, width + 1, stride):
            block = padded[y0:y0 + window, x0:x0 + window]
            if block.shape[0] != window or block.shape[1] != window:
                continue
            score = np.zeros(depth_count)
            for ch in range(3):
                b = block[:, :, ch]
                b = (b - b.mean()) * hann
                power = np.abs(np.fft.fft2(b)) ** 2
                v = np.log(power[band] + power.mean() * 1e-8 + 1e-30)
                v = v - v.mean()
                norm = np.linalg.norm(v)
                if norm < 1e-12:
                    continue  # flat block: no evidence for any bin
                score += 1.0 - refs[:, ch, :] @ (v / norm)
            # Hann overlap-add of the block score onto the output grid
            yy = slice(max(0, y0 - pad), min(height, y0 - pad + window))
            xx = slice(max(0, x0 - pad), min(width, x0 - pad + window))
            hy = slice(yy.start - (y0 - pad), yy.stop - (y0 - pad))
            hx = slice(xx.start - (x0 - pad), xx.stop - (x0 - pad))
            w = hann[hy, hx]
            cost[:, yy, xx] += score[:, None, None] * w
            weight[yy, xx] += w
    return cost / np.maximum(weight, 1e-12)


def classify_depth(cost_volume: np.ndarray, bins: DepthBins) -> DepthEstimate:
    """Per-pixel argmin over bins; ties break toward the smaller depth."""
    if not np.all(np.isfinite(cost_volume)):
        raise ValueError("cost volume must be finite")
    if cost_volume.shape[0] != bins.count:
        raise ValueError("cost volume depth axis does not match the bins")
    idx = np.argmin(cost_volume, axis=0)  # first minimum = smaller depth
    depth = bins.centers[idx]
    if bins.count > 1:
        part = np.partition(cost_volume, 1, axis=0)
        best, second = part[0], part[1]
        confidence = (second - best) / (second + 1e-12)
    else:
        confidence = np.ones_like(depth)
    return DepthEstimate(depth=depth, confidence=np.clip(confidence, 0.0, 1.0), bins=bins)


def _valid_mask(pred: np.ndarray, gt: np.ndarray, max_depth: float | None = None) -> np.ndarray:
    valid = np.isfinite(gt) & (gt > 0) & np.isfinite(pred)
    if max_depth is not None:
        valid &= gt <= max_depth
    return valid


def compute_depth_metrics(pred: np.ndarray, gt: np.ndarray, max_depth: float = 6.0) -> DepthMetrics:
    """Abs-Rel, delta1, RMSE, L1, and L1 restricted to gt < 3 m.

    Pixels with invalid gt (0/NaN) or gt beyond max_depth are excluded.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt must have equal dimensions")
    valid = _valid_mask(pred, gt, max_depth)
    if not valid.any():
        raise ValueError("no valid ground-truth pixels in range")
    p, g = pred[valid], gt[valid]
    err = np.abs(p - g)
    ratio = np.maximum(p / g, g / p)
    near = g < 3.0
    return DepthMetrics(
        abs_rel=float(np.mean(err / g)),
        delta1=float(np.mean(ratio < 1.25)),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        l1=float(np.mean(err)),
        l1_under_3m=float(np.mean(err[near])) if near.any() else float("nan"),
        valid_pixel_count=int(valid.sum()),
    )


def l1_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute depth error over valid pixels."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt must have equal dimensions")
    valid = np.isfinite(gt) & np.isfinite(pred)
    if not valid.any():
        raise ValueError("no valid pixels")
    return float(np.mean(np.abs(pred[valid] - gt[valid])))


def depth_weighted_loss(pred: np.ndarray, gt: np.ndarray,
                        weights: LossWeights = LossWeights()) -> float:
    """Mean of alpha^(-beta*gt) * (pred - gt)^2 over valid pixels."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt must have equal dimensions")
    valid = np.isfinite(gt) & np.isfinite(pred)
    if not valid.any():
        raise ValueError("no valid pixels")
    w = weights.alpha ** (-weights.beta * gt[valid])
    return float(np.mean(w * (pred[valid] - gt[valid]) ** 2))
