"""Pupil-plane optics: phase masks, defocus, and PSF synthesis.

The camera is modelled in the Fourier-optics regime: a point source at depth d
produces a pupil field  A * exp(i*(phase_defocus(d) + phase_mask)), and the
sensor-plane PSF is the squared magnitude of its 2D Fourier transform, sampled
at the sensor pixel pitch and normalized to unit sum.

The usable pupil is the square window spanned by the phase-mask grid
(H * grid_pitch across); the lens aperture disk (focal_length / f_number) only
clips it when it is the smaller of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import next_fast_len

__all__ = [
    "CameraConfig",
    "PhaseMask",
    "ApertureAmplitude",
    "Psf",
    "PsfBank",
    "zernike_eval",
    "height_from_zernike",
    "phase_from_height",
    "defocus_phase",
    "simulate_psf",
    "build_psf_bank",
]

MAX_MASK_HEIGHT = 2e-6  # fabrication limit on the plate thickness span, meters

# Two-axis astigmatism + trefoil surface, in meters of sag per Noll mode.
# Chosen so the PSF orientation flips through focus and carries odd structure
# that breaks the near/far ambiguity; total span stays below MAX_MASK_HEIGHT.
DEFAULT_ZERNIKE_SAG = {5: 0.08e-6, 6: 0.28e-6, 9: 0.09e-6}


@dataclass(frozen=True)
class CameraConfig:
    """Lens, sensor, focus, and per-channel wavelength parameters."""

    focal_length: float = 0.05
    f_number: float = 1.8
    focus_distance: float = 0.85
    pixel_pitch: float = 9.4e-6
    sensor_resolution: tuple[int, int] = (1344, 894)
    wavelengths: tuple[float, float, float] = (610e-9, 530e-9, 470e-9)
    pupil_samples: int = 92
    psf_crop: int = 64

    def __post_init__(self):
        if self.focal_length <= 0 or self.f_number <= 0:
            raise ValueError("focal_length and f_number must be positive")
        if self.focus_distance <= self.focal_length:
            raise ValueError("focus_distance must exceed focal_length")
        if any(w <= 0 for w in self.wavelengths):
            raise ValueError("wavelengths must be positive")
        # psf_crop is forced odd so the kernel has an unambiguous center pixel;
        # an even request like 64 rounds up to 65.
        if self.psf_crop < 3:
            raise ValueError("psf_crop must be >= 3")
        if self.psf_crop % 2 == 0:
            object.__setattr__(self, "psf_crop", self.psf_crop + 1)

    @property
    def image_distance(self) -> float:
        """Distance from lens to sensor for the configured focus (thin lens)."""
        return 1.0 / (1.0 / self.focal_length - 1.0 / self.focus_distance)

    @property
    def aperture_diameter(self) -> float:
        return self.focal_length / self.f_number


def _noll_to_nm(j: int) -> tuple[int, int]:
    """Map a Noll index j >= 1 to (n, m) with the Noll sign convention."""
    if j < 1:
        raise ValueError(f"Noll index must be >= 1, got {j}")
    n = 0
    j1 = j - 1
    while j1 > n:
        n += 1
        j1 -= n
    m = (-1) ** j * ((n % 2) + 2 * ((j1 + ((n + 1) % 2)) // 2))
    return n, m


def zernike_eval(noll_index: int, rho, theta):
    """Evaluate the Zernike polynomial Z_j (Noll indexing, Noll normalization).

    rho and theta may be scalars or arrays (broadcast together).  Values for
    rho > 1 are extrapolated by the same polynomial; callers mask the disk.
    """
    n, m = _noll_to_nm(noll_index)
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    am = abs(m)
    radial = np.zeros(np.broadcast(rho, theta).shape)
    for k in range((n - am) // 2 + 1):
        c = (
            (-1) ** k
            * math.factorial(n - k)
            / (
                math.factorial(k)
                * math.factorial((n + am) // 2 - k)
                * math.factorial((n - am) // 2 - k)
            )
        )
        radial = radial + c * rho ** (n - 2 * k)
    if m == 0:
        norm = math.sqrt(n + 1)
        ang = 1.0
    else:
        norm = math.sqrt(2 * (n + 1))
        ang = np.sin(am * theta) if m < 0 else np.cos(am * theta)
    out = norm * radial * ang
    return float(out) if out.ndim == 0 else out


def height_from_zernike(coeffs, grid: int, pitch: float) -> np.ndarray:
    """Synthesize a grid x grid height map from Noll-indexed sag coefficients.

    coeffs may be a sequence (index 0 -> Noll 1) or a {noll: sag} mapping, in
    meters of surface sag.  The map is min-shifted to start at 0; cells outside
    the inscribed unit disk are 0.  Raises ValueError if the resulting span
    exceeds the fabrication limit.
    """
    if grid < 3:
        raise ValueError("grid must be >= 3")
    if isinstance(coeffs, dict):
        items = [(int(j), float(a)) for j, a in coeffs.items()]
    else:
        items = [(j + 1, float(a)) for j, a in enumerate(coeffs)]
    c = (np.arange(grid) + 0.5) / grid * 2.0 - 1.0
    x, y = np.meshgrid(c, c)
    rho = np.hypot(x, y)
    theta = np.arctan2(y, x)
    disk = rho <= 1.0
    h = np.zeros((grid, grid))
    for j, a in items:
        if a != 0.0:
            h += a * zernike_eval(j, rho, theta)
    if disk.any():
        h -= h[disk].min()
    h[~disk] = 0.0
    span = h[disk].max() - h[disk].min() if disk.any() else 0.0
    if span > MAX_MASK_HEIGHT * (1 + 1e-12):
        raise ValueError(
            f"height span {span:.3e} m exceeds the {MAX_MASK_HEIGHT:.0e} m limit; "
            "rescale the Zernike coefficients"
        )
    return h


def _constant_index(n: float):
    return lambda wavelength: n


@dataclass
class PhaseMask:
    """Coded-aperture plate: a height map over a square grid of cells.

    The grid spans the usable pupil; H * grid_pitch is the usable pupil
    diameter (within one cell).
    """

    height_map: np.ndarray
    grid_pitch: float = 135e-6
    refractive_index: object = None  # callable wavelength -> n

    def __post_init__(self):
        self.height_map = np.asarray(self.height_map, dtype=float)
        if self.height_map.ndim != 2 or self.height_map.shape[0] != self.height_map.shape[1]:
            raise ValueError("height_map must be a square 2D array")
        if self.height_map.min() < -1e-15 or self.height_map.max() > MAX_MASK_HEIGHT * (1 + 1e-12):
            raise ValueError(f"heights must lie in [0, {MAX_MASK_HEIGHT:.0e}] m")
        if self.refractive_index is None:
            self.refractive_index = _constant_index(1.5)

    @property
    def grid_size(self) -> int:
        return self.height_map.shape[0]

    @property
    def extent(self) -> float:
        """Usable pupil diameter spanned by the mask grid, meters."""
        return self.grid_size * self.grid_pitch

    @classmethod
    def flat(cls, grid: int = 23, pitch: float = 135e-6) -> "PhaseMask":
        """Zero-height mask (plain aperture of the same extent)."""
        return cls(np.zeros((grid, grid)), pitch)

    @classmethod
    def from_zernike(cls, coeffs=None, grid: int = 23, pitch: float = 135e-6) -> "PhaseMask":
        if coeffs is None:
            coeffs = DEFAULT_ZERNIKE_SAG
        return cls(height_from_zernike(coeffs, grid, pitch), pitch)


@dataclass
class ApertureAmplitude:
    """Amplitude transmission over the usable pupil window, values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.min() < 0 or self.values.max() > 1:
            raise ValueError("amplitude values must lie in [0, 1]")

    @classmethod
    def circular(cls, samples: int = 256) -> "ApertureAmplitude":
        """Binary disk inscribed in the pupil window."""
        c = (np.arange(samples) + 0.5) / samples * 2.0 - 1.0
        x, y = np.meshgrid(c, c)
        return cls((np.hypot(x, y) <= 1.0).astype(float))


@dataclass(frozen=True)
class Psf:
    """Normalized intensity kernel for one (depth, wavelength)."""

    depth: float
    wavelength: float
    kernel: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        object.__setattr__(self, "kernel", k)
        if k.min() < 0:
            raise ValueError("PSF entries must be nonnegative")
        if abs(k.sum() - 1.0) > 1e-6:
            raise ValueError("PSF must be normalized to unit sum")


@dataclass
class PsfBank:
    """D depth bins x 3 color channels of normalized PSFs."""

    depth_bins: np.ndarray
    psfs: list  # psfs[d][c] -> Psf

    def __post_init__(self):
        self.depth_bins = np.asarray(self.depth_bins, dtype=float)
        if np.any(np.diff(self.depth_bins) <= 0):
            raise ValueError("depth_bins must be strictly increasing")
        if len(self.psfs) != len(self.depth_bins) or any(len(row) != 3 for row in self.psfs):
            raise ValueError("psfs must be a D x 3 grid")

    @property
    def kernels(self) -> np.ndarray:
        """(D, 3, k, k) array view of the kernels."""
        return np.stack([np.stack([p.kernel for p in row]) for row in self.psfs])


def phase_from_height(mask: PhaseMask, wavelength: float, samples: int | None = None) -> np.ndarray:
    """Thin-plate phase (2*pi/lambda)(n - 1) h, nearest-neighbor resampled."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    n = mask.refractive_index(wavelength)
    phase = 2.0 * np.pi / wavelength * (n - 1.0) * mask.height_map
    if samples is None or samples == mask.grid_size:
        return phase
    idx = np.minimum((np.arange(samples) * mask.grid_size) // samples, mask.grid_size - 1)
    return phase[np.ix_(idx, idx)]


def defocus_phase(
    depth: float,
    wavelength: float,
    config: CameraConfig,
    grid_size: int | None = None,
    pupil_radius: float | None = None,
) -> np.ndarray:
    """Quadratic defocus phase (pi R^2 / lambda)(1/z_f - 1/d) rho^2.

    rho is the pupil radius normalized by R (default R = focal_length /
    (2 f_number)); the map is zero outside rho > 1.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    if grid_size is None:
        grid_size = config.pupil_samples
    if pupil_radius is None:
        pupil_radius = 0.5 * config.aperture_diameter
    c = (np.arange(grid_size) + 0.5) / grid_size * 2.0 - 1.0
    x, y = np.meshgrid(c, c)
    rho2 = x * x + y * y
    coeff = np.pi * pupil_radius**2 / wavelength * (1.0 / config.focus_distance - 1.0 / depth)
    phase = coeff * rho2
    phase[rho2 > 1.0] = 0.0
    return phase


def _odd_fast_len(n: int) -> int:
    m = next_fast_len(int(n))
    while m % 2 == 0:
        m = next_fast_len(m + 1)
    return m


def simulate_psf(
    depth: float,
    channel: int,
    mask: PhaseMask,
    amplitude: ApertureAmplitude | None,
    config: CameraConfig,
    oversample: int = 4,
) -> Psf:
    """Synthesize the sensor-plane PSF for one depth and color channel.

    The pupil field is sampled on an odd FFT grid whose sample pitch is
    extent / pupil_samples; the far-field intensity is flux-binned onto the
    sensor pixel grid, center-cropped to psf_crop, and normalized to unit sum.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    if channel not in (0, 1, 2):
        raise ValueError("channel must be 0, 1, or 2")
    if config.pupil_samples < mask.grid_size:
        raise ValueError("pupil_samples must be >= the phase-mask grid size")

    wavelength = config.wavelengths[channel]
    extent = min(mask.extent, config.aperture_diameter)
    dp = extent / config.pupil_samples  # pupil sample pitch
    zi = config.image_distance
    # Far-field grid spans lambda*zi/dp regardless of FFT size; it must cover
    # the requested crop or the pupil sampling is too coarse.
    if wavelength * zi / dp < config.psf_crop * config.pixel_pitch:
        raise ValueError(
            "pupil sampling too coarse for the requested psf_crop; "
            "increase pupil_samples or reduce psf_crop"
        )
    fine_per_pixel = config.pixel_pitch * dp / (wavelength * zi)  # fraction of grid per pixel
    m = _odd_fast_len(max(2 * config.pupil_samples, int(np.ceil(oversample / fine_per_pixel))))

    c = (np.arange(m) - m // 2) * dp
    x, y = np.meshgrid(c, c)
    r2 = x * x + y * y
    half = extent / 2.0
    disk_r = min(half, 0.5 * config.aperture_diameter)
    inside = r2 <= disk_r**2

    # Defocus phase evaluated at physical pupil radius (the R^2 rho^2 product
    # in the quadratic model reduces to the physical r^2).
    defocus = np.pi / wavelength * (1.0 / config.focus_distance - 1.0 / depth) * r2

    # Nearest-neighbor sample of the mask height over its extent.
    hmask = mask.height_map
    cell = np.clip(((x + half) / mask.grid_pitch).astype(int), 0, mask.grid_size - 1)
    rell = np.clip(((y + half) / mask.grid_pitch).astype(int), 0, mask.grid_size - 1)
    n_idx = mask.refractive_index(wavelength)
    mask_phase = 2.0 * np.pi / wavelength * (n_idx - 1.0) * hmask[rell, cell]

    if amplitude is None:
        amp = inside.astype(float)
    else:
        av = amplitude.values
        s = av.shape[0]
        ui = np.clip(((x + half) / extent * s).astype(int), 0, s - 1)
        vi = np.clip(((y + half) / extent * s).astype(int), 0, s - 1)
        amp = av[vi, ui] * inside

    pupil = amp * np.exp(1j * (defocus + mask_phase))
    field = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(pupil)))
    intensity = (field.real**2 + field.imag**2)

    # Flux-bin fine samples onto sensor pixels.
    delta = wavelength * zi / (m * dp)  # fine sample pitch on the sensor
    u = (np.arange(m) - m // 2) * (delta / config.pixel_pitch)
    pix = np.round(u).astype(int)
    half_crop = config.psf_crop // 2
    keep = np.abs(pix) <= half_crop
    kernel = np.zeros((config.psf_crop, config.psf_crop))
    idx = pix[keep] + half_crop
    np.add.at(kernel, np.ix_(idx, idx), intensity[np.ix_(keep, keep)])

    total = kernel.sum()
    if total <= 0:
        raise ValueError("PSF has no energy inside the crop; check the configuration")
    return Psf(depth=depth, wavelength=wavelength, kernel=kernel / total)


def build_psf_bank(
    mask: PhaseMask,
    amplitude: ApertureAmplitude | None,
    config: CameraConfig,
    depth_bins,
) -> PsfBank:
    """One normalized PSF per (depth bin, channel); deterministic."""
    depth_bins = np.asarray(depth_bins, dtype=float)
    if depth_bins.size == 0 or np.any(depth_bins <= 0) or np.any(np.diff(depth_bins) <= 0):
        raise ValueError("depth_bins must be nonempty, positive, strictly increasing")
    psfs = [
        [simulate_psf(float(d), ch, mask, amplitude, config) for ch in range(3)]
        for d in depth_bins
    ]
    return PsfBank(depth_bins=depth_bins, psfs=psfs)
