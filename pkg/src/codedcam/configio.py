"""Pipeline configuration: defaults, key=value parsing, and validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .optics import DEFAULT_ZERNIKE_SAG, CameraConfig, PhaseMask
from .render import DepthBins, make_depth_bins
from .vo import VoConfig

__all__ = ["PipelineConfig", "parse_config", "config_to_dict"]


@dataclass
class PipelineConfig:
    """Flat view of every tunable in the pipeline; see SCHEMA for the keys."""

    # camera
    focal_length: float = 0.05
    f_number: float = 1.8
    focus_distance: float = 0.85
    pixel_pitch: float = 9.4e-6
    sensor_width: int = 1344
    sensor_height: int = 894
    wavelength_red: float = 610e-9
    wavelength_green: float = 530e-9
    wavelength_blue: float = 470e-9
    pupil_samples: int = 0          # 0 -> 4x the mask grid
    psf_crop: int = 65
    # mask
    mask_file: str = ""
    mask_grid: int = 23
    mask_pitch: float = 135e-6
    mask_zernike: str = ""          # "noll:sag_m,noll:sag_m,..."; empty -> built-in default
    # bins
    bins_count: int = 27
    bins_near: float = 0.5
    bins_far: float = 6.0
    bins_spacing: str = "inverse"
    # render
    noise_sigma: float = 0.0
    # estimator
    window: int = 57
    snr_param: float = 1e3
    # vo
    vo: VoConfig = field(default_factory=VoConfig)
    # eval
    max_dt: float = 0.02
    trials: int = 1
    seed: int = 0

    def camera(self) -> CameraConfig:
        samples = self.pupil_samples if self.pupil_samples > 0 else 4 * self.mask_grid
        return CameraConfig(
            focal_length=self.focal_length,
            f_number=self.f_number,
            focus_distance=self.focus_distance,
            pixel_pitch=self.pixel_pitch,
            sensor_resolution=(self.sensor_width, self.sensor_height),
            wavelengths=(self.wavelength_red, self.wavelength_green, self.wavelength_blue),
            pupil_samples=samples,
            psf_crop=self.psf_crop,
        )

    def mask(self) -> PhaseMask:
        if self.mask_file:
            from .imgio import load_phase_mask

            return load_phase_mask(self.mask_file)
        if self.mask_zernike:
            coeffs = {}
            for item in self.mask_zernike.split(","):
                j, _, a = item.partition(":")
                coeffs[int(j)] = float(a)
        else:
            coeffs = DEFAULT_ZERNIKE_SAG
        return PhaseMask.from_zernike(coeffs, grid=self.mask_grid, pitch=self.mask_pitch)

    def bins(self) -> DepthBins:
        return make_depth_bins(self.bins_count, self.bins_near, self.bins_far,
                               self.bins_spacing)

    def with_override(self, axis: str, value) -> "PipelineConfig":
        """Ablation helper: returns a copy with one swept parameter changed."""
        if axis == "mask_size":
            return replace(self, mask_grid=int(value), pupil_samples=0)
        if axis == "focus_distance":
            return replace(self, focus_distance=float(value))
        raise ValueError(f"unknown ablation axis {axis!r}")


# dotted config key -> (attribute, parser)
def _positive(cast):
    def parse(text):
        v = cast(text)
        if v <= 0:
            raise ValueError("must be positive")
        return v

    return parse


def _nonnegative(cast):
    def parse(text):
        v = cast(text)
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    return parse


SCHEMA = {
    "camera.focal_length": ("focal_length", _positive(float)),
    "camera.f_number": ("f_number", _positive(float)),
    "camera.focus_distance": ("focus_distance", _positive(float)),
    "camera.pixel_pitch": ("pixel_pitch", _positive(float)),
    "camera.sensor_width": ("sensor_width", _positive(int)),
    "camera.sensor_height": ("sensor_height", _positive(int)),
    "camera.wavelength_red": ("wavelength_red", _positive(float)),
    "camera.wavelength_green": ("wavelength_green", _positive(float)),
    "camera.wavelength_blue": ("wavelength_blue", _positive(float)),
    "camera.pupil_samples": ("pupil_samples", _nonnegative(int)),
    "camera.psf_crop": ("psf_crop", _positive(int)),
    "mask.file": ("mask_file", str),
    "mask.grid": ("mask_grid", _positive(int)),
    "mask.pitch": ("mask_pitch", _positive(float)),
    "mask.zernike": ("mask_zernike", str),
    "bins.count": ("bins_count", _positive(int)),
    "bins.near": ("bins_near", _positive(float)),
    "bins.far": ("bins_far", _positive(float)),
    "bins.spacing": ("bins_spacing", str),
    "render.noise_sigma": ("noise_sigma", _nonnegative(float)),
    "estimator.window": ("window", _positive(int)),
    "estimator.snr_param": ("snr_param", _positive(float)),
    "vo.pyramid_levels": ("vo.pyramid_levels", _positive(int)),
    "vo.scale_factor": ("vo.scale_factor", _positive(float)),
    "vo.max_features": ("vo.max_features", _positive(int)),
    "vo.depth_gate": ("vo.depth_gate", _positive(float)),
    "vo.ransac_iterations": ("vo.ransac_iterations", _positive(int)),
    "vo.inlier_threshold": ("vo.inlier_threshold", _positive(float)),
    "vo.unsharp_amount": ("vo.unsharp_amount", _nonnegative(float)),
    "vo.unsharp_radius": ("vo.unsharp_radius", _positive(float)),
    "vo.min_inliers": ("vo.min_inliers", _positive(int)),
    "eval.max_dt": ("max_dt", _positive(float)),
    "eval.trials": ("trials", _positive(int)),
    "seed": ("seed", int),
}


def _apply(config: PipelineConfig, key: str, text: str, where: str) -> None:
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    attr, parser = SCHEMA[key]
    try:
        value = parser(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: invalid value for {key}: {exc}") from None
    if attr.startswith("vo."):
        setattr(config.vo, attr[3:], value)
    else:
        setattr(config, attr, value)


def parse_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Parse a key=value config file ('#' comments, dotted section prefixes).

    Unknown keys and invariant violations raise ConfigError with the line
    number or key name.  Missing keys keep their defaults.  `overrides` maps
    dotted keys to string values and is applied after the file.
    """
    config = PipelineConfig()
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#")[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, _, text = line.partition("=")
                _apply(config, key.strip(), text.strip(), f"{path}:{lineno}")
    for key, text in (overrides or {}).items():
        _apply(config, key, str(text), "override")
    # construct each sub-config so its invariants run now, not at use time
    try:
        config.camera()
        config.bins()
        VoConfig(**config.vo.__dict__)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def config_to_dict(config: PipelineConfig) -> dict:
    """Flat dotted-key snapshot, suitable for a run manifest."""
    out = {}
    for key, (attr, _) in SCHEMA.items():
        if attr.startswith("vo."):
            out[key] = getattr(config.vo, attr[3:])
        else:
            out[key] = getattr(config, attr)
    return out
