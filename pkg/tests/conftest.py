"""Shared fixtures: default optics, a PSF bank, textures, and a synthetic
RGB-D sequence builder (translating camera over a textured two-plane scene)
used by the odometry and CLI tests."""

import numpy as np
import pytest

from codedcam import (
    CameraConfig,
    PhaseMask,
    Pose,
    Trajectory,
    build_psf_bank,
    make_depth_bins,
)
from codedcam.imgio import save_depth_png, save_rgb, save_trajectory

FX = FY = 250.0
Z_BG, Z_NEAR = 1.6, 0.9
NEAR_X = (-0.25, 0.45)   # world extent of the floating near plane, meters
NEAR_Y = (-0.22, 0.18)
TEXEL = 0.0080           # meters per texel of the world texture


@pytest.fixture(scope="session")
def camera():
    return CameraConfig()


@pytest.fixture(scope="session")
def bins27():
    return make_depth_bins(27, 0.5, 6.0)


@pytest.fixture(scope="session")
def default_mask():
    return PhaseMask.from_zernike()


@pytest.fixture(scope="session")
def bank(camera, bins27, default_mask):
    return build_psf_bank(default_mask, None, camera, bins27.centers)


@pytest.fixture()
def texture():
    """Broadband per-pixel random texture, 160x160."""
    rng = np.random.default_rng(0)
    return rng.random((160, 160, 3))


def _sample(tex, u, v):
    """Bilinear periodic sample of a (T, T, 3) texture at float coords."""
    size = tex.shape[0]
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    fu, fv = u - u0, v - v0
    u0 %= size
    v0 %= size
    u1 = (u0 + 1) % size
    v1 = (v0 + 1) % size
    return (tex[v0, u0] * ((1 - fu) * (1 - fv))[..., None]
            + tex[v0, u1] * (fu * (1 - fv))[..., None]
            + tex[v1, u0] * ((1 - fu) * fv)[..., None]
            + tex[v1, u1] * (fu * fv)[..., None])


def make_scene_view(cam_x, tex_bg, tex_near, width, height):
    """Pinhole view of a textured background plane plus a floating near plane.

    Returns (rgb, depth) for a camera at world x = cam_x looking down +z.
    """
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    u, v = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    xb = (u - cx) / FX * Z_BG + cam_x
    yb = (v - cy) / FY * Z_BG
    rgb = _sample(tex_bg, xb / TEXEL, yb / TEXEL)
    depth = np.full((height, width), Z_BG)
    xn = (u - cx) / FX * Z_NEAR + cam_x
    yn = (v - cy) / FY * Z_NEAR
    near = ((xn >= NEAR_X[0]) & (xn <= NEAR_X[1])
            & (yn >= NEAR_Y[0]) & (yn <= NEAR_Y[1]))
    rgb[near] = _sample(tex_near, xn / (TEXEL * 0.6), yn / (TEXEL * 0.6))[near]
    depth[near] = Z_NEAR
    rgb = 0.08 + 0.84 * rgb  # keep away from the sRGB clip points
    return rgb, depth


def build_sequence_dataset(root, n_frames=30, travel=0.5, width=320, height=240,
                           seed=7):
    """Write a TUM-layout RGB-D dataset of a camera translating along x.

    Creates rgb/, depth/, rgb.txt, depth.txt, calibration.txt, and
    groundtruth.txt under `root`.  Returns root.
    """
    root.mkdir(parents=True, exist_ok=True)
    (root / "rgb").mkdir(exist_ok=True)
    (root / "depth").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    tex_bg = rng.random((512, 512, 3))
    tex_near = rng.random((512, 512, 3))
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    rgb_lines, depth_lines, poses = [], [], []
    for i in range(n_frames):
        t = i * 0.1
        cam_x = travel * i / max(1, n_frames - 1)
        rgb, depth = make_scene_view(cam_x, tex_bg, tex_near, width, height)
        save_rgb(root / "rgb" / f"{i:04d}.png", rgb)
        save_depth_png(root / "depth" / f"{i:04d}.png", depth)
        rgb_lines.append(f"{t:.6f} rgb/{i:04d}.png")
        depth_lines.append(f"{t:.6f} depth/{i:04d}.png")
        poses.append(Pose(np.eye(3), np.array([cam_x, 0.0, 0.0]), t))
    (root / "rgb.txt").write_text("\n".join(rgb_lines) + "\n")
    (root / "depth.txt").write_text("\n".join(depth_lines) + "\n")
    (root / "calibration.txt").write_text(
        f"fx={FX}\nfy={FY}\ncx={cx}\ncy={cy}\ndepth_scale=5000\n")
    save_trajectory(root / "groundtruth.txt", Trajectory(poses))
    return root


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """5-frame 160x120 sequence for CLI-level tests."""
    root = tmp_path_factory.mktemp("seq_small") / "seq"
    return build_sequence_dataset(root, n_frames=5, travel=0.1,
                                  width=160, height=120)
