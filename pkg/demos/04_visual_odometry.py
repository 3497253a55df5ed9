"""Track camera motion through a synthetic RGB-D sequence and score it.

We image a textured background plane plus a floating near plane from a
camera translating along x, run frame-to-frame odometry on the rendered
views, and compare the recovered trajectory to ground truth with the
absolute trajectory error (RMSE after rigid alignment).
"""

import numpy as np

from codedcam import Intrinsics, Pose, Trajectory, VoConfig, compute_ate, run_odometry

FX = FY = 250.0
Z_BG, Z_NEAR = 1.6, 0.9
TEXEL = 0.008  # meters per texel of the world texture


def sample(tex, u, v):
    """Bilinear periodic sample of a square texture at float coords."""
    size = tex.shape[0]
    u0, v0 = np.floor(u).astype(int), np.floor(v).astype(int)
    fu, fv = u - u0, v - v0
    u0 %= size
    v0 %= size
    u1, v1 = (u0 + 1) % size, (v0 + 1) % size
    return (tex[v0, u0] * ((1 - fu) * (1 - fv))[..., None]
            + tex[v0, u1] * (fu * (1 - fv))[..., None]
            + tex[v1, u0] * ((1 - fu) * fv)[..., None]
            + tex[v1, u1] * (fu * fv)[..., None])


def view(cam_x, tex_bg, tex_near, width=240, height=180):
    """Pinhole view at world x = cam_x: background plane + near occluder."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    u, v = np.meshgrid(np.arange(width, dtype=float),
                       np.arange(height, dtype=float))
    xb = (u - cx) / FX * Z_BG + cam_x
    yb = (v - cy) / FY * Z_BG
    rgb = sample(tex_bg, xb / TEXEL, yb / TEXEL)
    depth = np.full((height, width), Z_BG)
    xn = (u - cx) / FX * Z_NEAR + cam_x
    yn = (v - cy) / FY * Z_NEAR
    near = (xn >= -0.2) & (xn <= 0.35) & (yn >= -0.18) & (yn <= 0.14)
    rgb[near] = sample(tex_near, xn / (TEXEL * 0.6), yn / (TEXEL * 0.6))[near]
    depth[near] = Z_NEAR
    return 0.08 + 0.84 * rgb, depth


rng = np.random.default_rng(5)
tex_bg = rng.random((512, 512, 3))
tex_near = rng.random((512, 512, 3))

n_frames, travel = 12, 0.25
frames, gt_poses = [], []
for i in range(n_frames):
    cam_x = travel * i / (n_frames - 1)
    rgb, depth = view(cam_x, tex_bg, tex_near)
    frames.append((rgb, depth, 0.1 * i))
    gt_poses.append(Pose(np.eye(3), np.array([cam_x, 0.0, 0.0]), 0.1 * i))
print(f"{n_frames} frames, camera translating {travel} m along x")

width, height = frames[0][0].shape[1], frames[0][0].shape[0]
intr = Intrinsics(fx=FX, fy=FY, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0)
traj = run_odometry(frames, intr, VoConfig(seed=0))

gt = Trajectory(gt_poses)
ate = compute_ate(traj, gt)
print(f"estimated {len(traj)} poses, ATE {ate * 1e3:.2f} mm")

drift = np.linalg.norm(traj.positions[-1] - gt.positions[-1])
print(f"endpoint drift {drift * 1e3:.2f} mm over {travel * 1e3:.0f} mm traveled")

# Per-frame translation recovered vs commanded step.
steps = np.diff(traj.positions, axis=0)
step_gt = travel / (n_frames - 1)
print(f"mean recovered step along x: {steps[:, 0].mean() * 1e3:.2f} mm "
      f"(ground truth {step_gt * 1e3:.2f} mm)")
