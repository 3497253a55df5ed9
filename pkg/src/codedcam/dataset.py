"""RGB-D dataset ingestion: TUM-style listings or ICL-style numbered files."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .imgio import DEFAULT_DEPTH_SCALE
from .render import Intrinsics

__all__ = ["DatasetIndex", "load_dataset", "load_intrinsics_file"]

log = logging.getLogger(__name__)

ASSOCIATION_MAX_DT = 0.02


@dataclass
class DatasetIndex:
    root: Path
    entries: list            # [(timestamp, rgb_path, depth_path)]
    intrinsics: Intrinsics
    depth_scale: float = DEFAULT_DEPTH_SCALE
    gt_trajectory: Path | None = None

    def __post_init__(self):
        if not self.entries:
            raise DatasetError("dataset has no entries")
        ts = [e[0] for e in self.entries]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DatasetError("entries must be time-sorted with distinct timestamps")
        for _, rgb, depth in self.entries:
            for p in (rgb, depth):
                if not Path(p).exists():
                    raise DatasetError(f"missing file: {p}")

    def __len__(self):
        return len(self.entries)


def load_intrinsics_file(path) -> tuple[Intrinsics, float]:
    """key=value file with fx, fy, cx, cy and optional depth_scale."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#")[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = float(val)
    try:
        intr = Intrinsics(values["fx"], values["fy"], values["cx"], values["cy"])
    except KeyError as exc:
        raise DatasetError(f"intrinsics file {path} missing key {exc}") from None
    return intr, values.get("depth_scale", DEFAULT_DEPTH_SCALE)


def _read_listing(path) -> list[tuple[float, str]]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            rows.append((float(parts[0]), parts[1]))
    rows.sort()
    return rows


def _numeric_key(path: Path):
    stem = path.stem
    return (0, float(stem)) if stem.replace(".", "", 1).isdigit() else (1, stem)


def load_dataset(root, association_mode: str = "auto") -> DatasetIndex:
    """Index an RGB-D sequence at `root`.

    TUM layout: rgb.txt / depth.txt listings, paired by nearest timestamp
    (<= 0.02 s).  ICL layout: rgb/ and depth/ folders of numbered files,
    paired by index.  A calibration.txt (fx/fy/cx/cy/depth_scale) is used when
    present; groundtruth.txt is picked up as the GT trajectory.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root does not exist: {root}")
    calib = root / "calibration.txt"
    if calib.exists():
        intrinsics, depth_scale = load_intrinsics_file(calib)
    else:
        intrinsics, depth_scale = Intrinsics(525.0, 525.0, 319.5, 239.5), DEFAULT_DEPTH_SCALE
        log.warning("no calibration.txt in %s; using TUM default intrinsics", root)

    has_listing = (root / "rgb.txt").exists() and (root / "depth.txt").exists()
    if association_mode == "auto":
        association_mode = "timestamp" if has_listing else "index"

    entries = []
    if association_mode == "timestamp":
        if not has_listing:
            missing = root / ("rgb.txt" if not (root / "rgb.txt").exists() else "depth.txt")
            raise DatasetError(f"missing file: {missing}")
        rgb_rows = _read_listing(root / "rgb.txt")
        depth_rows = _read_listing(root / "depth.txt")
        depth_ts = np.array([t for t, _ in depth_rows])
        used = set()
        for t, rgb_rel in rgb_rows:
            if len(depth_ts) == 0:
                break
            j = int(np.argmin(np.abs(depth_ts - t)))
            if abs(depth_ts[j] - t) > ASSOCIATION_MAX_DT or j in used:
                log.warning("no depth frame within %.3fs of rgb t=%.6f; dropped",
                            ASSOCIATION_MAX_DT, t)
                continue
            used.add(j)
            entries.append((t, root / rgb_rel, root / depth_rows[j][1]))
    elif association_mode == "index":
        rgb_dir, depth_dir = root / "rgb", root / "depth"
        for d in (rgb_dir, depth_dir):
            if not d.is_dir():
                raise DatasetError(f"missing file: {d}")
        rgb_files = sorted(rgb_dir.glob("*.png"), key=_numeric_key)
        depth_files = sorted(depth_dir.glob("*.png"), key=_numeric_key)
        if len(rgb_files) != len(depth_files):
            log.warning("rgb/depth counts differ (%d vs %d); pairing the overlap",
                        len(rgb_files), len(depth_files))
        for i, (r, d) in enumerate(zip(rgb_files, depth_files)):
            entries.append((float(i), r, d))
    else:
        raise ValueError(f"unknown association_mode {association_mode!r}")

    if not entries:
        raise DatasetError(f"no rgb/depth pairs found under {root}")
    gt = root / "groundtruth.txt"
    return DatasetIndex(root=root, entries=entries, intrinsics=intrinsics,
                        depth_scale=depth_scale,
                        gt_trajectory=gt if gt.exists() else None)
