"""Image, phase-mask, PSF-bank, and trajectory file IO.

Conventions: RGB PNGs are sRGB on disk and linear in memory; depth PNGs are
16-bit with a scale divisor (default 5000 units per meter); float imagery uses
PFM; trajectories use the TUM text format (timestamp tx ty tz qx qy qz qw,
scalar-last quaternion).
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.spatial.transform import Rotation

from .optics import PhaseMask, Psf, PsfBank
from .vo import Pose, Trajectory

__all__ = [
    "srgb_to_linear",
    "linear_to_srgb",
    "load_rgb",
    "save_rgb",
    "load_depth_png",
    "save_depth_png",
    "read_pfm",
    "write_pfm",
    "load_phase_mask",
    "save_phase_mask",
    "save_psf_bank",
    "load_psf_bank",
    "load_trajectory",
    "save_trajectory",
]

DEFAULT_DEPTH_SCALE = 5000.0


def _atomic_write(path, writer):
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * x ** (1 / 2.4) - 0.055)


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def _write_png16_rgb(path, arr: np.ndarray) -> None:
    """16-bit RGB PNG writer (Pillow has no rgb48 support)."""
    h, w, _ = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 16, 2, 0, 0, 0)
    raw = arr.astype(">u2").tobytes()
    stride = w * 6
    rows = b"".join(b"\x00" + raw[y * stride:(y + 1) * stride] for y in range(h))

    def writer(tmp):
        with open(tmp, "wb") as fh:
            fh.write(_PNG_MAGIC)
            fh.write(_png_chunk(b"IHDR", ihdr))
            fh.write(_png_chunk(b"IDAT", zlib.compress(rows, 6)))
            fh.write(_png_chunk(b"IEND", b""))

    _atomic_write(path, writer)


def _png_header(path) -> tuple[int, int, int, int]:
    """(width, height, bitdepth, colortype) from the IHDR chunk."""
    with open(path, "rb") as fh:
        if fh.read(8) != _PNG_MAGIC:
            raise ValueError(f"not a PNG file: {path}")
        fh.read(8)  # IHDR length + tag
        w, h, depth, ctype = struct.unpack(">IIBB", fh.read(10))
    return w, h, depth, ctype


def _read_png16_rgb(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _PNG_MAGIC:
        raise ValueError(f"not a PNG file: {path}")
    pos = 8
    idat = b""
    width = height = None
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        payload = data[pos + 8:pos + 8 + length]
        if tag == b"IHDR":
            width, height, depth, ctype = struct.unpack(">IIBB", payload[:10])
            if depth != 16 or ctype != 2:
                raise ValueError("not a 16-bit RGB PNG")
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
        pos += 12 + length
    raw = zlib.decompress(idat)
    bpp = 6  # bytes per pixel
    stride = width * bpp
    out = np.zeros((height, stride), dtype=np.uint8)
    off = 0
    prev = np.zeros(stride, dtype=np.int64)
    for y in range(height):
        ftype = raw[off]
        row = np.frombuffer(raw[off + 1:off + 1 + stride], dtype=np.uint8).astype(np.int64)
        off += 1 + stride
        cur = np.zeros(stride, dtype=np.int64)
        if ftype == 0:
            cur = row
        elif ftype == 2:
            cur = (row + prev) & 0xFF
        else:
            for i in range(stride):
                left = cur[i - bpp] if i >= bpp else 0
                up = prev[i]
                ul = prev[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    pred = left
                elif ftype == 3:
                    pred = (left + up) // 2
                elif ftype == 4:
                    p = left + up - ul
                    pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                    pred = left if (pa <= pb and pa <= pc) else (up if pb <= pc else ul)
                else:
                    raise ValueError(f"unsupported PNG filter {ftype}")
                cur[i] = (row[i] + pred) & 0xFF
        out[y] = cur
        prev = cur
    pixels = out.reshape(height, width, 3, 2)
    return (pixels[..., 0].astype(np.uint16) << 8) | pixels[..., 1]


def load_rgb(path) -> np.ndarray:
    """8/16-bit PNG -> linear float RGB in [0, 1]."""
    _, _, depth, ctype = _png_header(path)
    if depth == 16 and ctype == 2:
        x = _read_png16_rgb(path) / 65535.0
    else:
        arr = np.asarray(Image.open(path))
        x = arr / 65535.0 if arr.dtype == np.uint16 else arr / 255.0
    if x.ndim == 2:
        x = np.stack([x] * 3, axis=2)
    return srgb_to_linear(x[:, :, :3])


def save_rgb(path, linear: np.ndarray, bitdepth: int = 16) -> None:
    x = linear_to_srgb(linear)
    if x.ndim != 3:
        x = np.stack([x] * 3, axis=2)
    if bitdepth == 16:
        _write_png16_rgb(path, np.round(x * 65535.0).astype(np.uint16))
    else:
        arr = np.round(x * 255.0).astype(np.uint8)
        _atomic_write(path, lambda tmp: Image.fromarray(arr, "RGB").save(tmp, format="PNG"))


def load_depth_png(path, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """16-bit PNG -> meters; 0 stays 0 (invalid)."""
    arr = np.asarray(Image.open(path), dtype=np.float64)
    return arr / scale


def save_depth_png(path, depth_m: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    d = np.nan_to_num(np.asarray(depth_m, dtype=float), nan=0.0)
    arr = np.round(np.clip(d * scale, 0, 65535)).astype(np.uint16)
    _atomic_write(path, lambda tmp: Image.fromarray(arr).save(tmp, format="PNG"))


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError(f"not a PFM file: {path}")
        color = header == b"PF"
        width, height = map(int, fh.readline().split())
        scale = float(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f4" if scale < 0 else ">f4")
    shape = (height, width, 3) if color else (height, width)
    return np.flipud(data.reshape(shape)).astype(np.float64)


def write_pfm(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim not in (2, 3):
        raise ValueError("PFM data must be 2D or 3D")
    header = b"PF" if data.ndim == 3 else b"Pf"

    def writer(tmp):
        with open(tmp, "wb") as fh:
            fh.write(header + b"\n")
            fh.write(f"{data.shape[1]} {data.shape[0]}\n".encode())
            fh.write(b"-1.0\n")
            fh.write(np.flipud(data).astype("<f4").tobytes())

    _atomic_write(path, writer)


def load_phase_mask(path) -> PhaseMask:
    """Plain-text grid: first line "H pitch_meters", then H rows of heights."""
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise ValueError(f"bad phase-mask header in {path}")
        grid = int(first[0])
        pitch = float(first[1])
        rows = [[float(v) for v in fh.readline().split()] for _ in range(grid)]
    h = np.array(rows)
    if h.shape != (grid, grid):
        raise ValueError(f"phase-mask grid in {path} is not {grid}x{grid}")
    return PhaseMask(height_map=h, grid_pitch=pitch)


def save_phase_mask(path, mask: PhaseMask) -> None:
    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(f"{mask.grid_size} {mask.grid_pitch:.12e}\n")
            for row in mask.height_map:
                fh.write(" ".join(f"{v:.12e}" for v in row) + "\n")

    _atomic_write(path, writer)


def save_psf_bank(directory, bank: PsfBank) -> None:
    """One PFM per (bin, channel) plus an index file of bin depths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for d, row in enumerate(bank.psfs):
        for ch, psf in enumerate(row):
            write_pfm(directory / f"psf_d{d:03d}_c{ch}.pfm", psf.kernel)

    def writer(tmp):
        with open(tmp, "w") as fh:
            for d, (depth, row) in enumerate(zip(bank.depth_bins, bank.psfs)):
                wl = " ".join(f"{p.wavelength:.9e}" for p in row)
                fh.write(f"{d} {depth:.9e} {wl}\n")

    _atomic_write(directory / "index.txt", writer)


def load_psf_bank(directory) -> PsfBank:
    directory = Path(directory)
    depths, psfs = [], []
    with open(directory / "index.txt") as fh:
        for line in fh:
            parts = line.split()
            d = int(parts[0])
            depth = float(parts[1])
            wavelengths = [float(w) for w in parts[2:5]]
            row = []
            for ch in range(3):
                kernel = read_pfm(directory / f"psf_d{d:03d}_c{ch}.pfm")
                row.append(Psf(depth=depth, wavelength=wavelengths[ch], kernel=kernel))
            depths.append(depth)
            psfs.append(row)
    return PsfBank(depth_bins=np.array(depths), psfs=psfs)


def load_trajectory(path) -> Trajectory:
    poses = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != 8:
                raise ValueError(f"bad trajectory line in {path}: {line!r}")
            t, tx, ty, tz, qx, qy, qz, qw = vals
            rot = Rotation.from_quat([qx, qy, qz, qw]).as_matrix()
            poses.append(Pose(rotation=rot, translation=np.array([tx, ty, tz]), timestamp=t))
    return Trajectory(poses)


def save_trajectory(path, traj: Trajectory) -> None:
    def writer(tmp):
        with open(tmp, "w") as fh:
            for pose in traj.poses:
                q = Rotation.from_matrix(pose.rotation).as_quat()  # scalar-last
                tx, ty, tz = pose.translation
                fh.write(
                    f"{pose.timestamp:.9g} {tx:.9g} {ty:.9g} {tz:.9g} "
                    f"{q[0]:.9g} {q[1]:.9g} {q[2]:.9g} {q[3]:.9g}\n"
                )

    _atomic_write(path, writer)
