"""File formats, dataset ingestion, and configuration parsing."""

import numpy as np
import pytest

from codedcam import PhaseMask, Pose, Trajectory, load_dataset, parse_config
from codedcam.errors import ConfigError, DatasetError
from codedcam.imgio import (
    linear_to_srgb,
    load_depth_png,
    load_phase_mask,
    load_psf_bank,
    load_rgb,
    load_trajectory,
    read_pfm,
    save_depth_png,
    save_phase_mask,
    save_psf_bank,
    save_rgb,
    save_trajectory,
    srgb_to_linear,
    write_pfm,
)
from codedcam.dataset import load_intrinsics_file
from scipy.spatial.transform import Rotation


class TestImageIO:
    def test_srgb_linear_round_trip(self):
        x = np.linspace(0, 1, 256)
        np.testing.assert_allclose(srgb_to_linear(linear_to_srgb(x)), x, atol=1e-12)

    def test_rgb16_round_trip(self, tmp_path):
        rng = np.random.default_rng(51)
        img = rng.random((17, 23, 3))
        path = tmp_path / "img.png"
        save_rgb(path, img)
        out = load_rgb(path)
        # 16-bit quantization in sRGB space
        np.testing.assert_allclose(out, img, atol=2e-4)

    def test_rgb8_round_trip(self, tmp_path):
        rng = np.random.default_rng(52)
        img = rng.random((9, 11, 3))
        path = tmp_path / "img8.png"
        save_rgb(path, img, bitdepth=8)
        out = load_rgb(path)
        np.testing.assert_allclose(out, img, atol=2e-2)

    def test_depth_png_round_trip_error_bound(self, tmp_path):
        rng = np.random.default_rng(53)
        depth = rng.uniform(0.1, 6.0, (20, 30))
        path = tmp_path / "d.png"
        save_depth_png(path, depth)
        out = load_depth_png(path)
        assert np.abs(out - depth).max() <= 1.0 / 10000.0

    def test_depth_png_invalid_stays_zero(self, tmp_path):
        depth = np.array([[0.0, np.nan], [2.0, 3.0]])
        path = tmp_path / "d.png"
        save_depth_png(path, depth)
        out = load_depth_png(path)
        assert out[0, 0] == 0.0 and out[0, 1] == 0.0

    def test_pfm_round_trip(self, tmp_path):
        rng = np.random.default_rng(54)
        for shape in ((13, 17), (13, 17, 3)):
            data = rng.normal(0, 10, shape)
            path = tmp_path / "x.pfm"
            write_pfm(path, data)
            out = read_pfm(path)
            np.testing.assert_allclose(out, data, rtol=1e-6)


class TestMaskAndBankIO:
    def test_phase_mask_round_trip(self, tmp_path, default_mask):
        path = tmp_path / "mask.txt"
        save_phase_mask(path, default_mask)
        out = load_phase_mask(path)
        assert out.grid_size == default_mask.grid_size
        assert out.grid_pitch == pytest.approx(default_mask.grid_pitch, rel=1e-12)
        np.testing.assert_allclose(out.height_map, default_mask.height_map,
                                   atol=1e-12 * 2e-6)

    def test_psf_bank_round_trip(self, tmp_path, camera, bins27):
        from codedcam import build_psf_bank
        bank = build_psf_bank(PhaseMask.flat(), None, camera, bins27.centers[:3])
        save_psf_bank(tmp_path / "bank", bank)
        out = load_psf_bank(tmp_path / "bank")
        np.testing.assert_allclose(out.depth_bins, bank.depth_bins, rtol=1e-9)
        for row_a, row_b in zip(bank.psfs, out.psfs):
            for a, b in zip(row_a, row_b):
                assert a.wavelength == pytest.approx(b.wavelength, rel=1e-9)
                np.testing.assert_allclose(a.kernel, b.kernel, atol=1e-7)

    def test_trajectory_round_trip(self, tmp_path):
        rng = np.random.default_rng(55)
        poses = []
        for i in range(6):
            rot = Rotation.from_rotvec(rng.normal(0, 0.5, 3)).as_matrix()
            poses.append(Pose(rot, rng.normal(0, 2, 3), 0.1 * i))
        traj = Trajectory(poses)
        path = tmp_path / "traj.txt"
        save_trajectory(path, traj)
        out = load_trajectory(path)
        assert len(out) == 6
        for a, b in zip(traj.poses, out.poses):
            assert a.timestamp == pytest.approx(b.timestamp, abs=1e-12)
            np.testing.assert_allclose(a.translation, b.translation, atol=1e-7)
            np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-7)


class TestDatasetLoading:
    def _tum_tree(self, root, n=10, drop_depth=None):
        (root / "rgb").mkdir(parents=True)
        (root / "depth").mkdir()
        rng = np.random.default_rng(56)
        rgb_lines, depth_lines = [], []
        for i in range(n):
            t = i * 0.1
            save_rgb(root / "rgb" / f"{i}.png", rng.random((8, 8, 3)), bitdepth=8)
            rgb_lines.append(f"{t:.4f} rgb/{i}.png")
            if i != drop_depth:
                save_depth_png(root / "depth" / f"{i}.png", np.full((8, 8), 1.0))
                depth_lines.append(f"{t:.4f} depth/{i}.png")
        (root / "rgb.txt").write_text("\n".join(rgb_lines) + "\n")
        (root / "depth.txt").write_text("\n".join(depth_lines) + "\n")
        return root

    def test_tum_layout(self, tmp_path):
        ds = load_dataset(self._tum_tree(tmp_path / "tum"))
        assert len(ds) == 10

    def test_tum_missing_depth_timestamp(self, tmp_path, caplog):
        import logging
        with caplog.at_level(logging.WARNING, logger="codedcam.dataset"):
            ds = load_dataset(self._tum_tree(tmp_path / "tum2", drop_depth=4))
        assert len(ds) == 9
        assert any("dropped" in r.message for r in caplog.records)

    def test_icl_layout(self, tmp_path):
        root = tmp_path / "icl"
        (root / "rgb").mkdir(parents=True)
        (root / "depth").mkdir()
        rng = np.random.default_rng(57)
        for i in range(10):
            save_rgb(root / "rgb" / f"{i}.png", rng.random((8, 8, 3)), bitdepth=8)
            save_depth_png(root / "depth" / f"{i}.png", np.full((8, 8), 1.0))
        ds = load_dataset(root)
        assert len(ds) == 10
        # numeric ordering, not lexicographic: entry 2 is 2.png, not 10.png
        assert ds.entries[2][1].name == "2.png"

    def test_missing_root(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nope")

    def test_calibration_file(self, tmp_path):
        root = self._tum_tree(tmp_path / "tum3", n=2)
        (root / "calibration.txt").write_text(
            "fx=300\nfy=310\ncx=80\ncy=60\ndepth_scale=1000\n")
        ds = load_dataset(root)
        assert ds.intrinsics.fx == 300 and ds.depth_scale == 1000

    def test_intrinsics_file_missing_key(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text("fx=300\nfy=310\n")
        with pytest.raises(DatasetError):
            load_intrinsics_file(path)


class TestParseConfig:
    def test_empty_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        config = parse_config(path)
        assert config.focal_length == 0.05
        assert config.f_number == 1.8
        assert config.focus_distance == 0.85
        assert config.bins_count == 27
        assert (config.bins_near, config.bins_far) == (0.5, 6.0)

    def test_none_path_gives_defaults(self):
        config = parse_config(None)
        assert config.mask_grid == 23

    def test_syntax_error_with_line_number(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("# comment\nbins.count=abc\n")
        with pytest.raises(ConfigError, match=":2"):
            parse_config(path)

    def test_invariant_violation_names_key(self, tmp_path):
        path = tmp_path / "bad2.cfg"
        path.write_text("camera.f_number=-1\n")
        with pytest.raises(ConfigError, match="camera.f_number"):
            parse_config(path)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad3.cfg"
        path.write_text("camera.zoom=2\n")
        with pytest.raises(ConfigError, match="camera.zoom"):
            parse_config(path)

    def test_overrides_and_sections(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text("camera.focus_distance=1.2  # meters\nvo.max_features=500\n")
        config = parse_config(path, overrides={"bins.count": "9", "seed": "3"})
        assert config.focus_distance == 1.2
        assert config.vo.max_features == 500
        assert config.bins_count == 9 and config.seed == 3

    def test_bins_spec_round_trip(self, tmp_path):
        path = tmp_path / "bins.cfg"
        path.write_text("bins.count=13\nbins.near=0.7\nbins.far=4.5\nbins.spacing=linear\n")
        bins = parse_config(path).bins()
        assert bins.count == 13
        assert bins.spacing == "linear"
        np.testing.assert_allclose(bins.centers,
                                   0.7 + (np.arange(13) + 0.5) / 13 * 3.8, atol=1e-12)

    def test_mask_zernike_spec(self):
        config = parse_config(None, overrides={"mask.zernike": "4:0.2e-6,6:0.1e-6"})
        mask = config.mask()
        assert mask.grid_size == 23
        assert mask.height_map.max() > 0
