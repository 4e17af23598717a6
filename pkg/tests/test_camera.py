import math
import warnings

import numpy as np
import pytest

from stairloc.camera import (
    DepthFrame,
    Intrinsics,
    project,
    read_intrinsics,
    read_pfm,
    unproject,
    unproject_many,
    write_intrinsics,
    write_pfm,
)
from stairloc.errors import NonPositiveDepth, OutOfBounds, SpecError

K = Intrinsics(fx=100.0, fy=100.0, cx=320.0, cy=240.0, width=640, height=480)


def matrix_project(point, intr):
    """Independent oracle: explicit K @ P / d."""
    homo = intr.matrix() @ np.asarray(point, dtype=float)
    return homo[:2] / homo[2], homo[2]


def matrix_unproject(pixel, depth, intr):
    """Independent oracle: d * K^-1 @ p~ via numpy inverse."""
    homo = np.array([pixel[0], pixel[1], 1.0])
    return depth * (np.linalg.inv(intr.matrix()) @ homo)


class TestProject:
    def test_principal_ray(self):
        unit = Intrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=1, height=1)
        (u, v), d = project(np.array([0.0, 0.0, 1.0]), unit)
        assert (u, v) == (0.0, 0.0)
        assert d == 1.0

    @pytest.mark.parametrize("point,expected", [
        ((2.0, 0.0, 2.0), (420.0, 240.0)),
        ((0.0, -1.2, 2.0), (320.0, 180.0)),
    ])
    def test_off_axis(self, point, expected):
        (u, v), d = project(np.array(point), K)
        oracle_px, oracle_d = matrix_project(point, K)
        np.testing.assert_allclose([u, v], oracle_px, atol=1e-12)
        np.testing.assert_allclose([u, v], expected, atol=1e-9)
        assert d == oracle_d == point[2]

    def test_nonpositive_depth(self):
        with pytest.raises(NonPositiveDepth):
            project(np.array([0.0, 0.0, 0.0]), K)
        with pytest.raises(NonPositiveDepth):
            project(np.array([1.0, 1.0, -2.0]), K)


class TestUnproject:
    def test_principal_point(self):
        np.testing.assert_allclose(unproject((320.0, 240.0), 3.0, K),
                                   [0.0, 0.0, 3.0], atol=1e-12)

    def test_off_axis(self):
        point = unproject((420.0, 240.0), 2.0, K)
        np.testing.assert_allclose(point, matrix_unproject((420, 240), 2.0, K),
                                   atol=1e-12)
        np.testing.assert_allclose(point, [2.0, 0.0, 2.0], atol=1e-9)

    def test_nonpositive_depth(self):
        with pytest.raises(NonPositiveDepth):
            unproject((320.0, 240.0), 0.0, K)

    def test_depth_linearity(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            p = (rng.uniform(0, 640), rng.uniform(0, 480))
            d = rng.uniform(0.1, 10.0)
            np.testing.assert_allclose(unproject(p, 2.0 * d, K),
                                       2.0 * unproject(p, d, K), rtol=1e-15)


class TestRoundTrip:
    def test_pixel_round_trip(self):
        rng = np.random.default_rng(123)
        n = 10_000
        us = rng.uniform(0, K.width - 1, n)
        vs = rng.uniform(0, K.height - 1, n)
        ds = rng.uniform(0.1, 20.0, n)
        points = unproject_many(us, vs, ds, K)
        back_u = K.fx * points[:, 0] / points[:, 2] + K.cx
        back_v = K.fy * points[:, 1] / points[:, 2] + K.cy
        assert np.abs(back_u - us).max() < 1e-9
        assert np.abs(back_v - vs).max() < 1e-9
        assert np.abs(points[:, 2] - ds).max() < 1e-9

    def test_point_round_trip(self):
        rng = np.random.default_rng(321)
        for _ in range(1000):
            point = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                              rng.uniform(0.1, 20.0)])
            pixel, d = project(point, K)
            back = unproject(pixel, d, K)
            np.testing.assert_allclose(back, point, rtol=1e-9)


class TestIntrinsicsInvariants:
    def test_rejects_bad_focal(self):
        with pytest.raises(SpecError):
            Intrinsics(fx=0.0, fy=1.0, cx=0.0, cy=0.0, width=10, height=10)

    def test_rejects_principal_outside(self):
        with pytest.raises(SpecError):
            Intrinsics(fx=1.0, fy=1.0, cx=10.0, cy=0.0, width=10, height=10)

    def test_inverse_matches_numpy(self):
        np.testing.assert_allclose(K.inverse_matrix(), np.linalg.inv(K.matrix()),
                                   atol=1e-15)


class TestDepthFrame:
    def make_frame(self, first=1.5):
        data = np.full((4, 6), 2.0)
        data[0, 0] = first
        return DepthFrame(width=6, height=4, data=data)

    def test_valid_sample(self):
        assert self.make_frame(1.5).depth_at((0, 0)) == 1.5

    def test_sentinel(self):
        assert self.make_frame(0.0).depth_at((0, 0)) is None
        assert self.make_frame(float("nan")).depth_at((0, 0)) is None
        assert self.make_frame(-1.0).depth_at((0, 0)) is None

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            self.make_frame().depth_at((6, 0))

    def test_rounding(self):
        assert self.make_frame(1.5).depth_at((0.4, 0.4)) == 1.5
        assert self.make_frame(1.5).depth_at((0.6, 0.0)) == 2.0


class TestFileFormats:
    def test_pfm_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        data = rng.uniform(0.5, 10.0, size=(8, 10)).astype(np.float32).astype(float)
        data[2, 3] = 0.0
        frame = DepthFrame(width=10, height=8, data=data)
        path = tmp_path / "d.pfm"
        write_pfm(path, frame)
        back = read_pfm(path)
        assert (back.width, back.height) == (10, 8)
        np.testing.assert_array_equal(back.data, data)

    def test_intrinsics_round_trip(self, tmp_path):
        path = tmp_path / "intr.txt"
        write_intrinsics(path, K)
        assert read_intrinsics(path) == K

    def test_intrinsics_ignores_distortion(self, tmp_path):
        path = tmp_path / "intr.txt"
        path.write_text(
            "fx = 100\nfy = 100\ncx = 320\ncy = 240\n"
            "width = 640\nheight = 480\nk1 = 0.01\nk2 = -0.002\n")
        with pytest.warns(UserWarning, match="k1"):
            assert read_intrinsics(path) == K
