import logging

import numpy as np
import pytest
from PIL import Image as PilImage

from cfv import descriptors as desc
from cfv.errors import FormatError, ValidationError
from oracles import lbp_code_brute


def rgb(rng, h, w):
    return desc.Image(rng.random((h, w, 3)))


class TestImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            desc.Image(np.full((4, 4, 3), 1.5))

    def test_gray_luma(self):
        img = desc.Image(np.tile([1.0, 0.0, 0.0], (2, 2, 1)))
        np.testing.assert_allclose(img.gray(), 0.299)

    def test_load_png(self, tmp_path, rng):
        arr = (rng.random((5, 7, 3)) * 255).astype(np.uint8)
        PilImage.fromarray(arr).save(tmp_path / "a.png")
        img = desc.load_image(tmp_path / "a.png")
        assert (img.height, img.width, img.channels) == (5, 7, 3)
        np.testing.assert_allclose(img.pixels, arr / 255.0)

    def test_load_ppm(self, tmp_path):
        arr = np.zeros((3, 3, 3), np.uint8)
        arr[1, 1] = 255
        PilImage.fromarray(arr).save(tmp_path / "a.ppm")
        assert desc.load_image(tmp_path / "a.ppm").pixels[1, 1, 0] == 1.0

    def test_load_garbage(self, tmp_path):
        (tmp_path / "x.png").write_bytes(b"not an image")
        with pytest.raises(FormatError):
            desc.load_image(tmp_path / "x.png")


class TestLbp:
    def test_uniform_table(self):
        assert desc.UNIFORM_PATTERNS.size == 58
        assert desc.LBP_BINS == 59
        assert 0 in desc.UNIFORM_PATTERNS and 255 in desc.UNIFORM_PATTERNS

    def test_codes_match_brute_force(self, rng):
        img = np.round(rng.random((9, 11)) * 4) / 4  # plenty of ties
        codes = desc.lbp_codes(img)
        for y in range(9):
            for x in range(11):
                assert codes[y, x] == lbp_code_brute(img, y, x)

    def test_constant_image(self):
        ds = desc.dense_lbp(desc.Image(np.full((32, 32, 3), 0.4)))
        assert ds.dim == 177
        bin255 = int(np.flatnonzero(desc.UNIFORM_PATTERNS == 255)[0])
        expected = np.zeros(177)
        expected[[bin255, 59 + bin255, 118 + bin255]] = 1.0
        np.testing.assert_array_equal(ds.data, np.tile(expected, (ds.count, 1)))

    def test_grid_count(self, rng):
        ds = desc.dense_lbp(rgb(rng, 64, 64))
        assert ds.count == 49 and ds.dim == 177

    def test_dimension_independent_of_size(self, rng):
        assert desc.dense_lbp(rgb(rng, 20, 45)).dim == 177

    def test_channel_blocks_sum_to_one(self, rng):
        ds = desc.dense_lbp(rgb(rng, 40, 40))
        for c in range(3):
            np.testing.assert_allclose(ds.data[:, c * 59:(c + 1) * 59].sum(1), 1.0, atol=1e-9)

    def test_patch_histogram_brute_force(self, rng):
        img = rgb(rng, 24, 24)
        ds = desc.dense_lbp(img, patch=8, step=8)
        c = 1
        codes = desc.lbp_codes(img.pixels[:, :, c])
        patch = codes[8:16, 16:24]  # descriptor at grid row 1, column 2
        hist = np.zeros(59)
        for code in patch.ravel():
            hits = np.flatnonzero(desc.UNIFORM_PATTERNS == code)
            hist[hits[0] if hits.size else 58] += 1
        np.testing.assert_allclose(ds.data[1 * 3 + 2, 59:118], hist / 64, atol=1e-12)

    def test_errors(self, rng):
        with pytest.raises(ValidationError):
            desc.dense_lbp(desc.Image(rng.random((32, 32))))
        with pytest.raises(ValidationError):
            desc.dense_lbp(rgb(rng, 10, 40))


class TestGradhist:
    def test_constant_is_zero(self):
        ds = desc.dense_gradhist(desc.Image.from_array(np.full((24, 24), 0.3)))
        assert ds.dim == 128
        np.testing.assert_array_equal(ds.data, 0.0)

    def test_ramp_single_bin(self):
        ramp = np.tile(np.linspace(0, 1, 32), (32, 1))
        ds = desc.dense_gradhist(desc.Image.from_array(ramp))
        cells = ds.data.reshape(ds.count, 16, 8)
        assert np.all(cells[:, :, 1:] == 0.0)
        assert np.all(cells[:, :, 0] > 0.0)

    def test_vertical_ramp_lands_in_middle_bin(self):
        ramp = np.tile(np.linspace(0, 1, 32)[:, None], (1, 32))
        cells = desc.dense_gradhist(desc.Image.from_array(ramp)).data.reshape(-1, 16, 8)
        # orientation pi/2 is the centre of bin 4 of 8
        assert np.all(np.delete(cells, 4, axis=2) < 1e-12)

    def test_grid_and_bounds(self, rng):
        ds = desc.dense_gradhist(rgb(rng, 40, 36))
        assert ds.count == ((40 - 16) // 4 + 1) * ((36 - 16) // 4 + 1)
        assert np.all(ds.data >= 0)
        np.testing.assert_allclose(np.linalg.norm(ds.data, axis=1), 1.0, atol=1e-9)

    def test_clip_bound(self, rng):
        raw = rng.random((20, 128)) ** 8
        out = desc._sift_normalize(raw)
        clipped = np.minimum(raw / np.linalg.norm(raw, axis=1, keepdims=True), 0.2)
        bound = 0.2 / np.linalg.norm(clipped, axis=1, keepdims=True)
        assert np.all(out <= bound + 1e-9)

    def test_too_small(self, rng):
        with pytest.raises(ValidationError):
            desc.dense_gradhist(rgb(rng, 15, 40))


class TestMultiscale:
    def test_default_ratios(self):
        np.testing.assert_allclose(desc.scale_ratios(),
                                   [2.0, 1.414, 1.0, 0.707, 0.5, 0.354, 0.25], atol=1e-3)

    def test_single_scale_identity(self, rng):
        img = rgb(rng, 30, 30)
        a = desc.multiscale(img, desc.dense_lbp, num_scales=1, ratio_max=1.0)
        b = desc.dense_lbp(img)
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_count_is_sum(self, rng, caplog):
        img = rgb(rng, 48, 40)
        with caplog.at_level(logging.WARNING):
            ms = desc.multiscale(img, desc.dense_gradhist)
        total = 0
        for r in desc.scale_ratios():
            scaled = desc.Image(desc.resize_bilinear(img.pixels, r))
            try:
                total += desc.dense_gradhist(scaled).count
            except ValidationError:
                pass
        assert ms.count == total
        assert "skipping scale" in caplog.text  # 0.25 * 40 = 10 < 16

    def test_scale_major_order(self, rng):
        ms = desc.multiscale(rgb(rng, 40, 40), desc.dense_gradhist, num_scales=3)
        scales = ms.positions[:, 2]
        assert np.all(np.diff(scales) <= 0)
        np.testing.assert_allclose(np.unique(scales)[::-1], desc.scale_ratios(3))

    def test_positions_in_original_frame(self, rng):
        ms = desc.multiscale(rgb(rng, 40, 40), desc.dense_gradhist, num_scales=4)
        assert np.all(ms.positions[:, :2] >= 0)
        assert np.all(ms.positions[:, :2] <= 40)

    def test_deterministic(self, rng):
        img = rgb(rng, 36, 36)
        a = desc.multiscale(img, desc.dense_lbp)
        b = desc.multiscale(img, desc.dense_lbp)
        assert a.data.tobytes() == b.data.tobytes()

    def test_all_scales_too_small(self, rng):
        with pytest.raises(ValidationError):
            desc.multiscale(rgb(rng, 8, 8), desc.dense_lbp, num_scales=2, ratio_max=1.0)

    def test_resize_shapes(self, rng):
        px = rng.random((10, 20, 3))
        assert desc.resize_bilinear(px, 2.0).shape == (20, 40, 3)
        assert desc.resize_bilinear(px, 0.5).shape == (5, 10, 3)
        np.testing.assert_array_equal(desc.resize_bilinear(px, 1.0), px)

    def test_resize_constant(self):
        px = np.full((7, 9), 0.25)
        np.testing.assert_allclose(desc.resize_bilinear(px, 1.7), 0.25)
