"""Resampler tests: worked examples, oracle comparisons, invariants."""

import math

import numpy as np
import pytest

from omnimask import camera_models as cm
from omnimask import synthetic_oracle as so
from omnimask.camera_models import CameraModel
from omnimask.resampler import (
    ResampleSpec,
    boundary_mask,
    dilate_mask,
    from_cubemap,
    resample_image,
    resample_mask,
    to_cubemap,
)

from conftest import psnr, random_rotations

EQ512 = CameraModel.equirectangular(512, 256)
EQ1024 = CameraModel.equirectangular(1024, 512)


def brute_force_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Independent oracle: OR of all shifts within the Chebyshev ball."""
    out = np.zeros_like(mask)
    h, w = mask.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ys = slice(max(0, dy), min(h, h + dy))
            xs = slice(max(0, dx), min(w, w + dx))
            ys_src = slice(max(0, -dy), min(h, h - dy))
            xs_src = slice(max(0, -dx), min(w, w - dx))
            out[ys, xs] |= mask[ys_src, xs_src]
    return out


class TestResampleImage:
    def test_identity_bit_exact(self, rng):
        img = rng.integers(0, 256, (256, 512, 3), dtype=np.uint8)
        out = resample_image(img, ResampleSpec(EQ512, EQ512))
        assert np.array_equal(out, img)

    def test_constant_color_stays_constant(self, rng):
        img = np.full((256, 512, 3), 137, dtype=np.uint8)
        fish = CameraModel.fisheye(200, math.radians(200.0))
        out = resample_image(img, ResampleSpec(EQ512, fish, fill=0.0))
        uu, vv = np.meshgrid(np.arange(200) + 0.5, np.arange(200) + 0.5)
        inside = np.hypot(uu - 100, vv - 100) <= 100
        assert np.all(out[inside] == 137)
        assert np.all(out[~inside] == 0)

    def test_cubemap_round_trip_psnr(self):
        scene = so.SphericalScene(3)
        ref = so.render(scene, EQ1024, dtype=np.float32)
        faces = to_cubemap(ref, EQ1024, 256)
        back = from_cubemap(faces, EQ1024)
        assert psnr(ref, back) > 40.0

    def test_value_range_preserved(self, rng):
        img = rng.integers(40, 200, (256, 512, 3), dtype=np.uint8)
        fish = CameraModel.fisheye(300, math.pi)
        out = resample_image(img, ResampleSpec(EQ512, fish, fill=40.0))
        assert out.min() >= 40 and out.max() <= 200

    def test_grayscale_shape(self, rng):
        img = rng.integers(0, 256, (256, 512), dtype=np.uint8)
        out = resample_image(img, ResampleSpec(EQ512, EQ512))
        assert out.shape == (256, 512)
        assert np.array_equal(out, img)

    def test_size_mismatch_rejected(self, rng):
        img = rng.integers(0, 256, (100, 100, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            resample_image(img, ResampleSpec(EQ512, EQ512))

    def test_bad_dtype_rejected(self):
        img = np.zeros((256, 512, 3), dtype=np.float64)
        with pytest.raises(TypeError):
            resample_image(img, ResampleSpec(EQ512, EQ512))

    def test_deterministic(self, rng):
        img = rng.integers(0, 256, (256, 512, 3), dtype=np.uint8)
        fish = CameraModel.fisheye(300, math.radians(200.0))
        spec = ResampleSpec(EQ512, fish)
        outs = [resample_image(img, spec, threads=t) for t in (0, 1, 2, 0)]
        for out in outs[1:]:
            assert np.array_equal(outs[0], out)

    def test_rotation_composition_psnr_loss_bounded(self):
        """Two-step resampling loses < 6 dB against one composed step."""
        scene = so.SphericalScene(3)
        ref = so.render(scene, EQ1024, dtype=np.float32)
        rots = random_rotations(2, seed=5)
        r1, r2 = rots[0], rots[1]
        composed = r2 @ r1
        one = resample_image(ref, ResampleSpec(EQ1024, EQ1024, composed))
        two = resample_image(
            resample_image(ref, ResampleSpec(EQ1024, EQ1024, r2)),
            ResampleSpec(EQ1024, EQ1024, r1),
        )
        truth = so.render(scene, EQ1024, rotation=composed.T, dtype=np.float32)
        assert psnr(one, truth) - psnr(two, truth) < 6.0
        assert psnr(two, truth) > 38.0

    def test_energy_preserved_on_sphere(self):
        """Solid-angle-weighted mean intensity is rotation invariant
        within 2% (plain pixel means are not: equirectangular rows carry
        unequal area)."""
        scene = so.SphericalScene(3)
        ref = so.render(scene, EQ1024, dtype=np.float32)
        w, h = EQ1024.size
        _, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        weights = np.cos((0.5 - vv / h) * math.pi)
        for rot in random_rotations(3, seed=6):
            out = resample_image(ref, ResampleSpec(EQ1024, EQ1024, rot))
            m_src = np.average(ref.mean(axis=2), weights=weights)
            m_out = np.average(out.mean(axis=2), weights=weights)
            assert abs(m_out - m_src) / m_src < 0.02

    def test_seam_wraps_without_discontinuity(self):
        """Bilinear taps wrap across the +-pi meridian."""
        scene = so.SphericalScene(3)
        ref = so.render(scene, EQ1024, dtype=np.float32)
        half_turn = cm.rotation_about(np.array([0.0, 1.0, 0.0]), math.pi)
        out = resample_image(ref, ResampleSpec(EQ1024, EQ1024, half_turn))
        # The output's center column now shows the source seam; adjacent
        # columns must stay as smooth there as anywhere else.
        jumps = np.abs(np.diff(out, axis=1)).max(axis=(0, 2))
        assert jumps[510:514].max() <= 2.0 * np.median(jumps) + 0.01


class TestResampleMask:
    def test_full_mask_fills_valid_domain(self):
        full = np.ones((256, 512), dtype=bool)
        fish = CameraModel.fisheye(200, math.pi)
        out = resample_mask(full, ResampleSpec(EQ512, fish))
        uu, vv = np.meshgrid(np.arange(200) + 0.5, np.arange(200) + 0.5)
        inside = np.hypot(uu - 100, vv - 100) <= 100
        assert np.array_equal(out, inside)

    def test_empty_mask_stays_empty(self):
        empty = np.zeros((256, 512), dtype=bool)
        fish = CameraModel.fisheye(200, math.pi)
        out = resample_mask(empty, ResampleSpec(EQ512, fish))
        assert not out.any()

    def test_output_is_binary_bool(self, rng):
        mask = rng.random((256, 512)) > 0.5
        out = resample_mask(mask, ResampleSpec(EQ512, EQ512))
        assert out.dtype == np.bool_
        assert np.array_equal(out, mask)

    def test_spherical_cap_round_trip_iou(self):
        """omni -> 180 fisheye -> omni keeps a cap mask at IoU > 0.98."""
        eq = CameraModel.equirectangular(1440, 720)
        fish = CameraModel.fisheye(720, math.pi)
        scene = so.SphericalScene(
            0, so.BlobTrack(cm.normalize(np.array([0.3, 0.4, -0.8])), math.radians(25.0))
        )
        cap = so.blob_mask(scene, eq)
        there = resample_mask(cap, ResampleSpec(eq, fish))
        back = resample_mask(there, ResampleSpec(fish, eq))
        iou = (cap & back).sum() / (cap | back).sum()
        assert iou > 0.98

    def test_requires_bool(self, rng):
        with pytest.raises(TypeError):
            resample_mask(np.zeros((256, 512), dtype=np.uint8), ResampleSpec(EQ512, EQ512))


class TestDilate:
    def test_single_pixel_radius_4(self):
        mask = np.zeros((64, 64), dtype=bool)
        mask[30, 20] = True
        out = dilate_mask(mask, 4)
        expected = np.zeros_like(mask)
        expected[26:35, 16:25] = True
        assert np.array_equal(out, expected)
        assert out.sum() == 81

    def test_border_clipping(self):
        mask = np.zeros((32, 32), dtype=bool)
        mask[0, 0] = True
        out = dilate_mask(mask, 4)
        assert out.sum() == 25

    def test_radius_zero_identity(self, rng):
        mask = rng.random((64, 64)) > 0.8
        assert np.array_equal(dilate_mask(mask, 0), mask)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            mask = rng.random((128, 128)) > 0.97
            assert np.array_equal(dilate_mask(mask, 4), brute_force_dilate(mask, 4))

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            dilate_mask(np.zeros((4, 4), dtype=bool), -1)

    def test_monotone_in_radius(self, rng):
        mask = rng.random((64, 64)) > 0.95
        prev = mask
        for radius in (1, 2, 4):
            cur = dilate_mask(mask, radius)
            assert np.all(cur | prev == cur)
            prev = cur


class TestBoundaryMask:
    def test_margin_zero_full_disk(self):
        model = CameraModel.fisheye(720, math.radians(200.0))
        mask = boundary_mask(model, 0)
        uu, vv = np.meshgrid(np.arange(720) + 0.5, np.arange(720) + 0.5)
        assert np.array_equal(mask, np.hypot(uu - 360, vv - 360) <= 360)

    def test_margin_half_width_empty(self):
        model = CameraModel.fisheye(720, math.radians(200.0))
        assert not boundary_mask(model, 360).any()

    def test_margin_20_area(self):
        model = CameraModel.fisheye(720, math.radians(200.0))
        area = boundary_mask(model, 20).sum()
        assert abs(area - math.pi * 340**2) / (math.pi * 340**2) < 0.01

    def test_negative_margin_rejected(self):
        model = CameraModel.fisheye(720, math.radians(200.0))
        with pytest.raises(ValueError):
            boundary_mask(model, -1)

    def test_non_fisheye_rejected(self):
        with pytest.raises(ValueError):
            boundary_mask(EQ512, 0)


class TestKernelBackends:
    """The compiled kernel and the numpy fallback must agree."""

    CASES = [
        (EQ512, CameraModel.fisheye(220, math.radians(200.0)), True),
        (CameraModel.fisheye(220, math.radians(200.0)), EQ512, True),
        (EQ512, CameraModel.pinhole(160, 120, math.pi / 2), True),
        (EQ512, CameraModel.cubemap_face(96, 4), True),
        (CameraModel.cubemap_face(96, 2), CameraModel.fisheye(128, math.pi), False),
    ]

    @pytest.mark.parametrize("src_model,dst_model,bilinear", CASES)
    def test_backends_match_uint8(self, rng, src_model, dst_model, bilinear):
        from omnimask import _kernels
        from omnimask._kernels import _resample_np
        from omnimask.resampler import _fold_spec

        img = rng.integers(0, 256, (src_model.height, src_model.width, 3), dtype=np.uint8)
        rot = random_rotations(1, seed=17)[0]
        spec = ResampleSpec(src_model, dst_model, rot, "bilinear" if bilinear else "nearest")
        src_desc, dst_desc, folded = _fold_spec(spec)
        ref = _resample_np.resample(img, src_desc, dst_desc, folded, bilinear, 0.0, 0)
        out = _kernels.resample(img, src_desc, dst_desc, folded, bilinear, 0.0, 2)
        mismatches = np.abs(out.astype(int) - ref.astype(int))
        assert mismatches.max() <= 1
        assert (mismatches > 0).mean() < 1e-4

    def test_backends_match_float32(self, rng):
        from omnimask import _kernels
        from omnimask._kernels import _resample_np
        from omnimask.resampler import _fold_spec

        img = rng.random((256, 512, 3), dtype=np.float32)
        fish = CameraModel.fisheye(200, math.radians(190.0))
        spec = ResampleSpec(EQ512, fish)
        src_desc, dst_desc, folded = _fold_spec(spec)
        ref = _resample_np.resample(img, src_desc, dst_desc, folded, True, 0.0, 0)
        out = _kernels.resample(img, src_desc, dst_desc, folded, True, 0.0, 2)
        np.testing.assert_allclose(out, ref, atol=1e-6)

    def test_thread_counts_identical(self, rng):
        img = rng.integers(0, 256, (256, 512, 3), dtype=np.uint8)
        fish = CameraModel.fisheye(300, math.radians(200.0))
        spec = ResampleSpec(EQ512, fish)
        base = resample_image(img, spec, threads=1)
        for threads in (2, 3, 0):
            assert np.array_equal(resample_image(img, spec, threads=threads), base)
