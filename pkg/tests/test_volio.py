import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqbrain import volio
from cqbrain.errors import (
    BadFormat,
    BadMagic,
    BadRank,
    EmptyPlan,
    IndexOutOfRange,
    InvalidRequest,
    Truncated,
    UnsupportedDatatype,
)
from cqbrain.volio import Image2D, Plane

from fixtures import nifti_bytes, volume_from_coordinate


class TestParseNifti:
    def test_float32_volume_roundtrip(self):
        payload = nifti_bytes((4, 4, 4), np.arange(64, dtype=np.float64))
        header, vol = volio.parse_nifti(payload)
        assert header.sizeof_hdr == 348
        assert header.dim[:4] == (3, 4, 4, 4)
        assert (vol.nx, vol.ny, vol.nz) == (4, 4, 4)
        assert np.array_equal(vol.voxels, np.arange(64, dtype=np.float32))

    def test_bad_magic(self):
        payload = bytearray(nifti_bytes((2, 2, 2), np.zeros(8)))
        payload[344:348] = b"XXXX"
        with pytest.raises(BadMagic):
            volio.parse_nifti(bytes(payload))

    def test_int16_with_scaling(self):
        payload = nifti_bytes((1, 1, 1), np.array([3]), datatype=4, scl_slope=2.0, scl_inter=1.0)
        _, vol = volio.parse_nifti(payload)
        assert vol.voxels[0] == pytest.approx(7.0)

    def test_zero_slope_means_raw_values(self):
        payload = nifti_bytes((1, 1, 2), np.array([5, -5]), datatype=4)
        _, vol = volio.parse_nifti(payload)
        assert vol.voxels.tolist() == [5.0, -5.0]

    def test_truncated_header(self):
        with pytest.raises(Truncated):
            volio.parse_nifti(b"\x00" * 100)

    def test_truncated_raster(self):
        payload = nifti_bytes((4, 4, 4), np.arange(64))
        with pytest.raises(Truncated):
            volio.parse_nifti(payload[:-8])

    @pytest.mark.parametrize("rank", [1, 2, 4, 7])
    def test_bad_rank(self, rank):
        payload = nifti_bytes((2, 2, 2), np.zeros(8), rank=rank)
        with pytest.raises(BadRank):
            volio.parse_nifti(payload)

    @pytest.mark.parametrize("code", [0, 2, 8, 64, 512])
    def test_unsupported_datatype(self, code):
        payload = nifti_bytes((2, 2, 2), np.zeros(8), datatype=code, bitpix=32)
        with pytest.raises(UnsupportedDatatype):
            volio.parse_nifti(payload)

    def test_bitpix_mismatch_rejected(self):
        payload = nifti_bytes((2, 2, 2), np.zeros(8), datatype=16, bitpix=16)
        with pytest.raises(UnsupportedDatatype):
            volio.parse_nifti(payload)

    def test_big_endian_byte_swap(self):
        le = volio.parse_nifti(nifti_bytes((3, 2, 2), np.arange(12) * 1.5))[1]
        be = volio.parse_nifti(nifti_bytes((3, 2, 2), np.arange(12) * 1.5, big_endian=True))[1]
        assert np.array_equal(le.voxels, be.voxels)

    def test_detached_raster(self):
        hdr, raster = nifti_bytes((2, 2, 2), np.arange(8), magic=b"ni1\x00", vox_offset=0.0)
        _, vol = volio.parse_nifti(hdr, detached_data=raster)
        assert np.array_equal(vol.voxels, np.arange(8, dtype=np.float32))
        with pytest.raises(Truncated):
            volio.parse_nifti(hdr)

    def test_pure_function_of_bytes(self):
        payload = nifti_bytes((3, 3, 3), np.arange(27) - 13.0)
        a = volio.parse_nifti(payload)
        b = volio.parse_nifti(payload)
        assert a[0] == b[0]
        assert np.array_equal(a[1].voxels, b[1].voxels)


class TestSlicePlanning:
    @pytest.mark.parametrize("m,n,expected", [(256, 40, 6), (192, 40, 4), (7, 7, 1), (100, 1, 100)])
    def test_interval(self, m, n, expected):
        assert volio.compute_interval(m, n) == expected

    @pytest.mark.parametrize("m,n", [(10, 0), (10, 11)])
    def test_interval_invalid(self, m, n):
        with pytest.raises(InvalidRequest):
            volio.compute_interval(m, n)

    @pytest.mark.parametrize(
        "plane,m,n,k1,k2,exp_i,exp_slices",
        [
            (Plane.AXIAL, 256, 40, 10, 18, 6, 15),
            (Plane.CORONAL, 256, 40, 10, 18, 6, 15),
            (Plane.SAGITTAL, 192, 40, 13, 15, 4, 20),
            (Plane.AXIAL, 10, 5, 0, 0, 2, 5),
        ],
    )
    def test_plan(self, plane, m, n, k1, k2, exp_i, exp_slices):
        plan = volio.plan_slices(plane, m, n, k1, k2)
        assert plan.i == exp_i
        assert plan.n_slices == exp_slices

    def test_empty_plan(self):
        with pytest.raises(EmptyPlan):
            volio.plan_slices(Plane.AXIAL, 10, 5, 3, 2)

    def test_negative_exclusion_rejected(self):
        with pytest.raises(InvalidRequest):
            volio.plan_slices(Plane.AXIAL, 10, 5, -1, 0)

    def test_indices_are_strided_and_skip_head(self):
        plan = volio.plan_slices(Plane.AXIAL, 20, 10, 2, 3)
        assert plan.indices == [4, 6, 8, 10, 12]

    @given(
        m=st.integers(1, 600),
        n=st.integers(1, 600),
        k1=st.integers(0, 5),
        k2=st.integers(0, 5),
    )
    @settings(max_examples=300, deadline=None)
    def test_plan_properties(self, m, n, k1, k2):
        if n > m:
            with pytest.raises(InvalidRequest):
                volio.compute_interval(m, n)
            return
        i = volio.compute_interval(m, n)
        assert i >= 1 and i * n <= m
        try:
            plan = volio.plan_slices(Plane.AXIAL, m, n, k1, k2)
        except EmptyPlan:
            assert math.ceil(m / i) <= k1 + k2
            return
        assert plan.n_slices == math.ceil(m / i) - (k1 + k2)
        assert all(0 <= idx <= m - 1 for idx in plan.indices)
        # weakly fewer slices as exclusions grow
        try:
            wider = volio.plan_slices(Plane.AXIAL, m, n, k1 + 1, k2)
            assert wider.n_slices <= plan.n_slices
        except EmptyPlan:
            pass


class TestExtractSlice:
    def test_axial_constant_slice_normalizes_to_zero(self):
        vol = volio.Volume3D(4, 4, 4, volume_from_coordinate(4, "z"))
        img = volio.extract_slice(vol, Plane.AXIAL, 2)
        assert img.width == 4 and img.height == 4
        assert np.array_equal(img.pixels, np.zeros((4, 4), dtype=np.float32))

    def test_sagittal_selects_y(self):
        vol = volio.Volume3D(2, 2, 2, volume_from_coordinate(2, "y"))
        img = volio.extract_slice(vol, Plane.SAGITTAL, 1)
        assert np.array_equal(img.pixels, np.zeros((2, 2), dtype=np.float32))

    def test_coronal_selects_x(self):
        vol = volio.Volume3D(2, 2, 2, volume_from_coordinate(2, "x"))
        img = volio.extract_slice(vol, Plane.CORONAL, 0)
        assert np.array_equal(img.pixels, np.zeros((2, 2), dtype=np.float32))

    def test_axial_gradient_orientation(self):
        # voxel value = x: axial slice must vary along the width (columns)
        vol = volio.Volume3D(4, 4, 4, volume_from_coordinate(4, "x"))
        img = volio.extract_slice(vol, Plane.AXIAL, 1)
        expected = np.tile(np.arange(4, dtype=np.float32) / 3.0, (4, 1))
        assert np.allclose(img.pixels, expected)

    def test_minmax_normalization(self):
        vox = np.zeros(8)
        vox[0] = -2.0
        vox[3] = 6.0
        vol = volio.Volume3D(2, 2, 2, vox)
        img = volio.extract_slice(vol, Plane.AXIAL, 0)
        assert img.pixels.min() == 0.0 and img.pixels.max() == 1.0

    def test_index_out_of_range(self):
        vol = volio.Volume3D(2, 3, 4, np.zeros(24))
        with pytest.raises(IndexOutOfRange):
            volio.extract_slice(vol, Plane.AXIAL, 4)
        with pytest.raises(IndexOutOfRange):
            volio.extract_slice(vol, Plane.CORONAL, -1)
        with pytest.raises(IndexOutOfRange):
            volio.extract_slice(vol, Plane.SAGITTAL, 3)

    def test_full_plan_over_three_planes_yields_50_images(self):
        # full scanner-sized volume: 256 x 192 x 256 voxels
        nx, ny, nz = 256, 192, 256
        vox = np.linspace(0.0, 1.0, nx * ny * nz, dtype=np.float32)
        vol = volio.Volume3D(nx, ny, nz, vox)
        table = {
            Plane.AXIAL: (40, 10, 18),
            Plane.CORONAL: (40, 10, 18),
            Plane.SAGITTAL: (40, 13, 15),
        }
        images = []
        for plane, (n, k1, k2) in table.items():
            plan = volio.plan_slices(plane, vol.plane_extent(plane), n, k1, k2)
            for idx in plan.indices:
                images.append(volio.extract_slice(vol, plane, idx))
        assert len(images) == 50
        assert all(img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0 for img in images)


class TestResize:
    def test_constant_stays_constant(self):
        img = Image2D(3, 3, np.full((3, 3), 0.25))
        out = volio.resize_bilinear(img, 7, 5)
        assert np.allclose(out.pixels, 0.25)

    def test_corner_aligned_hand_values(self):
        # derived by hand from the corner-aligned formula on [[0,1],[0,1]]
        img = Image2D(2, 2, np.array([[0.0, 1.0], [0.0, 1.0]]))
        out = volio.resize_bilinear(img, 4, 4)
        expected_row = np.array([0.0, 1 / 3, 2 / 3, 1.0], dtype=np.float32)
        for row in out.pixels:
            assert np.allclose(row, expected_row, atol=1e-7)

    def test_identity_resize(self):
        pix = np.linspace(0, 1, 12).reshape(3, 4)
        img = Image2D(4, 3, pix)
        out = volio.resize_bilinear(img, 4, 3)
        assert np.allclose(out.pixels, pix.astype(np.float32))

    def test_single_pixel_target(self):
        img = Image2D(2, 2, np.array([[0.0, 1.0], [0.5, 0.25]]))
        out = volio.resize_bilinear(img, 1, 1)
        assert out.pixels.shape == (1, 1)
        assert 0.0 <= out.pixels[0, 0] <= 1.0

    def test_output_clamped(self):
        img = Image2D(2, 1, np.array([[0.0, 1.0]]))
        out = volio.resize_bilinear(img, 9, 2)
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


class TestPgm:
    def test_full_intensity_byte(self):
        data = volio.write_pgm(Image2D(1, 1, np.array([[1.0]])))
        assert data.endswith(b"\xff")
        assert data.startswith(b"P5\n1 1\n255\n")

    def test_roundtrip_quantized(self):
        rng = np.random.default_rng(0)
        pix = np.floor(rng.random((5, 7)) * 255.0 + 0.5) / 255.0
        img = Image2D(7, 5, pix)
        back = volio.read_pgm(volio.write_pgm(img))
        assert back.width == 7 and back.height == 5
        assert np.allclose(back.pixels, img.pixels, atol=1e-7)

    def test_bad_magic(self):
        with pytest.raises(BadFormat):
            volio.read_pgm(b"P2\n1 1\n255\n\x00")

    def test_bad_maxval(self):
        with pytest.raises(BadFormat):
            volio.read_pgm(b"P5\n1 1\n65535\n\x00\x00")

    def test_truncated_raster(self):
        with pytest.raises(BadFormat):
            volio.read_pgm(b"P5\n2 2\n255\n\x00\x00")

    def test_comment_in_header(self):
        img = volio.read_pgm(b"P5\n# a comment\n1 1\n255\n\x7f")
        assert img.pixels[0, 0] == pytest.approx(127 / 255)

    def test_nonpositive_dimensions_rejected(self):
        with pytest.raises(BadFormat):
            volio.read_pgm(b"P5\n0 1\n255\n\x00")
        with pytest.raises(BadFormat):
            volio.read_pgm(b"P5\n2 -1\n255\n\x00\x00")

    def test_negative_vox_offset_rejected(self):
        payload = nifti_bytes((2, 2, 2), np.zeros(8), vox_offset=-4.0)
        with pytest.raises(Truncated):
            volio.parse_nifti(payload)

    @given(st.lists(st.floats(0.0, 1.0, width=32), min_size=1, max_size=64))
    @settings(max_examples=100, deadline=None)
    def test_roundtrip_error_bound(self, values):
        pix = np.array(values, dtype=np.float32).reshape(1, -1)
        img = Image2D(pix.shape[1], 1, pix)
        back = volio.read_pgm(volio.write_pgm(img))
        # 1e-7 slack: pixels are stored float32, ties land exactly on 1/510
        err = np.abs(back.pixels.astype(np.float64) - pix.astype(np.float64)).max()
        assert err <= 1.0 / 510.0 + 1e-7
