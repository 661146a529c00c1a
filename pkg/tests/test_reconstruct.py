import io

import numpy as np
import pytest
from PIL import Image

from weblite.codec_meta import parse_meta
from weblite.errors import CorruptPayload, EncodeError, NothingToFill
from weblite.reconstruct import (
    Raster,
    ReflectionParams,
    _mirror_row_indices,
    finalize,
    reflect_fill,
    render_prefix,
)

from imagegen import encode, make_image


def mirror_oracle(valid_rows, hole, max_repeats):
    """Independent bounce-walk: step down from the boundary, reflecting at
    both edges of the decoded band, freezing after max_repeats traversals."""
    out = []
    idx, step, traversed = valid_rows - 1, -1, 0
    for _ in range(hole):
        out.append(idx)
        if traversed >= max_repeats * 2 * valid_rows - 1:
            continue  # cap reached: repeat the last index forever
        traversed += 1
        nxt = idx + step
        if nxt < 0 or nxt >= valid_rows:
            # reflect about the edge, repeating the edge row itself
            step = -step
            nxt = idx
        idx = nxt
    return out


class TestMirrorIndices:
    @pytest.mark.parametrize("valid,hole,reps", [
        (1, 5, 8), (2, 10, 8), (3, 14, 8), (5, 3, 8),
        (10, 100, 2), (4, 200, 1), (50, 50, 8),
    ])
    def test_against_bounce_oracle(self, valid, hole, reps):
        got = _mirror_row_indices(valid, hole, reps).tolist()
        assert got == mirror_oracle(valid, hole, reps)

    def test_small_trivial_case(self):
        # 3 valid rows filling 8: walk reads 2,1,0,0,1,2,2,1
        assert _mirror_row_indices(3, 8, 8).tolist() == [2, 1, 0, 0, 1, 2, 2, 1]

    def test_indices_always_in_range(self):
        for valid in (1, 2, 7, 33):
            idx = _mirror_row_indices(valid, 500, 8)
            assert idx.min() >= 0 and idx.max() < valid


def solid_raster(h, w, rows_pattern=None):
    px = np.zeros((h, w, 4), dtype=np.uint8)
    px[:, :, 3] = 255
    if rows_pattern is None:
        rows_pattern = [(r, (r * 7 % 256, r * 13 % 256, r * 29 % 256)) for r in range(h)]
    for r, rgb in rows_pattern:
        px[r, :, :3] = rgb
    return Raster(px.copy())


class TestReflectFill:
    def test_pure_mirror_matches_oracle(self):
        # blur off, blend off: fill must be an exact row copy per the walk
        raster = solid_raster(20, 16)
        params = ReflectionParams(blur_sigma=0.0, blend_rows=0)
        out = reflect_fill(raster, 8, params)
        oracle = mirror_oracle(8, 12, params.max_mirror_repeats)
        for k, src in enumerate(oracle):
            assert np.array_equal(out.pixels[8 + k], raster.pixels[src]), k

    def test_rows_above_blend_band_untouched(self, corpus_by_name):
        f = corpus_by_name["jb_med"]
        params = ReflectionParams()
        raster, valid = render_prefix(f.data[:f.size // 2], f.meta)
        out = reflect_fill(raster, valid, params)
        keep = valid - params.blend_rows
        assert np.array_equal(out.pixels[:keep], raster.pixels[:keep])

    def test_no_undefined_pixels_below_boundary(self, corpus_by_name):
        # the decoded half leaves garbage rows; after filling, every fill row
        # must be derived from decoded content, not the undefined region
        f = corpus_by_name["jb_med"]
        raster, valid = render_prefix(f.data[:f.size // 2], f.meta)
        poisoned = Raster(raster.pixels.copy())
        poisoned.pixels[valid:] = 77  # sentinel in the undefined region
        a = reflect_fill(raster, valid)
        b = reflect_fill(poisoned, valid)
        assert np.array_equal(a.pixels, b.pixels)

    def test_blur_smooths_fill(self):
        rng = np.random.default_rng(0)
        px = rng.integers(0, 256, (60, 40, 4), dtype=np.uint8)
        px[:, :, 3] = 255
        raster = Raster(px.copy())
        sharp = reflect_fill(raster, 30, ReflectionParams(blur_sigma=0, blend_rows=0))
        soft = reflect_fill(raster, 30, ReflectionParams(blur_sigma=4, blend_rows=0))

        def roughness(r):
            f = r.pixels[31:, :, :3].astype(float)
            return np.abs(np.diff(f, axis=0)).mean()

        assert roughness(soft) < roughness(sharp) / 2

    def test_blend_band_reduces_seam(self):
        px = np.zeros((40, 30, 4), dtype=np.uint8)
        px[:, :, 3] = 255
        px[:20, :, :3] = 200  # bright decoded half
        raster = Raster(px.copy())
        hard = reflect_fill(raster, 20, ReflectionParams(blur_sigma=4, blend_rows=0))
        soft = reflect_fill(raster, 20, ReflectionParams(blur_sigma=4, blend_rows=12))

        def seam(r):
            f = r.pixels[:, :, :3].astype(float)
            return np.abs(f[20] - f[19]).mean()

        assert seam(soft) <= seam(hard) + 1e-9

    def test_deterministic(self):
        raster = solid_raster(30, 20)
        a = reflect_fill(raster, 10)
        b = reflect_fill(raster, 10)
        assert np.array_equal(a.pixels, b.pixels)

    @pytest.mark.parametrize("valid", [0, -3, 30, 50])
    def test_nothing_to_fill(self, valid):
        with pytest.raises(NothingToFill):
            reflect_fill(solid_raster(30, 20), valid)

    def test_single_valid_row(self):
        raster = solid_raster(10, 8)
        out = reflect_fill(raster, 1, ReflectionParams(blur_sigma=0, blend_rows=0))
        for r in range(1, 10):
            assert np.array_equal(out.pixels[r], raster.pixels[0])

    def test_input_not_mutated(self):
        raster = solid_raster(30, 20)
        before = raster.pixels.copy()
        reflect_fill(raster, 10)
        assert np.array_equal(raster.pixels, before)


class TestRenderPrefix:
    def test_full_baseline_payload(self, corpus_by_name):
        f = corpus_by_name["jb_small"]
        raster, valid = render_prefix(f.data, f.meta)
        assert valid == f.meta.height
        ref = np.asarray(Image.open(io.BytesIO(f.data)).convert("RGBA"))
        assert np.array_equal(raster.pixels, ref)

    def test_truncated_baseline_valid_rows(self, corpus_by_name):
        from weblite.codec_meta import complete_rows
        f = corpus_by_name["jb_med"]
        cut = f.data[:f.size // 2]
        raster, valid = render_prefix(cut, f.meta)
        assert raster.height == f.meta.height and raster.width == f.meta.width
        assert valid == complete_rows(f.meta, cut)
        assert 0 < valid < f.meta.height

    def test_progressive_prefix_full_frame(self, corpus_by_name):
        f = corpus_by_name["jp_med"]
        cut = f.data[:int(f.size * 0.15)]
        raster, valid = render_prefix(cut, f.meta)
        assert valid == f.meta.height
        assert (raster.height, raster.width) == (f.meta.height, f.meta.width)

    def test_progressive_prefix_resembles_full(self, corpus_by_name):
        f = corpus_by_name["jp_med"]
        full, _ = render_prefix(f.data, f.meta)
        part, _ = render_prefix(f.data[:int(f.size * 0.15)], f.meta)
        err = np.abs(full.pixels[:, :, :3].astype(float)
                     - part.pixels[:, :, :3].astype(float)).mean()
        gray = np.abs(full.pixels[:, :, :3].astype(float) - 128.0).mean()
        assert err < gray / 2  # far closer to the full frame than a blank one

    def test_png_truncated(self, corpus_by_name):
        f = corpus_by_name["png_med"]
        raster, valid = render_prefix(f.data[:f.size // 2], f.meta)
        assert 0 < valid < f.meta.height
        full = np.asarray(Image.open(io.BytesIO(f.data)).convert("RGBA"))
        assert np.array_equal(raster.pixels[:valid], full[:valid])

    def test_incomplete_header_rejected(self, corpus_by_name):
        from dataclasses import replace
        f = corpus_by_name["jb_small"]
        broken = replace(f.meta, header_complete=False)
        with pytest.raises(CorruptPayload):
            render_prefix(f.data[:100], broken)

    def test_garbage_payload(self, corpus_by_name):
        f = corpus_by_name["png_small"]
        with pytest.raises(CorruptPayload):
            render_prefix(b"\x89PNG\r\n\x1a\n" + b"\x00" * 64, f.meta)


class TestFinalize:
    def test_webp_round_trip(self):
        raster = solid_raster(40, 30)
        data = finalize(raster, encode="webp_q85")
        im = Image.open(io.BytesIO(data))
        assert im.format == "WEBP" and im.size == (30, 40)

    def test_downscale_to_rendered_box(self):
        raster = solid_raster(400, 300)
        data = finalize(raster, rendered_dims=(150, 200))
        assert Image.open(io.BytesIO(data)).size == (150, 200)

    def test_never_upscale(self):
        raster = solid_raster(40, 30)
        data = finalize(raster, rendered_dims=(300, 400))
        assert Image.open(io.BytesIO(data)).size == (30, 40)

    def test_png_preserves_alpha(self):
        px = np.zeros((20, 20, 4), dtype=np.uint8)
        px[:, :, 3] = 128
        data = finalize(Raster(px), encode="png")
        im = Image.open(io.BytesIO(data))
        assert im.format == "PNG"
        assert np.asarray(im.convert("RGBA"))[:, :, 3].max() == 128

    def test_jpeg_encoding(self):
        data = finalize(solid_raster(20, 20), encode="jpeg_q85")
        assert Image.open(io.BytesIO(data)).format == "JPEG"

    def test_unknown_encoding(self):
        with pytest.raises(EncodeError):
            finalize(solid_raster(10, 10), encode="bpg_q40")


class TestEndToEnd:
    def test_half_budget_baseline_displayable(self, corpus_by_name):
        for name in ("jb_small", "jb_med", "jb_large"):
            f = corpus_by_name[name]
            cut = f.data[:f.size // 2]
            raster, valid = render_prefix(cut, f.meta)
            filled = reflect_fill(raster, valid)
            data = finalize(filled, encode="webp_q85")
            im = Image.open(io.BytesIO(data))
            assert im.size == (f.meta.width, f.meta.height), name
