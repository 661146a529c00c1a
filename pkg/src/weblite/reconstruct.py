"""Turn partial payloads into displayable rasters.

Progressive prefixes decode to a full-frame, lower-fidelity raster.
Baseline prefixes decode top rows only; the missing region is completed by
mirroring decoded rows downward and blurring the fill so the page reads as
a soft preview rather than a broken image.
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageFile
from scipy.ndimage import gaussian_filter

from .codec_meta import ImageMeta, complete_rows
from .errors import CorruptPayload, EncodeError, NothingToFill

_decode_lock = threading.Lock()


@dataclass
class Raster:
    pixels: np.ndarray  # H x W x 4 uint8, RGBA

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4 or self.pixels.dtype != np.uint8:
            raise ValueError("raster must be HxWx4 uint8")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_image(cls, im: Image.Image) -> "Raster":
        return cls(np.asarray(im.convert("RGBA"), dtype=np.uint8).copy())

    def to_image(self) -> Image.Image:
        return Image.fromarray(self.pixels, "RGBA")

    def has_transparency(self) -> bool:
        return bool((self.pixels[:, :, 3] != 255).any())


@dataclass
class ReflectionParams:
    blur_sigma: float = 4.0
    blend_rows: int = 12
    max_mirror_repeats: int = 8

    def __post_init__(self):
        if self.blur_sigma < 0 or self.blend_rows < 0 or self.max_mirror_repeats < 1:
            raise ValueError("bad reflection parameters")


def _tolerant_decode(payload: bytes) -> Image.Image:
    """Decode possibly-truncated bytes; PIL renders whatever scans/rows arrived."""
    if payload[:3] == b"\xff\xd8\xff" and not payload.endswith(b"\xff\xd9"):
        payload = payload + b"\xff\xd9"  # let libjpeg terminate cleanly
    with _decode_lock:
        old = ImageFile.LOAD_TRUNCATED_IMAGES
        ImageFile.LOAD_TRUNCATED_IMAGES = True
        try:
            im = Image.open(io.BytesIO(payload))
            im.load()
        except Exception as exc:
            raise CorruptPayload(str(exc)) from exc
        finally:
            ImageFile.LOAD_TRUNCATED_IMAGES = old
    return im


def render_prefix(payload: bytes, meta: ImageMeta) -> tuple[Raster, int]:
    """Decode a byte prefix. Progressive images cover the full frame
    (valid_rows = height); baseline images are valid only down to the row
    boundary reported by the entropy accounting, rows below are undefined."""
    if not meta.header_complete:
        raise CorruptPayload("incomplete header")
    im = _tolerant_decode(payload)
    raster = Raster.from_image(im)
    if raster.height < meta.height:  # decoder stopped early: pad to declared dims
        pad = np.zeros((meta.height - raster.height, raster.width, 4), dtype=np.uint8)
        raster = Raster(np.vstack([raster.pixels, pad]))
    if meta.progressive:
        return raster, meta.height
    rows = complete_rows(meta, payload)
    return raster, rows


def _mirror_row_indices(valid_rows: int, hole: int, max_repeats: int) -> np.ndarray:
    """Triangular-wave source indices: r-1, ..., 0, 0, ..., r-1, r-1, ... capped."""
    r = valid_rows
    ks = np.arange(hole)
    capped = np.minimum(ks, max_repeats * 2 * r - 1)
    pos = capped % (2 * r)
    return np.where(pos < r, r - 1 - pos, pos - r)


def reflect_fill(raster: Raster, valid_rows: int, params: ReflectionParams | None = None) -> Raster:
    params = params or ReflectionParams()
    h = raster.height
    if valid_rows <= 0 or valid_rows >= h:
        raise NothingToFill(f"valid_rows={valid_rows} of {h}")
    out = raster.pixels.copy()
    hole = h - valid_rows
    src = _mirror_row_indices(valid_rows, hole, params.max_mirror_repeats)
    fill = out[src].astype(np.float64)
    if params.blur_sigma > 0:
        fill = gaussian_filter(fill, sigma=(params.blur_sigma, params.blur_sigma, 0))
    out[valid_rows:] = np.clip(np.rint(fill), 0, 255).astype(np.uint8)
    if params.blend_rows > 0 and params.blur_sigma > 0:
        band_top = max(0, valid_rows - params.blend_rows)
        band = out[band_top:valid_rows].astype(np.float64)
        if len(band):
            soft = gaussian_filter(
                out[band_top:].astype(np.float64),
                sigma=(params.blur_sigma, params.blur_sigma, 0),
            )[:valid_rows - band_top]
            t = ((np.arange(len(band)) + 1) / (len(band) + 1))[:, None, None]
            blended = (1 - t) * band + t * soft
            out[band_top:valid_rows] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return Raster(out)


def finalize(
    raster: Raster,
    rendered_dims: tuple[int, int] = (0, 0),
    encode: str = "webp_q85",
) -> bytes:
    """Downscale to the rendered CSS box (area averaging, never upscale)
    and encode. rendered_dims (0, 0) keeps native dimensions."""
    w, h = rendered_dims
    im = raster.to_image()
    if w > 0 and h > 0 and (w < raster.width or h < raster.height):
        im = im.resize((min(w, raster.width), min(h, raster.height)), Image.BOX)
    buf = io.BytesIO()
    try:
        if encode == "png":
            im.save(buf, format="PNG")
        elif encode == "jpeg_q85":
            im.convert("RGB").save(buf, format="JPEG", quality=85)
        elif encode == "webp_q85":
            im.save(buf, format="WEBP", quality=85)
        else:
            raise EncodeError(f"unknown encoding {encode}")
    except EncodeError:
        raise
    except Exception as exc:
        raise EncodeError(str(exc)) from exc
    return buf.getvalue()
