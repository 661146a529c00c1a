"""Deterministic fixture image generation."""

from __future__ import annotations

import io
import zlib

import numpy as np
from PIL import Image


def make_array(width: int, height: int, seed: int, busy: float = 0.5) -> np.ndarray:
    """Smooth pseudo-random RGB field; `busy` raises high-frequency content
    (and therefore encoded size)."""
    rng = np.random.default_rng(seed)
    coarse = rng.integers(0, 256, size=(max(2, height // 16), max(2, width // 16), 3),
                          dtype=np.uint8)
    im = Image.fromarray(coarse, "RGB").resize((width, height), Image.BILINEAR)
    base = np.asarray(im, dtype=np.float64)
    noise = rng.normal(0, 255 * busy * 0.3, size=base.shape)
    yy = np.linspace(0, 80, height)[:, None, None]
    return np.clip(base + noise + yy, 0, 255).astype(np.uint8)


def make_image(width: int, height: int, seed: int, busy: float = 0.5) -> Image.Image:
    return Image.fromarray(make_array(width, height, seed, busy), "RGB")


def encode(im: Image.Image, kind: str) -> bytes:
    buf = io.BytesIO()
    if kind == "jpeg_baseline":
        im.save(buf, format="JPEG", quality=90, progressive=False, subsampling=2)
    elif kind == "jpeg_progressive":
        im.save(buf, format="JPEG", quality=90, progressive=True)
    elif kind == "png":
        im.save(buf, format="PNG")
    elif kind == "gif":
        im.convert("P", palette=Image.ADAPTIVE).save(buf, format="GIF", interlace=False)
    elif kind == "gif_interlaced":
        im.convert("P", palette=Image.ADAPTIVE).save(buf, format="GIF", interlace=True)
    elif kind == "webp":
        im.save(buf, format="WEBP", quality=90)
    elif kind == "bmp":
        im.save(buf, format="BMP")
    elif kind == "tiff":
        im.save(buf, format="TIFF")  # uncompressed strips
    else:
        raise ValueError(kind)
    return buf.getvalue()


def make_interlaced_png_header(im: Image.Image) -> bytes:
    """Valid-header PNG with the Adam7 flag set (body not decodable;
    header-parsing fixtures only)."""
    data = bytearray(encode(im, "png"))
    data[28] = 1
    crc = zlib.crc32(bytes(data[12:29])) & 0xFFFFFFFF
    data[29:33] = crc.to_bytes(4, "big")
    return bytes(data)


def make_interlaced_gif_header(im: Image.Image) -> bytes:
    """GIF bytes with the first image descriptor's interlace bit set."""
    data = bytearray(encode(im, "gif"))
    pos = 13
    packed = data[10]
    if packed & 0x80:
        pos += 3 * (2 << (packed & 0x07))
    while data[pos] != 0x2C:
        assert data[pos] == 0x21
        pos += 2
        while True:
            size = data[pos]
            pos += 1 + size
            if size == 0:
                break
    data[pos + 9] |= 0x40
    return bytes(data)
