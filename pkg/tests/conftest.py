from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import pytest
from PIL import Image

from weblite.codec_meta import ImageMeta, parse_meta

from imagegen import encode, make_image
from servers import FixtureOrigin, MockCdn


@dataclass
class Fixture:
    name: str
    kind: str
    data: bytes
    meta: ImageMeta
    oversized_header: bool = False

    @property
    def size(self) -> int:
        return len(self.data)


def _pad_jpeg_header(data: bytes, pad_bytes: int) -> bytes:
    """Insert a large APP1 segment after SOI so the header spans several probes."""
    app1 = b"\xff\xe1" + struct.pack(">H", pad_bytes + 2) + b"\x00" * pad_bytes
    return data[:2] + app1 + data[2:]


def _build_corpus() -> list[Fixture]:
    specs = [
        # name, kind, (w, h), seed, busy
        ("jb_small", "jpeg_baseline", (180, 140), 10, 0.4),
        ("jb_med", "jpeg_baseline", (480, 360), 11, 0.6),
        ("jb_large", "jpeg_baseline", (1000, 750), 12, 0.9),
        ("jp_small", "jpeg_progressive", (180, 140), 13, 0.4),
        ("jp_med", "jpeg_progressive", (480, 360), 14, 0.6),
        ("jp_large", "jpeg_progressive", (1000, 750), 15, 0.9),
        ("png_small", "png", (160, 120), 16, 0.5),
        ("png_med", "png", (400, 300), 17, 0.7),
        ("png_large", "png", (950, 750), 18, 1.0),
        ("gif_a", "gif", (220, 160), 19, 0.5),
        ("gif_b", "gif", (350, 260), 20, 0.6),
        ("gifi_a", "gif_interlaced", (220, 160), 21, 0.5),
        ("gifi_b", "gif_interlaced", (350, 260), 22, 0.6),
        ("webp_small", "webp", (200, 150), 23, 0.6),
        ("webp_med", "webp", (500, 380), 24, 0.8),
        ("webp_large", "webp", (900, 700), 25, 1.0),
        ("bmp_a", "bmp", (200, 150), 26, 0.5),
        ("tiff_a", "tiff", (200, 150), 27, 0.5),
        ("jb_extra", "jpeg_baseline", (640, 480), 28, 0.8),
        ("jp_extra", "jpeg_progressive", (640, 480), 29, 0.8),
        ("png_extra", "png", (640, 480), 30, 0.8),
    ]
    fixtures = []
    for name, kind, (w, h), seed, busy in specs:
        data = encode(make_image(w, h, seed, busy), kind)
        meta = parse_meta(data)
        assert isinstance(meta, ImageMeta)
        fixtures.append(Fixture(name, kind, data, meta))
    big = _pad_jpeg_header(encode(make_image(420, 320, 31, 0.6), "jpeg_baseline"), 5000)
    meta = parse_meta(big)
    fixtures.append(Fixture("jb_bigheader", "jpeg_baseline", big, meta, oversized_header=True))
    return fixtures


@pytest.fixture(scope="session")
def corpus() -> list[Fixture]:
    return _build_corpus()


@pytest.fixture(scope="session")
def corpus_by_name(corpus) -> dict[str, Fixture]:
    return {f.name: f for f in corpus}


@pytest.fixture(scope="session")
def budget_corpus(corpus) -> list[Fixture]:
    """Fixtures big enough (>= 10 KB) that the probe never covers the budget."""
    sel = [f for f in corpus if f.size >= 10240 and not f.oversized_header]
    assert len(sel) >= 20
    return sel


@pytest.fixture(scope="session")
def origin(corpus):
    srv = FixtureOrigin({f.name: f.data for f in corpus})
    yield srv
    srv.close()


@pytest.fixture(scope="session")
def norange_origin(corpus):
    srv = FixtureOrigin({f.name: f.data for f in corpus}, support_ranges=False)
    yield srv
    srv.close()


@pytest.fixture(scope="session")
def cdn():
    bases = {
        "hero": encode(make_image(400, 300, 40, 0.6), "jpeg_baseline"),
        "banner": encode(make_image(800, 200, 41, 0.7), "png"),
    }
    srv = MockCdn(bases)
    yield srv
    srv.close()


@pytest.fixture(scope="session")
def tiny_image() -> bytes:
    data = encode(make_image(24, 18, 42, 0.1), "jpeg_baseline")
    assert len(data) < 2048
    return data


def decode_image(data: bytes) -> Image.Image:
    return Image.open(io.BytesIO(data))
