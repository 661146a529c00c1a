"""Image header inspection from byte prefixes.

Everything here works on the first bytes of an image response: format
sniffing, dimension/progressiveness extraction, and accounting of how many
pixel rows a truncated payload can fully reconstruct.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

from . import _jpegscan
from .errors import CorruptHeader, CorruptPayload, NotBaseline

FORMATS = ("jpeg", "png", "gif", "webp", "bmp", "tiff", "unknown")

_PROGRESSIVE_CAPABLE = {"jpeg", "png", "gif"}


@dataclass(frozen=True)
class ImageMeta:
    format: str
    width: int = 0
    height: int = 0
    progressive: bool = False
    header_complete: bool = False
    header_bytes: int = 0

    def __post_init__(self):
        if self.header_complete and (self.width <= 0 or self.height <= 0):
            raise ValueError("complete header implies positive dimensions")
        if self.progressive and self.format not in _PROGRESSIVE_CAPABLE:
            raise ValueError(f"{self.format} cannot be progressive")


@dataclass(frozen=True)
class NeedMoreBytes:
    """Prefix ended before the header could be parsed; fetch at least n more."""

    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("NeedMoreBytes requires a positive count")


def sniff_format(prefix: bytes) -> str:
    if prefix[:3] == b"\xff\xd8\xff":
        return "jpeg"
    if prefix[:8] == b"\x89PNG\r\n\x1a\n":
        return "png"
    if prefix[:6] in (b"GIF87a", b"GIF89a"):
        return "gif"
    if prefix[:4] == b"RIFF" and prefix[8:12] == b"WEBP":
        return "webp"
    if prefix[:2] == b"BM":
        return "bmp"
    if prefix[:4] in (b"II*\x00", b"MM\x00*"):
        return "tiff"
    return "unknown"


def parse_meta(prefix: bytes) -> ImageMeta | NeedMoreBytes:
    fmt = sniff_format(prefix)
    if fmt == "unknown":
        if len(prefix) < 12:
            return NeedMoreBytes(12 - len(prefix))
        raise CorruptHeader("unrecognized image signature")
    parser = {
        "jpeg": _parse_jpeg,
        "png": _parse_png,
        "gif": _parse_gif,
        "webp": _parse_webp,
        "bmp": _parse_bmp,
        "tiff": _parse_tiff,
    }[fmt]
    return parser(prefix)


def _parse_jpeg(data: bytes) -> ImageMeta | NeedMoreBytes:
    pos = 2
    n = len(data)
    standalone = {0xD8, 0x01} | set(range(0xD0, 0xD8))
    sof_markers = {0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}
    while True:
        if pos + 4 > n:
            return NeedMoreBytes(pos + 4 - n)
        if data[pos] != 0xFF:
            raise CorruptHeader("expected JPEG marker")
        marker = data[pos + 1]
        if marker in standalone:
            pos += 2
            continue
        seglen = int.from_bytes(data[pos + 2:pos + 4], "big")
        if seglen < 2:
            raise CorruptHeader("bad segment length")
        if marker in sof_markers:
            if pos + 2 + seglen > n:
                return NeedMoreBytes(pos + 2 + seglen - n)
            seg = data[pos + 4:pos + 2 + seglen]
            if len(seg) < 5:
                raise CorruptHeader("short SOF segment")
            height = int.from_bytes(seg[1:3], "big")
            width = int.from_bytes(seg[3:5], "big")
            if width == 0 or height == 0:
                raise CorruptHeader("zero dimension in SOF")
            return ImageMeta(
                format="jpeg",
                width=width,
                height=height,
                progressive=(marker == 0xC2),
                header_complete=True,
                header_bytes=pos + 2 + seglen,
            )
        if marker == 0xD9:  # EOI before any SOF
            raise CorruptHeader("no frame header in JPEG stream")
        pos += 2 + seglen


def _parse_png(data: bytes) -> ImageMeta | NeedMoreBytes:
    if len(data) < 33:
        return NeedMoreBytes(33 - len(data))
    if data[12:16] != b"IHDR":
        raise CorruptHeader("IHDR not first chunk")
    width = int.from_bytes(data[16:20], "big")
    height = int.from_bytes(data[20:24], "big")
    interlace = data[28]
    if width == 0 or height == 0:
        raise CorruptHeader("zero dimension in IHDR")
    if interlace not in (0, 1):
        raise CorruptHeader("invalid interlace method")
    return ImageMeta(
        format="png",
        width=width,
        height=height,
        progressive=(interlace == 1),
        header_complete=True,
        header_bytes=33,
    )


def _parse_gif(data: bytes) -> ImageMeta | NeedMoreBytes:
    if len(data) < 13:
        return NeedMoreBytes(13 - len(data))
    width = int.from_bytes(data[6:8], "little")
    height = int.from_bytes(data[8:10], "little")
    if width == 0 or height == 0:
        raise CorruptHeader("zero dimension in screen descriptor")
    desc = _gif_first_image_descriptor(data)
    if isinstance(desc, NeedMoreBytes):
        return desc
    pos, _w, _h, packed = desc
    return ImageMeta(
        format="gif",
        width=width,
        height=height,
        progressive=bool(packed & 0x40),
        header_complete=True,
        header_bytes=pos + 10,
    )


def _gif_first_image_descriptor(data: bytes):
    """Returns (descriptor_offset, img_w, img_h, packed) or NeedMoreBytes."""
    n = len(data)
    packed = data[10]
    pos = 13
    if packed & 0x80:
        pos += 3 * (2 << (packed & 0x07))
    while True:
        if pos >= n:
            return NeedMoreBytes(pos - n + 10)
        b = data[pos]
        if b == 0x2C:
            if pos + 10 > n:
                return NeedMoreBytes(pos + 10 - n)
            w = int.from_bytes(data[pos + 5:pos + 7], "little")
            h = int.from_bytes(data[pos + 7:pos + 9], "little")
            return pos, w, h, data[pos + 9]
        if b == 0x21:  # extension: label then sub-blocks
            pos += 2
            while True:
                if pos >= n:
                    return NeedMoreBytes(pos - n + 1)
                size = data[pos]
                pos += 1 + size
                if size == 0:
                    break
        elif b == 0x3B:
            raise CorruptHeader("GIF trailer before any image")
        else:
            raise CorruptHeader("unexpected GIF block")


def _parse_webp(data: bytes) -> ImageMeta | NeedMoreBytes:
    if len(data) < 30:
        return NeedMoreBytes(30 - len(data))
    fourcc = data[12:16]
    payload = data[20:]
    if fourcc == b"VP8 ":
        if payload[3:6] != b"\x9d\x01\x2a":
            raise CorruptHeader("bad VP8 start code")
        width = int.from_bytes(payload[6:8], "little") & 0x3FFF
        height = int.from_bytes(payload[8:10], "little") & 0x3FFF
    elif fourcc == b"VP8L":
        if payload[0] != 0x2F:
            raise CorruptHeader("bad VP8L signature")
        bits = int.from_bytes(payload[1:5], "little")
        width = (bits & 0x3FFF) + 1
        height = ((bits >> 14) & 0x3FFF) + 1
    elif fourcc == b"VP8X":
        width = int.from_bytes(payload[4:7], "little") + 1
        height = int.from_bytes(payload[7:10], "little") + 1
    else:
        raise CorruptHeader("unknown WebP chunk")
    if width == 0 or height == 0:
        raise CorruptHeader("zero dimension in WebP header")
    return ImageMeta(
        format="webp", width=width, height=height,
        progressive=False, header_complete=True, header_bytes=30,
    )


def _parse_bmp(data: bytes) -> ImageMeta | NeedMoreBytes:
    if len(data) < 30:
        return NeedMoreBytes(30 - len(data))
    dib = int.from_bytes(data[14:18], "little")
    if dib >= 40:
        width = int.from_bytes(data[18:22], "little", signed=True)
        height = abs(int.from_bytes(data[22:26], "little", signed=True))
    elif dib == 12:
        width = int.from_bytes(data[18:20], "little")
        height = int.from_bytes(data[20:22], "little")
    else:
        raise CorruptHeader("unknown BMP header size")
    if width <= 0 or height <= 0:
        raise CorruptHeader("bad BMP dimensions")
    return ImageMeta(
        format="bmp", width=width, height=height,
        progressive=False, header_complete=True, header_bytes=30,
    )


def _parse_tiff(data: bytes) -> ImageMeta | NeedMoreBytes:
    order = "little" if data[:2] == b"II" else "big"
    if len(data) < 8:
        return NeedMoreBytes(8 - len(data))
    ifd = int.from_bytes(data[4:8], order)
    if len(data) < ifd + 2:
        return NeedMoreBytes(ifd + 2 - len(data))
    count = int.from_bytes(data[ifd:ifd + 2], order)
    end = ifd + 2 + 12 * count
    if len(data) < end:
        return NeedMoreBytes(end - len(data))
    width = height = 0
    for i in range(count):
        off = ifd + 2 + 12 * i
        tag = int.from_bytes(data[off:off + 2], order)
        typ = int.from_bytes(data[off + 2:off + 4], order)
        value = int.from_bytes(data[off + 8:off + 10] if typ == 3 else data[off + 8:off + 12], order)
        if tag == 256:
            width = value
        elif tag == 257:
            height = value
    if width == 0 or height == 0:
        raise CorruptHeader("TIFF IFD lacks dimensions")
    return ImageMeta(
        format="tiff", width=width, height=height,
        progressive=False, header_complete=True, header_bytes=end,
    )


def complete_rows(meta: ImageMeta, payload: bytes) -> int:
    """Topmost fully reconstructable pixel rows in a truncated baseline payload."""
    if meta.progressive:
        raise NotBaseline("row accounting is defined for baseline images only")
    if meta.format not in ("jpeg", "png", "gif", "bmp", "webp", "tiff"):
        raise CorruptPayload(f"unsupported format {meta.format}")
    if sniff_format(payload) != meta.format:
        raise CorruptPayload("payload does not match declared format")
    counter = {
        "jpeg": _rows_jpeg,
        "png": _rows_png,
        "gif": _rows_gif,
        "bmp": _rows_bmp,
        "webp": _rows_webp,
        "tiff": _rows_tiff,
    }[meta.format]
    return max(0, min(meta.height, counter(meta, payload)))


def _rows_jpeg(meta: ImageMeta, payload: bytes) -> int:
    info = _jpegscan.parse_scan_header(payload)
    if info is None:
        return 0
    mcus = _jpegscan.count_complete_mcus(payload, info)
    per_row = info.mcus_per_row
    mcu_rows_total = (info.height + info.mcu_height - 1) // info.mcu_height
    if mcus >= per_row * mcu_rows_total:
        return info.height
    return (mcus // per_row) * info.mcu_height


_PNG_CHANNELS = {0: 1, 2: 3, 3: 1, 4: 2, 6: 4}


def _rows_png(meta: ImageMeta, payload: bytes) -> int:
    # IHDR bit depth / color type live at fixed offsets past the signature
    bitdepth, colortype = payload[24], payload[25]
    channels = _PNG_CHANNELS.get(colortype)
    if channels is None:
        raise CorruptPayload("bad PNG color type")
    stride = 1 + (meta.width * bitdepth * channels + 7) // 8
    stream = bytearray()
    pos = 8
    n = len(payload)
    while pos + 8 <= n:
        length = int.from_bytes(payload[pos:pos + 4], "big")
        ctype = payload[pos + 4:pos + 8]
        if ctype == b"IDAT":
            stream += payload[pos + 8:pos + 8 + length]
        elif ctype == b"IEND":
            break
        pos += 12 + length
    if not stream:
        return 0
    d = zlib.decompressobj()
    try:
        out = d.decompress(bytes(stream))
    except zlib.error:
        return 0
    return len(out) // stride


def _rows_gif(meta: ImageMeta, payload: bytes) -> int:
    desc = _gif_first_image_descriptor(payload)
    if isinstance(desc, NeedMoreBytes):
        return 0
    pos, img_w, img_h, packed = desc
    pos += 10
    if packed & 0x80:  # local color table
        pos += 3 * (2 << (packed & 0x07))
    if pos >= len(payload):
        return 0
    min_code_size = payload[pos]
    pos += 1
    data = bytearray()
    truncated = False
    while True:
        if pos >= len(payload):
            truncated = True
            break
        size = payload[pos]
        pos += 1
        if size == 0:
            break
        if pos + size > len(payload):
            data += payload[pos:]
            truncated = True
            break
        data += payload[pos:pos + size]
        pos += size
    pixels = _lzw_pixel_count(bytes(data), min_code_size, not truncated)
    if not truncated and pixels >= img_w * img_h:
        return meta.height
    return pixels // img_w if img_w else 0


def _lzw_pixel_count(data: bytes, min_code_size: int, complete: bool) -> int:
    """Count emitted pixels without materializing the strings (track lengths only)."""
    clear = 1 << min_code_size
    eoi = clear + 1

    def reset():
        return list(range(clear + 2)), [1] * clear + [0, 0], min_code_size + 1

    codes, lengths, width = reset()
    bitpos = 0
    total_bits = len(data) * 8
    prev = None
    pixels = 0
    while bitpos + width <= total_bits:
        byte = bitpos >> 3
        chunk = int.from_bytes(data[byte:byte + 4], "little")
        code = (chunk >> (bitpos & 7)) & ((1 << width) - 1)
        bitpos += width
        if code == clear:
            codes, lengths, width = reset()
            prev = None
            continue
        if code == eoi:
            break
        if prev is None:
            if code >= len(lengths) or lengths[code] == 0:
                break
            pixels += lengths[code]
            prev = code
            continue
        if code < len(lengths) and lengths[code] > 0:
            new_len = lengths[prev] + 1
            pixels += lengths[code]
        elif code == len(lengths):
            new_len = lengths[prev] + 1
            pixels += new_len
        else:
            break
        lengths.append(new_len)
        if len(lengths) == (1 << width) and width < 12:
            width += 1
        prev = code
    return pixels


def _rows_bmp(meta: ImageMeta, payload: bytes) -> int:
    data_offset = int.from_bytes(payload[10:14], "little")
    dib = int.from_bytes(payload[14:18], "little")
    bpp_off = 28 if dib >= 40 else 24
    bpp = int.from_bytes(payload[bpp_off:bpp_off + 2], "little")
    compression = int.from_bytes(payload[30:34], "little") if dib >= 40 else 0
    if compression not in (0, 3):
        return 0
    stride = ((meta.width * bpp + 31) // 32) * 4
    if stride == 0:
        return 0
    return (len(payload) - data_offset) // stride


def _rows_webp(meta: ImageMeta, payload: bytes) -> int:
    # VP8/VP8L streams are not row-sequential; only a complete file counts
    riff_size = int.from_bytes(payload[4:8], "little")
    return meta.height if len(payload) >= riff_size + 8 else 0


def _rows_tiff(meta: ImageMeta, payload: bytes) -> int:
    order = "little" if payload[:2] == b"II" else "big"
    ifd = int.from_bytes(payload[4:8], order)
    if len(payload) < ifd + 2:
        return 0
    count = int.from_bytes(payload[ifd:ifd + 2], order)
    compression = 1
    bps = 8
    spp = 1
    strip_offset = None
    for i in range(count):
        off = ifd + 2 + 12 * i
        if off + 12 > len(payload):
            return 0
        tag = int.from_bytes(payload[off:off + 2], order)
        typ = int.from_bytes(payload[off + 2:off + 4], order)
        cnt = int.from_bytes(payload[off + 4:off + 8], order)
        value = int.from_bytes(payload[off + 8:off + 10] if typ == 3 else payload[off + 8:off + 12], order)
        if tag == 259:
            compression = value
        elif tag == 258:
            # multi-sample images store an offset here; 8 bits/sample assumed then
            bps = value if (typ == 3 and cnt == 1) else 8
        elif tag == 277:
            spp = value
        elif tag == 273:
            strip_offset = value
    if compression != 1 or strip_offset is None:
        return 0
    stride = (meta.width * bps * spp + 7) // 8
    if stride == 0:
        return 0
    return (len(payload) - strip_offset) // stride
