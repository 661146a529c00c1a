"""Baseline JPEG entropy-scan accounting.

Counts how many complete MCUs can be Huffman-decoded from a (possibly
truncated) baseline JPEG byte stream. No IDCT is performed; we only walk
the entropy-coded data, which is enough to know how many pixel rows a
decoder could fully reconstruct from the payload.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CorruptHeader

_SOF_BASELINE = {0xC0, 0xC1, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}
_STANDALONE = {0xD8, 0x01} | set(range(0xD0, 0xD8))


class _BitsExhausted(Exception):
    pass


def _build_lut(counts: bytes, symbols: bytes) -> list:
    """16-bit-window lookup table: index by the next 16 bits, get (symbol, length)."""
    lut: list = [None] * 65536
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(counts[length - 1]):
            lo = code << (16 - length)
            hi = (code + 1) << (16 - length)
            entry = (symbols[k], length)
            for i in range(lo, hi):
                lut[i] = entry
            code += 1
            k += 1
        code <<= 1
    return lut


@dataclass
class _Component:
    h: int
    v: int
    dc_table: int = 0
    ac_table: int = 0


class ScanInfo:
    """Frame/scan parameters pulled from the marker stream."""

    def __init__(self) -> None:
        self.width = 0
        self.height = 0
        self.components: list[_Component] = []
        self.scan_order: list[int] = []
        self.huff_dc: dict[int, list] = {}
        self.huff_ac: dict[int, list] = {}
        self.restart_interval = 0
        self.entropy_start = -1

    @property
    def hmax(self) -> int:
        return max(c.h for c in self.components)

    @property
    def vmax(self) -> int:
        return max(c.v for c in self.components)

    @property
    def mcu_width(self) -> int:
        return 8 * self.hmax

    @property
    def mcu_height(self) -> int:
        return 8 * self.vmax

    @property
    def mcus_per_row(self) -> int:
        return (self.width + self.mcu_width - 1) // self.mcu_width


def parse_scan_header(data: bytes) -> ScanInfo | None:
    """Walk markers up to SOS. Returns None when the prefix ends first."""
    info = ScanInfo()
    comp_by_id: dict[int, _Component] = {}
    pos = 2  # past SOI
    n = len(data)
    while True:
        if pos + 4 > n:
            return None
        if data[pos] != 0xFF:
            raise CorruptHeader("marker expected in JPEG stream")
        marker = data[pos + 1]
        if marker in _STANDALONE:
            pos += 2
            continue
        seglen = int.from_bytes(data[pos + 2:pos + 4], "big")
        if seglen < 2:
            raise CorruptHeader("bad JPEG segment length")
        seg = data[pos + 4:pos + 2 + seglen]
        if len(seg) < seglen - 2:
            return None
        if marker in _SOF_BASELINE:
            if marker != 0xC0 and marker != 0xC1:
                raise CorruptHeader("entropy accounting supports baseline Huffman frames only")
            info.height = int.from_bytes(seg[1:3], "big")
            info.width = int.from_bytes(seg[3:5], "big")
            ncomp = seg[5]
            for i in range(ncomp):
                cid, hv = seg[6 + 3 * i], seg[7 + 3 * i]
                comp = _Component(h=hv >> 4, v=hv & 0x0F)
                comp_by_id[cid] = comp
                info.components.append(comp)
        elif marker == 0xC4:  # DHT, possibly several tables per segment
            off = 0
            while off < len(seg):
                tc_th = seg[off]
                counts = seg[off + 1:off + 17]
                nsym = sum(counts)
                symbols = seg[off + 17:off + 17 + nsym]
                lut = _build_lut(counts, symbols)
                if tc_th >> 4 == 0:
                    info.huff_dc[tc_th & 0x0F] = lut
                else:
                    info.huff_ac[tc_th & 0x0F] = lut
                off += 17 + nsym
        elif marker == 0xDD:  # DRI
            info.restart_interval = int.from_bytes(seg[0:2], "big")
        elif marker == 0xDA:  # SOS
            ns = seg[0]
            for i in range(ns):
                cid = seg[1 + 2 * i]
                tables = seg[2 + 2 * i]
                comp = comp_by_id.get(cid)
                if comp is None:
                    raise CorruptHeader("scan references unknown component")
                comp.dc_table = tables >> 4
                comp.ac_table = tables & 0x0F
                info.scan_order.append(info.components.index(comp))
            info.entropy_start = pos + 2 + seglen
            return info
        pos += 2 + seglen


def _entropy_segments(data: bytes, start: int) -> list[bytes]:
    """Destuff the entropy stream, splitting at restart markers."""
    segments: list[bytearray] = [bytearray()]
    pos = start
    n = len(data)
    while pos < n:
        b = data[pos]
        if b != 0xFF:
            segments[-1].append(b)
            pos += 1
            continue
        if pos + 1 >= n:
            break  # trailing half marker: unusable
        nxt = data[pos + 1]
        if nxt == 0x00:
            segments[-1].append(0xFF)
            pos += 2
        elif 0xD0 <= nxt <= 0xD7:
            segments.append(bytearray())
            pos += 2
        else:
            break  # EOI or any other marker ends the scan
    return [bytes(s) for s in segments]


def count_complete_mcus(data: bytes, info: ScanInfo) -> int:
    mcu_plan = []
    for ci in info.scan_order:
        comp = info.components[ci]
        blocks = comp.h * comp.v if len(info.scan_order) > 1 else 1
        dc = info.huff_dc.get(comp.dc_table)
        ac = info.huff_ac.get(comp.ac_table)
        if dc is None or ac is None:
            raise CorruptHeader("missing Huffman table for scan")
        mcu_plan.append((blocks, dc, ac))

    total = 0
    for seg in _entropy_segments(data, info.entropy_start):
        total += _count_in_segment(seg, mcu_plan)
    return total


def _count_in_segment(seg: bytes, mcu_plan: list) -> int:
    limit = len(seg) * 8
    padded = seg + b"\xff\xff\xff\xff"
    bitpos = 0
    complete = 0
    try:
        while bitpos < limit:
            end = _decode_mcu(padded, bitpos, mcu_plan)
            if end > limit:
                break
            bitpos = end
            complete += 1
    except _BitsExhausted:
        pass
    return complete


def _decode_mcu(data: bytes, bitpos: int, mcu_plan: list) -> int:
    for blocks, dc_lut, ac_lut in mcu_plan:
        for _ in range(blocks):
            bitpos = _decode_block(data, bitpos, dc_lut, ac_lut)
    return bitpos


def _decode_block(data: bytes, bitpos: int, dc_lut: list, ac_lut: list) -> int:
    byte = bitpos >> 3
    window = ((int.from_bytes(data[byte:byte + 4], "big") << (bitpos & 7)) >> 16) & 0xFFFF
    entry = dc_lut[window]
    if entry is None:
        raise _BitsExhausted
    s, length = entry
    bitpos += length + s
    k = 1
    while k <= 63:
        byte = bitpos >> 3
        window = ((int.from_bytes(data[byte:byte + 4], "big") << (bitpos & 7)) >> 16) & 0xFFFF
        entry = ac_lut[window]
        if entry is None:
            raise _BitsExhausted
        rs, length = entry
        bitpos += length
        s = rs & 0x0F
        if s == 0:
            if rs != 0xF0:
                break  # EOB
            k += 16
        else:
            k += (rs >> 4) + 1
            bitpos += s
    return bitpos
