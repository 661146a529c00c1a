"""Range-request fetch engine.

Probe the first bytes of an image with a Range request, learn the total
size from Content-Range, pick a per-image byte budget by progressiveness,
then issue one more range to top the payload up to the budget. Servers
without range support fall back to a single full-body download; an
in-memory cache model avoids refetching bytes already held.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import requests

from .codec_meta import ImageMeta, NeedMoreBytes, parse_meta
from .errors import (
    CorruptHeader,
    HeaderTooLarge,
    HttpStatus,
    MalformedContentRange,
    NetworkError,
)

DEFAULT_TIMEOUT = 30.0


@dataclass
class FetchBudget:
    baseline_fraction: float = 0.5
    progressive_fraction: float = 0.15
    probe_bytes: int = 2048
    header_extension_cap: int = 16384

    def __post_init__(self):
        if not (0 < self.baseline_fraction <= 1 and 0 < self.progressive_fraction <= 1):
            raise ValueError("fractions must be in (0, 1]")
        if self.probe_bytes < 512:
            raise ValueError("probe_bytes must be >= 512")

    def fraction_for(self, meta: ImageMeta) -> float:
        return self.progressive_fraction if meta.progressive else self.baseline_fraction


@dataclass
class FetchOutcome:
    mode: str  # ranged | full_fallback_200 | full_small | cache_hit | error
    total_bytes: int
    fetched_bytes: int
    payload: bytes
    meta: ImageMeta | None
    request_log: list[tuple[str, int]] = field(default_factory=list)
    network_bytes: int = 0  # bytes actually pulled over the wire (< fetched when cached)


@dataclass
class ProbeResult:
    status: int
    total: int | None  # None: server ignored Range (200 reply)
    prefix: bytes
    headers: dict[str, str]


class CacheState:
    """Disjoint sorted byte intervals [lo, hi) held for one URL."""

    def __init__(self, pieces: list[tuple[int, int]] | None = None):
        self.pieces: list[tuple[int, int]] = []
        for lo, hi in pieces or []:
            self.add((lo, hi))

    def add(self, interval: tuple[int, int]) -> None:
        lo, hi = interval
        if hi <= lo:
            return
        merged = []
        for a, b in self.pieces:
            if b < lo or a > hi:  # disjoint, not even adjacent
                merged.append((a, b))
            else:
                lo, hi = min(lo, a), max(hi, b)
        merged.append((lo, hi))
        self.pieces = sorted(merged)

    def covers(self, interval: tuple[int, int]) -> bool:
        return not plan_cached_range(self, interval)


def plan_cached_range(cache: CacheState, want: tuple[int, int]) -> list[tuple[int, int]]:
    """Intervals of `want` that must still go over the network: want minus cache."""
    lo, hi = want
    if hi <= lo:
        raise ValueError("want interval is empty")
    missing = []
    cursor = lo
    for a, b in cache.pieces:
        if b <= cursor:
            continue
        if a >= hi:
            break
        if a > cursor:
            missing.append((cursor, min(a, hi)))
        cursor = max(cursor, b)
        if cursor >= hi:
            break
    if cursor < hi:
        missing.append((cursor, hi))
    return missing


class RangeCache:
    """Per-URL byte cache under one top-level site key (double-keyed model)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], dict] = {}

    def entry(self, key: str, url: str) -> dict:
        with self._lock:
            return self._entries.setdefault((key, url), {
                "state": CacheState(), "chunks": {}, "total": None,
            })

    def store(self, key: str, url: str, offset: int, data: bytes, total: int | None) -> None:
        e = self.entry(key, url)
        with self._lock:
            e["chunks"][offset] = data
            e["state"].add((offset, offset + len(data)))
            if total is not None:
                e["total"] = total

    def read(self, key: str, url: str, lo: int, hi: int) -> bytes:
        """Assemble [lo, hi) from stored chunks; caller guarantees coverage."""
        e = self.entry(key, url)
        out = bytearray(hi - lo)
        with self._lock:
            for off, data in e["chunks"].items():
                a, b = max(lo, off), min(hi, off + len(data))
                if a < b:
                    out[a - lo:b - lo] = data[a - off:b - off]
        return bytes(out)


def parse_content_range(value: str) -> tuple[int, int, int]:
    """'bytes lo-hi/total' -> (lo, hi, total); '*' totals are unusable."""
    try:
        unit, rest = value.split(" ", 1)
        span, total_s = rest.split("/", 1)
        lo_s, hi_s = span.split("-", 1)
    except ValueError as exc:
        raise MalformedContentRange(value) from exc
    if unit != "bytes" or total_s.strip() == "*":
        raise MalformedContentRange(value)
    try:
        lo, hi, total = int(lo_s), int(hi_s), int(total_s)
    except ValueError as exc:
        raise MalformedContentRange(value) from exc
    if lo > hi or hi >= total:
        raise MalformedContentRange(value)
    return lo, hi, total


def probe(
    url: str,
    probe_bytes: int = 2048,
    session: requests.Session | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> ProbeResult:
    """Request the first `probe_bytes` of `url` with a Range header.

    A 200 reply means no range support; its body is consumed here in full so
    the caller never pays for a second connection.
    """
    sess = session or requests.Session()
    try:
        resp = sess.get(
            url,
            headers={"Range": f"bytes=0-{probe_bytes - 1}"},
            timeout=timeout,
        )
    except requests.RequestException as exc:
        raise NetworkError(f"{url}: {exc}") from exc
    headers = {k.lower(): v for k, v in resp.headers.items()}
    if resp.status_code == 404:
        raise HttpStatus(404, url)
    if resp.status_code == 200:
        return ProbeResult(200, None, resp.content, headers)
    if resp.status_code == 206:
        lo, hi, total = parse_content_range(headers.get("content-range", ""))
        if lo != 0:
            raise MalformedContentRange(headers.get("content-range", ""))
        return ProbeResult(206, total, resp.content, headers)
    raise HttpStatus(resp.status_code, url)


def plan_second_range(total: int, fraction: float, already: int) -> tuple[int, int] | None:
    """Byte interval [lo, hi] for the budget top-up request, or None.

    None means either nothing more is wanted (total <= already) or the budget
    covers the whole object, in which case the caller decides to fetch the
    rest outright.
    """
    if total <= 0:
        raise ValueError("total must be positive")
    target = max(already, math.ceil(fraction * total))
    if total <= already or target >= total or target <= already:
        return None
    return (already, target - 1)


def _range_get(
    sess: requests.Session,
    url: str,
    lo: int,
    hi: int,
    validator: str | None,
    log: list,
    timeout: float,
) -> tuple[bytes, bool]:
    """GET bytes=lo-hi. Returns (body, was_full_200)."""
    headers = {"Range": f"bytes={lo}-{hi}"}
    if validator:
        headers["If-Range"] = validator
    try:
        resp = sess.get(url, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise NetworkError(f"{url}: {exc}") from exc
    log.append((f"bytes={lo}-{hi}", resp.status_code))
    if resp.status_code == 206:
        return resp.content, False
    if resp.status_code == 200:
        return resp.content, True
    raise HttpStatus(resp.status_code, url)


def fetch_with_budget(
    url: str,
    budget: FetchBudget | None = None,
    rendered_dims: tuple[int, int] | None = None,
    session: requests.Session | None = None,
    cache: RangeCache | None = None,
    cache_key: str = "",
    timeout: float = DEFAULT_TIMEOUT,
    preprobe: ProbeResult | None = None,
) -> FetchOutcome:
    """Full protocol: probe, parse header (extending as needed), budget, top up.

    The returned payload is always a byte prefix of the origin resource.
    `rendered_dims` is accepted for interface symmetry with the gateway; the
    fraction choice depends only on progressiveness. A caller that already
    probed the URL (e.g. rewrite validation) passes the result as `preprobe`
    so those bytes are not fetched twice.
    """
    budget = budget or FetchBudget()
    sess = session or requests.Session()
    log: list[tuple[str, int]] = []
    network = 0

    centry = cache.entry(cache_key, url) if cache else None
    known_total = centry["total"] if centry else None

    # --- probe / prefix assembly
    if centry and known_total is not None and centry["state"].covers(
            (0, min(budget.probe_bytes, known_total))):
        total = known_total
        prefix = cache.read(cache_key, url, 0, min(budget.probe_bytes, total))
        validator = None
    else:
        pr = preprobe or probe(url, budget.probe_bytes, sess, timeout)
        log.append((f"bytes=0-{budget.probe_bytes - 1}", pr.status))
        network += len(pr.prefix)
        validator = pr.headers.get("etag") or pr.headers.get("last-modified")
        if pr.total is None:  # 200: range unsupported, body fully consumed already
            meta = _best_effort_meta(pr.prefix)
            if cache:
                cache.store(cache_key, url, 0, pr.prefix, len(pr.prefix))
            return FetchOutcome(
                mode="full_fallback_200",
                total_bytes=len(pr.prefix),
                fetched_bytes=len(pr.prefix),
                payload=pr.prefix,
                meta=meta,
                request_log=log,
                network_bytes=network,
            )
        total = pr.total
        prefix = pr.prefix
        if cache:
            cache.store(cache_key, url, 0, prefix, total)

    # --- header extension loop
    while True:
        parsed = parse_meta(prefix)
        if isinstance(parsed, ImageMeta):
            meta = parsed
            break
        have = len(prefix)
        if have >= total:
            raise CorruptHeader(f"{url}: whole object consumed without a parseable header")
        if have + budget.probe_bytes > budget.header_extension_cap:
            raise HeaderTooLarge(f"{url}: header exceeds {budget.header_extension_cap} bytes")
        hi = min(have + budget.probe_bytes, total) - 1
        body, was_200 = _range_get(sess, url, have, hi, validator, log, timeout)
        network += len(body)
        if was_200:
            return _full_from_200(body, log, network, cache, cache_key, url)
        if cache:
            cache.store(cache_key, url, have, body, total)
        prefix = prefix + body

    already = len(prefix)
    if total <= already:
        return FetchOutcome(
            mode="full_small", total_bytes=total, fetched_bytes=total,
            payload=prefix[:total], meta=meta, request_log=log, network_bytes=network,
        )

    fraction = budget.fraction_for(meta)
    plan = plan_second_range(total, fraction, already)
    if plan is None:
        # budget covers the whole object: fetch the rest
        lo, hi = already, total - 1
        full = True
    else:
        lo, hi = plan
        full = False

    # honor the cache: only fetch sub-intervals not already held
    want = (lo, hi + 1)
    needed = plan_cached_range(centry["state"], want) if centry else [want]
    pieces: dict[int, bytes] = {}
    for a, b in needed:
        body, was_200 = _range_get(sess, url, a, b - 1, validator, log, timeout)
        network += len(body)
        if was_200:
            return _full_from_200(body, log, network, cache, cache_key, url)
        pieces[a] = body
        if cache:
            cache.store(cache_key, url, a, body, total)
    if cache:
        payload = cache.read(cache_key, url, 0, hi + 1)
    else:
        buf = bytearray(hi + 1)
        buf[:len(prefix)] = prefix
        for a, body in pieces.items():
            buf[a:a + len(body)] = body
        payload = bytes(buf)

    fetched = len(payload)
    mode = "cache_hit" if network == 0 else ("full_small" if fetched >= total else "ranged")
    return FetchOutcome(
        mode=mode, total_bytes=total, fetched_bytes=fetched,
        payload=payload, meta=meta, request_log=log, network_bytes=network,
    )


def _full_from_200(body, log, network, cache, cache_key, url):
    meta = _best_effort_meta(body)
    if cache:
        cache.store(cache_key, url, 0, body, len(body))
    return FetchOutcome(
        mode="full_fallback_200", total_bytes=len(body), fetched_bytes=len(body),
        payload=body, meta=meta, request_log=log, network_bytes=network,
    )


def _best_effort_meta(body: bytes) -> ImageMeta | None:
    try:
        parsed = parse_meta(body)
    except Exception:
        return None
    return parsed if isinstance(parsed, ImageMeta) else None
