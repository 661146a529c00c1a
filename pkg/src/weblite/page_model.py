"""Crawled-page data model: manifests, cacheability, warm weight, sprites.

A manifest records the images of one crawled page together with their
rendered CSS geometry and cache-relevant response headers. Manifests load
from either our native JSON schema (version 1) or a HAR 1.2 capture; HARs
carry no CSS geometry, so those entries get zero dimensions and a flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from email.utils import parsedate_to_datetime
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import urlsplit

from .errors import MismatchedSite, MissingGeometry, ParseError, UnsupportedFormat

RANK_BUCKETS = ("top100", "apr50k", "apr100k", "other")
PAGE_KINDS = ("landing", "internal")
DEFAULT_VIEWPORT = (411, 731)

_IMAGE_MIME_PREFIX = "image/"


@dataclass
class ImageEntry:
    url: str
    transfer_bytes: int
    headers: dict[str, str] = field(default_factory=dict)
    css_width: int = 0
    css_height: int = 0
    is_background: bool = False
    crop_rects: list[tuple[int, int, int, int]] = field(default_factory=list)
    native_width: int | None = None
    native_height: int | None = None
    body_ref: str | None = None
    geometry_missing: bool = False

    def __post_init__(self):
        if self.transfer_bytes < 0:
            raise ValueError("transfer_bytes must be >= 0")
        if self.css_width < 0 or self.css_height < 0:
            raise ValueError("css dimensions must be >= 0")
        if self.crop_rects and self.native_width is not None:
            for x, y, w, h in self.crop_rects:
                if x < 0 or y < 0 or x + w > self.native_width or y + h > self.native_height:
                    raise ValueError(f"crop rect {(x, y, w, h)} outside native bounds")


@dataclass
class PageManifest:
    page_url: str
    rank_bucket: str = "other"
    kind: str = "landing"
    parent_landing_url: str | None = None
    entries: list[ImageEntry] = field(default_factory=list)
    total_page_bytes: int = 0
    viewport: tuple[int, int] = DEFAULT_VIEWPORT

    def __post_init__(self):
        if self.rank_bucket not in RANK_BUCKETS:
            raise ValueError(f"bad rank bucket {self.rank_bucket}")
        if self.kind not in PAGE_KINDS:
            raise ValueError(f"bad page kind {self.kind}")
        if self.kind == "internal" and not self.parent_landing_url:
            raise ValueError("internal pages need parent_landing_url")
        image_bytes = sum(e.transfer_bytes for e in self.entries)
        if self.total_page_bytes < image_bytes:
            raise ValueError("total_page_bytes smaller than image bytes")

    @property
    def image_bytes(self) -> int:
        return sum(e.transfer_bytes for e in self.entries)


@dataclass(frozen=True)
class CacheDecision:
    cacheable: bool
    reason: str  # no_store | no_cache | max_age_positive | expires_future | validator_only_heuristic | no_signal

    def __post_init__(self):
        if self.reason == "no_store" and self.cacheable:
            raise ValueError("no_store is never cacheable")
        if self.reason in ("max_age_positive", "expires_future") and not self.cacheable:
            raise ValueError(f"{self.reason} implies cacheable")


def classify_cacheable(headers: dict[str, str], now: datetime | None = None) -> CacheDecision:
    """Decision table: no-store/no-cache forbid caching; then positive max-age,
    a future Expires, or a bare validator (Last-Modified/Etag) permit it."""
    h = {k.lower(): v for k, v in headers.items()}
    cc = h.get("cache-control", "")
    directives = {d.strip().lower() for d in cc.split(",") if d.strip()}
    if "no-store" in directives:
        return CacheDecision(False, "no_store")
    if "no-cache" in directives:
        return CacheDecision(False, "no_cache")
    for d in directives:
        if d.startswith("max-age="):
            try:
                age = int(d.split("=", 1)[1])
            except ValueError:
                continue
            if age > 0:
                return CacheDecision(True, "max_age_positive")
    expires = h.get("expires")
    if expires:
        try:
            when = parsedate_to_datetime(expires)
        except (TypeError, ValueError):
            when = None
        if when is not None:
            if when.tzinfo is None:
                when = when.replace(tzinfo=timezone.utc)
            ref = now or datetime.now(timezone.utc)
            if when > ref:
                return CacheDecision(True, "expires_future")
    if "last-modified" in h or "etag" in h:
        return CacheDecision(True, "validator_only_heuristic")
    return CacheDecision(False, "no_signal")


def site_key(url: str) -> str:
    """Registrable-site cache partition key (scheme-less host, eTLD+1 heuristic)."""
    host = urlsplit(url).hostname or ""
    parts = host.split(".")
    if len(parts) <= 2:
        return host
    # crude public-suffix handling good enough for fixtures: keep 3 labels
    # for two-level ccTLD suffixes like co.uk, com.au
    if parts[-2] in ("co", "com", "org", "net", "ac", "gov") and len(parts[-1]) == 2:
        return ".".join(parts[-3:])
    return ".".join(parts[-2:])


def warm_page_weight(internal: PageManifest, landing: PageManifest) -> tuple[int, list[str]]:
    """Internal-page weight assuming the landing page warmed a double-keyed cache.

    A URL is excluded only when it appears on the landing page, classifies as
    cacheable there, and both pages live under the same top-level site key.
    """
    if internal.kind != "internal" or landing.kind != "landing":
        raise ValueError("expects (internal, landing) manifests")
    if site_key(internal.page_url) != site_key(landing.page_url):
        raise MismatchedSite(
            f"{internal.page_url} and {landing.page_url} are different sites")
    cacheable_on_landing = {
        e.url for e in landing.entries if classify_cacheable(e.headers).cacheable
    }
    excluded = []
    weight = internal.total_page_bytes
    seen = set()
    for e in internal.entries:
        if e.url in cacheable_on_landing and e.url not in seen:
            weight -= e.transfer_bytes
            excluded.append(e.url)
            seen.add(e.url)
    return weight, excluded


def _rect_union_area(rects: list[tuple[int, int, int, int]]) -> int:
    """Area of the union of axis-aligned rectangles (coordinate-compression sweep)."""
    rects = [(x, y, w, h) for x, y, w, h in rects if w > 0 and h > 0]
    if not rects:
        return 0
    xs = sorted({x for r in rects for x in (r[0], r[0] + r[2])})
    ys = sorted({y for r in rects for y in (r[1], r[1] + r[3])})
    area = 0
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx, cy = xs[i], ys[j]
            if any(r[0] <= cx < r[0] + r[2] and r[1] <= cy < r[1] + r[3] for r in rects):
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return area


def sprite_savings(entry: ImageEntry) -> int:
    """Bytes wasted by a sprite sheet: transfer scaled by the unused sheet area."""
    if not entry.crop_rects:
        raise ValueError("entry has no crop rects")
    if entry.native_width is None or entry.native_height is None:
        raise MissingGeometry(f"native dimensions unknown for {entry.url}")
    total_area = entry.native_width * entry.native_height
    if total_area == 0:
        return 0
    used = _rect_union_area(entry.crop_rects)
    saved = int(entry.transfer_bytes * (1 - used / total_area))
    return max(0, min(entry.transfer_bytes, saved))


# ---------------------------------------------------------------------------
# serialization


def load_manifest(source: str | Path, format: str = "native_json") -> PageManifest:
    path = Path(source)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    if format == "native_json":
        return _load_native(path)
    if format == "har":
        return _load_har(path)
    raise UnsupportedFormat(format)


def save_manifest(manifest: PageManifest, dest: str | Path) -> None:
    doc = {
        "version": 1,
        "page_url": manifest.page_url,
        "rank_bucket": manifest.rank_bucket,
        "kind": manifest.kind,
        "viewport": list(manifest.viewport),
        "total_page_bytes": manifest.total_page_bytes,
        "entries": [
            {
                "url": e.url,
                "transfer_bytes": e.transfer_bytes,
                "headers": e.headers,
                "css": [e.css_width, e.css_height],
                "is_background": e.is_background,
                "crop_rects": [list(r) for r in e.crop_rects],
                **({"native": [e.native_width, e.native_height]}
                   if e.native_width is not None else {}),
                **({"body_file": e.body_ref} if e.body_ref else {}),
            }
            for e in manifest.entries
        ],
    }
    if manifest.parent_landing_url:
        doc["parent_landing_url"] = manifest.parent_landing_url
    Path(dest).write_text(json.dumps(doc, indent=2))


def _load_native(path: Path) -> PageManifest:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise ParseError(f"{path}: not a version-1 manifest")
    try:
        entries = []
        for e in doc.get("entries", []):
            native = e.get("native")
            entries.append(ImageEntry(
                url=e["url"],
                transfer_bytes=e["transfer_bytes"],
                headers={k.lower(): v for k, v in e.get("headers", {}).items()},
                css_width=e.get("css", [0, 0])[0],
                css_height=e.get("css", [0, 0])[1],
                is_background=e.get("is_background", False),
                crop_rects=[tuple(r) for r in e.get("crop_rects", [])],
                native_width=native[0] if native else None,
                native_height=native[1] if native else None,
                body_ref=e.get("body_file"),
            ))
        return PageManifest(
            page_url=doc["page_url"],
            rank_bucket=doc.get("rank_bucket", "other"),
            kind=doc.get("kind", "landing"),
            parent_landing_url=doc.get("parent_landing_url"),
            entries=entries,
            total_page_bytes=doc.get("total_page_bytes", 0),
            viewport=tuple(doc.get("viewport", DEFAULT_VIEWPORT)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"{path}: {exc!r}") from exc


def _response_size(resp: dict) -> int:
    transfer = resp.get("_transferSize", -1)
    if isinstance(transfer, int) and transfer >= 0:
        return transfer
    body_size = resp.get("bodySize", -1)
    if isinstance(body_size, int) and body_size >= 0:
        return body_size
    content = resp.get("content", {})
    size = content.get("size", 0)
    return size if isinstance(size, int) and size > 0 else 0


def _is_image_response(resp: dict) -> bool:
    mime = resp.get("content", {}).get("mimeType", "")
    return isinstance(mime, str) and mime.lower().startswith(_IMAGE_MIME_PREFIX)


def _load_har(path: Path) -> PageManifest:
    try:
        doc = json.loads(path.read_text())
        log = doc["log"]
        har_entries = log.get("entries", [])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: {exc!r}") from exc
    pages = log.get("pages", [])
    page_url = pages[0].get("title", "") if pages else ""
    total = 0
    entries = []
    for he in har_entries:
        try:
            resp = he["response"]
            url = he["request"]["url"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed HAR entry: {exc!r}") from exc
        size = _response_size(resp)
        total += size
        if not _is_image_response(resp):
            continue
        headers = {
            h["name"].lower(): h.get("value", "")
            for h in resp.get("headers", [])
            if isinstance(h, dict) and "name" in h
        }
        entries.append(ImageEntry(
            url=url,
            transfer_bytes=size,
            headers=headers,
            css_width=0,
            css_height=0,
            geometry_missing=True,
        ))
        if not page_url:
            page_url = url
    return PageManifest(
        page_url=page_url or str(path),
        entries=entries,
        total_page_bytes=total,
    )
