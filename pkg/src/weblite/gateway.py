"""Local delivery surface.

`/img?url=U&budget=F&mode=M` fetches an image through the full pipeline
(URL rewrite, budgeted range fetch, reconstruction) and returns a complete,
decodable image with accounting headers. The same server doubles as a plain
HTTP forward proxy: CONNECT traffic is tunneled untouched (TLS is never
intercepted) and plain-HTTP image responses are optimized in flight.
"""

from __future__ import annotations

import select
import socket
import threading
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

import requests

from . import reconstruct, url_rewrite
from .errors import (
    CorruptHeader,
    CorruptPayload,
    HeaderTooLarge,
    HttpStatus,
    MalformedContentRange,
    NetworkError,
    NothingToFill,
)
from .partial_fetch import FetchBudget, FetchOutcome, RangeCache, fetch_with_budget, probe
from .url_rewrite import RewriteStats, RuleSet

MODES = ("auto", "rewrite_only", "range_only", "off")

_CONTENT_TYPES = {
    "jpeg": "image/jpeg", "png": "image/png", "gif": "image/gif",
    "webp": "image/webp", "bmp": "image/bmp", "tiff": "image/tiff",
}


@dataclass
class GatewayConfig:
    port: int = 0
    budget: FetchBudget = field(default_factory=FetchBudget)
    ruleset_path: str | None = None
    mode: str = "auto"
    per_host_limit: int = 6
    reencode: str = "webp_q85"  # png is chosen automatically when alpha matters

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"bad mode {self.mode}")
        if not (0 <= self.port <= 65535):
            raise ValueError("bad port")

    def load_rules(self) -> RuleSet:
        if self.ruleset_path:
            return RuleSet.from_file(self.ruleset_path)
        return RuleSet.default()


@dataclass
class GatewayResult:
    body: bytes
    content_type: str
    mode: str
    original_size: int
    fetched_bytes: int
    rewritten: bool


def _full_get(url: str, session: requests.Session) -> tuple[bytes, str]:
    try:
        resp = session.get(url, timeout=60)
    except requests.RequestException as exc:
        raise NetworkError(str(exc)) from exc
    if resp.status_code != 200:
        raise HttpStatus(resp.status_code, url)
    return resp.content, resp.headers.get("Content-Type", "application/octet-stream")


def _token_candidates(url: str, rules: RuleSet) -> bool:
    import re
    return any(
        rule.applies_to(url) and re.search(rule.token_pattern, url)
        for rule in rules.rules
    )


def process_image(
    url: str,
    fraction: float | None,
    mode: str,
    rules: RuleSet,
    budget: FetchBudget | None = None,
    dims: tuple[int, int] = (0, 0),
    session: requests.Session | None = None,
    cache: RangeCache | None = None,
    stats: RewriteStats | None = None,
) -> GatewayResult:
    """End-to-end pipeline for one image URL."""
    if mode not in MODES:
        raise ValueError(f"bad mode {mode}")
    sess = session or requests.Session()
    budget = budget or FetchBudget()
    cache = cache or RangeCache()  # keeps a possible full-object top-up incremental
    if fraction is not None:
        budget = replace(budget, baseline_fraction=fraction, progressive_fraction=fraction)

    if mode == "off":
        body, ctype = _full_get(url, sess)
        return GatewayResult(body, ctype, "off", len(body), len(body), False)

    target = url
    preprobe = None
    rewritten = False
    if mode in ("auto", "rewrite_only") and _token_candidates(url, rules):
        try:
            pr = probe(url, budget.probe_bytes, sess)
        except (HttpStatus, MalformedContentRange, NetworkError):
            pr = None
        if pr is not None and pr.total is not None:
            from .codec_meta import ImageMeta, parse_meta
            parsed = None
            try:
                parsed = parse_meta(pr.prefix)
            except Exception:
                parsed = None
            preprobe = pr
            if isinstance(parsed, ImageMeta) and parsed.header_complete:
                matches = url_rewrite.discover(url, parsed, rules)
                if matches:
                    targets = {"width": dims[0], "height": dims[1],
                               "quality": 85, "format": "webp"}
                    new_url = url_rewrite.rewrite(url, matches, targets)
                    if new_url != url:
                        vr = url_rewrite.validate(
                            url, new_url, pr.total, stats=stats,
                            probe_bytes=budget.probe_bytes, session=sess)
                        if vr.accepted:
                            target = new_url
                            preprobe = vr.probe_result
                            rewritten = True
        elif pr is not None:
            preprobe = pr

    if mode == "rewrite_only":
        budget = replace(budget, baseline_fraction=1.0, progressive_fraction=1.0)

    outcome = fetch_with_budget(
        target, budget, rendered_dims=dims, session=sess,
        cache=cache, preprobe=preprobe)
    body, ctype = _deliver(outcome, dims)
    if body is None:
        # partial payload could not be reconstructed into a displayable image
        # (e.g. formats without partial decode); top up to the whole object
        full_budget = replace(budget, baseline_fraction=1.0, progressive_fraction=1.0)
        outcome = fetch_with_budget(
            target, full_budget, rendered_dims=dims, session=sess, cache=cache)
        body, ctype = _deliver(outcome, dims)
    return GatewayResult(
        body=body, content_type=ctype, mode=outcome.mode,
        original_size=outcome.total_bytes, fetched_bytes=outcome.fetched_bytes,
        rewritten=rewritten,
    )


def _deliver(outcome: FetchOutcome, dims: tuple[int, int]) -> tuple[bytes | None, str]:
    """Reconstruct a partial payload into a complete image, or pass through.

    Returns (None, type) when the partial payload cannot be turned into a
    displayable image; the caller then falls back to fetching the rest."""
    meta = outcome.meta
    fmt = meta.format if meta else "unknown"
    passthrough_type = _CONTENT_TYPES.get(fmt, "application/octet-stream")
    if outcome.fetched_bytes >= outcome.total_bytes or meta is None:
        return outcome.payload, passthrough_type
    try:
        raster, valid_rows = reconstruct.render_prefix(outcome.payload, meta)
        if not meta.progressive:
            if valid_rows <= 0:
                raise CorruptPayload("no decodable rows")
            if valid_rows < raster.height:
                raster = reconstruct.reflect_fill(raster, valid_rows)
    except (CorruptPayload, NothingToFill):
        return None, passthrough_type
    encode = "png" if raster.has_transparency() else "webp_q85"
    body = reconstruct.finalize(raster, dims, encode=encode)
    return body, _CONTENT_TYPES["png" if encode == "png" else "webp"]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "weblite"

    def log_message(self, *args):  # tests want quiet servers
        pass

    @property
    def ctx(self):
        return self.server.ctx

    def do_GET(self):
        if self.path.startswith("/img"):
            self._handle_img()
        elif self.path.startswith("http://"):
            self._handle_proxy_get()
        else:
            self._error(404, "unknown endpoint")

    def do_CONNECT(self):
        host, _, port = self.path.partition(":")
        try:
            upstream = socket.create_connection((host, int(port or 443)), timeout=30)
        except OSError:
            self._error(502, "tunnel connect failed")
            return
        self.send_response(200, "Connection Established")
        self.end_headers()
        self._blind_relay(upstream)

    def _blind_relay(self, upstream: socket.socket):
        client = self.connection
        try:
            while True:
                r, _, _ = select.select([client, upstream], [], [], 60)
                if not r:
                    break
                for src in r:
                    data = src.recv(65536)
                    if not data:
                        return
                    (upstream if src is client else client).sendall(data)
        except OSError:
            pass
        finally:
            upstream.close()
            self.close_connection = True

    def _handle_img(self):
        q = parse_qs(urlsplit(self.path).query)
        url = q.get("url", [None])[0]
        mode = q.get("mode", [self.ctx["config"].mode])[0]
        budget_s = q.get("budget", [None])[0]
        try:
            w = int(q.get("w", ["0"])[0])
            h = int(q.get("h", ["0"])[0])
        except ValueError:
            return self._error(400, "w and h must be integers")
        if not url or not url.startswith(("http://", "https://")):
            return self._error(400, "url parameter must be an absolute http(s) URL")
        if mode not in MODES:
            return self._error(400, f"mode must be one of {MODES}")
        fraction = None
        if budget_s is not None:
            try:
                fraction = float(budget_s)
            except ValueError:
                return self._error(400, "budget must be a number")
            if not (0 < fraction <= 1):
                return self._error(400, "budget must be in (0, 1]")
        try:
            result = process_image(
                url, fraction, mode,
                rules=self.ctx["rules"],
                budget=self.ctx["config"].budget,
                dims=(w, h),
                session=self.ctx["session"],
                cache=self.ctx["cache"],
                stats=self.ctx["stats"],
            )
        except (NetworkError, HttpStatus, MalformedContentRange,
                CorruptHeader, HeaderTooLarge) as exc:
            return self._error(502, f"upstream failure: {exc}")
        except TimeoutError:
            return self._error(504, "upstream timeout")
        self.send_response(200)
        self.send_header("Content-Type", result.content_type)
        self.send_header("Content-Length", str(len(result.body)))
        self.send_header("X-BL-Mode", result.mode)
        self.send_header("X-BL-Original-Size", str(result.original_size))
        self.send_header("X-BL-Fetched-Bytes", str(result.fetched_bytes))
        self.send_header("X-BL-Rewritten", "1" if result.rewritten else "0")
        self.end_headers()
        self.wfile.write(result.body)

    def _handle_proxy_get(self):
        """Plain-HTTP forward proxy; image responses go through the pipeline."""
        url = self.path
        sess = self.ctx["session"]
        try:
            head = sess.head(url, timeout=30, allow_redirects=False)
            ctype = head.headers.get("Content-Type", "")
        except requests.RequestException:
            return self._error(502, "upstream failure")
        config = self.ctx["config"]
        if config.mode != "off" and ctype.startswith("image/"):
            try:
                result = process_image(
                    url, None, config.mode,
                    rules=self.ctx["rules"], budget=config.budget,
                    session=sess, cache=self.ctx["cache"], stats=self.ctx["stats"],
                )
            except (NetworkError, HttpStatus, MalformedContentRange,
                    CorruptHeader, HeaderTooLarge) as exc:
                return self._error(502, f"upstream failure: {exc}")
            self.send_response(200)
            self.send_header("Content-Type", result.content_type)
            self.send_header("Content-Length", str(len(result.body)))
            self.send_header("X-BL-Mode", result.mode)
            self.end_headers()
            self.wfile.write(result.body)
            return
        try:
            resp = sess.get(url, timeout=60)
        except requests.RequestException:
            return self._error(502, "upstream failure")
        self.send_response(resp.status_code)
        self.send_header("Content-Type", resp.headers.get("Content-Type", "application/octet-stream"))
        self.send_header("Content-Length", str(len(resp.content)))
        self.end_headers()
        self.wfile.write(resp.content)

    def _error(self, status: int, message: str):
        body = ('{"error": "%s"}' % message).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class Gateway:
    """Threaded HTTP server wrapper usable from the CLI and from tests."""

    def __init__(self, config: GatewayConfig | None = None):
        self.config = config or GatewayConfig()
        self.server = ThreadingHTTPServer(("127.0.0.1", self.config.port), _Handler)
        self.server.ctx = {
            "config": self.config,
            "rules": self.config.load_rules(),
            "session": requests.Session(),
            "cache": RangeCache(),
            "stats": RewriteStats(),
        }
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    @property
    def stats(self) -> RewriteStats:
        return self.server.ctx["stats"]

    def start(self) -> "Gateway":
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self.server.serve_forever()
