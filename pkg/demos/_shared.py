"""Helpers shared by the demo scripts: deterministic test images and a tiny
range-capable HTTP origin to fetch them from."""

from __future__ import annotations

import io
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image, ImageDraw

_RANGE_RE = re.compile(r"bytes=(\d+)-(\d+)$")


def demo_image(width: int, height: int, seed: int = 7) -> Image.Image:
    """A busy, photo-like gradient with shapes; deterministic per seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    base = np.stack([
        (xx / max(width - 1, 1)) * 255,
        (yy / max(height - 1, 1)) * 255,
        ((xx + yy) / max(width + height - 2, 1)) * 255,
    ], axis=-1)
    im = Image.fromarray(base.astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(im)
    for _ in range(30):
        x0, y0 = rng.integers(0, width), rng.integers(0, height)
        r = int(rng.integers(5, max(6, min(width, height) // 6)))
        color = tuple(int(c) for c in rng.integers(0, 256, 3))
        draw.ellipse([x0 - r, y0 - r, x0 + r, y0 + r], fill=color)
    return im


def encode_jpeg(im: Image.Image, progressive: bool = False) -> bytes:
    buf = io.BytesIO()
    im.save(buf, format="JPEG", quality=90, progressive=progressive)
    return buf.getvalue()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):
        pass

    def do_GET(self):
        body = self.server.files.get(self.path.lstrip("/"))
        if body is None:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        rng = self.headers.get("Range")
        m = _RANGE_RE.match(rng) if rng else None
        if m:
            lo, hi = int(m.group(1)), min(int(m.group(2)), len(body) - 1)
            chunk = body[lo:hi + 1]
            self.send_response(206)
            self.send_header("Content-Range", f"bytes {lo}-{hi}/{len(body)}")
        else:
            chunk = body
            self.send_response(200)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(chunk)))
        self.end_headers()
        self.wfile.write(chunk)


class DemoOrigin:
    """Serves a dict of name -> bytes with HTTP range support."""

    def __init__(self, files: dict[str, bytes]):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.files = dict(files)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def url(self, name: str) -> str:
        return f"http://127.0.0.1:{self.server.server_address[1]}/{name}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()
