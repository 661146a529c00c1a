"""Middlebox-style compression oracle.

Bounds attainable image savings by resizing each image body to its rendered
CSS box, transcoding to WebP, and measuring the byte delta and SSIM cost.
Standard mode targets the CSS dimensions at quality 85; extreme mode halves
the dimensions and drops quality to 10.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import DecodeError
from .metrics import ImageResult, QualityReport, ssim
from .page_model import ImageEntry, PageManifest, sprite_savings, warm_page_weight
from .reconstruct import Raster


@dataclass(frozen=True)
class PipelineMode:
    name: str
    resize_target: str  # css_dims | half_css_dims
    webp_quality: int

    def __post_init__(self):
        allowed = {
            "standard": ("css_dims", 85),
            "extreme": ("half_css_dims", 10),
        }
        if self.name not in allowed or allowed[self.name] != (self.resize_target, self.webp_quality):
            raise ValueError(f"inconsistent pipeline mode {self}")

    @classmethod
    def standard(cls) -> "PipelineMode":
        return cls("standard", "css_dims", 85)

    @classmethod
    def extreme(cls) -> "PipelineMode":
        return cls("extreme", "half_css_dims", 10)

    @classmethod
    def by_name(cls, name: str) -> "PipelineMode":
        return {"standard": cls.standard, "extreme": cls.extreme}[name]()


def _target_dims(entry: ImageEntry, native: tuple[int, int], mode: PipelineMode) -> tuple[int, int]:
    w, h = entry.css_width, entry.css_height
    if w <= 0 or h <= 0:
        return native
    if mode.resize_target == "half_css_dims":
        w, h = max(1, w // 2), max(1, h // 2)
    return (min(w, native[0]), min(h, native[1]))


def optimize(entry: ImageEntry, body: bytes, mode: PipelineMode) -> tuple[bytes, float, int]:
    """Resize + transcode one image. Returns (optimized_bytes, ssim, saved_bytes).

    Keeps the original when the optimized version is not smaller; SSIM is
    measured between the original and the optimized result at the output
    dimensions."""
    try:
        im = Image.open(io.BytesIO(body))
        im.load()
        im.seek(0)  # animations: first frame only
        frame = im.convert("RGBA")
    except Exception as exc:
        raise DecodeError(str(exc)) from exc
    target = _target_dims(entry, frame.size, mode)
    resized = frame.resize(target, Image.BOX) if target != frame.size else frame
    buf = io.BytesIO()
    resized.save(buf, format="WEBP", quality=mode.webp_quality)
    optimized = buf.getvalue()
    original_size = len(body)
    if len(optimized) >= original_size:
        return body, 1.0, 0
    reference = Raster.from_image(resized)
    decoded = Raster.from_image(Image.open(io.BytesIO(optimized)))
    quality = ssim(reference, decoded)
    return optimized, quality, original_size - len(optimized)


@dataclass
class PageEstimate:
    mode: str
    saved_bytes: int
    cold_fraction: float
    warm_fraction: float | None
    report: QualityReport
    skipped: list[str]


def estimate_page(
    manifest: PageManifest,
    mode: PipelineMode,
    bodies: dict[str, bytes] | None = None,
    base_dir: str | Path | None = None,
    landing: PageManifest | None = None,
) -> PageEstimate:
    """Sum attainable savings over a page.

    Sprite-sheet entries use the area method; everything else goes through
    the compression pipeline. Bodies come from the `bodies` map or from
    body_ref files relative to `base_dir`; entries without a body are
    flagged and count zero savings.
    """
    bodies = bodies or {}
    results: list[ImageResult] = []
    skipped: list[str] = []
    for entry in manifest.entries:
        if entry.crop_rects and entry.native_width is not None:
            saved = sprite_savings(entry)
            results.append(ImageResult(
                url=entry.url,
                original_bytes=entry.transfer_bytes,
                fetched_bytes=entry.transfer_bytes - saved,
                mode="sprite",
            ))
            continue
        body = bodies.get(entry.url)
        if body is None and entry.body_ref and base_dir is not None:
            path = Path(base_dir) / entry.body_ref
            if path.exists():
                body = path.read_bytes()
        if body is None:
            skipped.append(entry.url)
            results.append(ImageResult(
                url=entry.url, original_bytes=entry.transfer_bytes,
                fetched_bytes=entry.transfer_bytes, mode="missing_body",
            ))
            continue
        try:
            _, quality, saved = optimize(entry, body, mode)
        except DecodeError:
            skipped.append(entry.url)
            results.append(ImageResult(
                url=entry.url, original_bytes=entry.transfer_bytes,
                fetched_bytes=entry.transfer_bytes, mode="decode_error",
            ))
            continue
        # savings scale with the wire size when bodies were re-encoded on disk
        saved_wire = min(entry.transfer_bytes, saved)
        results.append(ImageResult(
            url=entry.url,
            original_bytes=entry.transfer_bytes,
            fetched_bytes=entry.transfer_bytes - saved_wire,
            ssim=quality,
            mode=mode.name,
        ))
    saved_total = sum(r.original_bytes - r.fetched_bytes for r in results)
    cold = saved_total / manifest.total_page_bytes if manifest.total_page_bytes else 0.0
    warm = None
    if landing is not None:
        weight, excluded = warm_page_weight(manifest, landing)
        excluded_set = set(excluded)
        warm_saved = sum(
            r.original_bytes - r.fetched_bytes
            for r in results if r.url not in excluded_set
        )
        warm = warm_saved / weight if weight else 0.0
    report = QualityReport(
        per_image=results, cold_savings_fraction=cold, warm_savings_fraction=warm)
    return PageEstimate(
        mode=mode.name, saved_bytes=saved_total, cold_fraction=cold,
        warm_fraction=warm, report=report, skipped=skipped,
    )
