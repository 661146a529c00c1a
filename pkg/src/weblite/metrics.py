"""Quality and savings measurement: SSIM, visual completeness, page composition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy.signal import fftconvolve

from .errors import DimensionMismatch
from .page_model import PageManifest, warm_page_weight
from .reconstruct import Raster

_C1 = (0.01 * 255) ** 2
_C2 = (0.03 * 255) ** 2
_PAGE_HEIGHT_CAP = 5  # x viewport height


def _luma(px: np.ndarray) -> np.ndarray:
    rgb = px[:, :, :3].astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def resize_to(raster: Raster, width: int, height: int) -> Raster:
    im = raster.to_image().resize((width, height), Image.BOX)
    return Raster.from_image(im)


def ssim(a: Raster, b: Raster, win_size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over Gaussian-weighted sliding windows on 8-bit luma."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")
    x = _luma(a.pixels)
    y = _luma(b.pixels)
    win = min(win_size, x.shape[0], x.shape[1])
    if win % 2 == 0:
        win -= 1
    if win < 1:
        raise DimensionMismatch("image too small for SSIM")
    w = _gaussian_window(win, sigma)

    def filt(img):
        return fftconvolve(img, w, mode="valid")

    mu_x = filt(x)
    mu_y = filt(y)
    sxx = filt(x * x) - mu_x ** 2
    syy = filt(y * y) - mu_y ** 2
    sxy = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _C1) * (2 * sxy + _C2)
    den = (mu_x ** 2 + mu_y ** 2 + _C1) * (sxx + syy + _C2)
    return float(np.clip(np.mean(num / den), 0.0, 1.0))


def visual_completeness(candidate: Raster, reference: Raster) -> float:
    """Histogram-intersection fraction of matching pixel colors, mean over RGB."""
    if (candidate.width, candidate.height) != (reference.width, reference.height):
        raise DimensionMismatch(
            f"{candidate.width}x{candidate.height} vs {reference.width}x{reference.height}")
    n = candidate.width * candidate.height
    if n == 0:
        return 1.0
    scores = []
    for c in range(3):
        hc = np.bincount(candidate.pixels[:, :, c].ravel(), minlength=256)
        hr = np.bincount(reference.pixels[:, :, c].ravel(), minlength=256)
        scores.append(np.minimum(hc, hr).sum() / n)
    return float(np.mean(scores))


def compose_page(manifest: PageManifest, rasters: dict[str, Raster]) -> Raster:
    """Paint each image into its CSS box on a white canvas.

    Manifests carry box sizes but no positions, so entries flow vertically
    in manifest order at x=0; the relative-comparison metrics downstream
    only need the layout to be identical between candidate and reference.
    """
    vw, vh = manifest.viewport
    bottoms = []
    y = 0
    for e in manifest.entries:
        y += e.css_height
        bottoms.append(y)
    height = min(max(bottoms, default=vh), _PAGE_HEIGHT_CAP * vh)
    height = max(height, 1)
    canvas = np.full((height, max(vw, 1), 4), 255, dtype=np.uint8)
    y = 0
    for e in manifest.entries:
        r = rasters.get(e.url)
        if r is not None and e.css_width > 0 and e.css_height > 0 and y < height:
            im = r.to_image().resize((min(e.css_width, canvas.shape[1]), e.css_height), Image.BOX)
            tile = np.asarray(im, dtype=np.uint8)
            h = min(e.css_height, height - y)
            canvas[y:y + h, :tile.shape[1]] = tile[:h]
        y += e.css_height
    return Raster(canvas)


@dataclass
class ImageResult:
    url: str
    original_bytes: int
    fetched_bytes: int
    ssim: float | None = None
    vc: float | None = None
    mode: str = ""


@dataclass
class QualityReport:
    per_image: list[ImageResult] = field(default_factory=list)
    cold_savings_fraction: float = 0.0
    warm_savings_fraction: float | None = None
    page_vc: float | None = None

    def as_dict(self) -> dict:
        return {
            "per_image": [vars(r) for r in self.per_image],
            "page": {
                "cold_savings_fraction": self.cold_savings_fraction,
                "warm_savings_fraction": self.warm_savings_fraction,
                "page_vc": self.page_vc,
            },
        }


def savings(
    manifest: PageManifest,
    per_image: list[ImageResult],
    landing: PageManifest | None = None,
    page_vc: float | None = None,
) -> QualityReport:
    """Per-page savings accounting.

    Cold savings normalize the per-image byte deltas by total page weight.
    The warm variant drops cache-excluded URLs from both sides and divides
    by the warmed page weight.
    """
    saved = sum(max(0, r.original_bytes - r.fetched_bytes) for r in per_image)
    cold = saved / manifest.total_page_bytes if manifest.total_page_bytes else 0.0
    warm = None
    if landing is not None:
        weight, excluded = warm_page_weight(manifest, landing)
        excluded_set = set(excluded)
        warm_saved = sum(
            max(0, r.original_bytes - r.fetched_bytes)
            for r in per_image if r.url not in excluded_set
        )
        warm = warm_saved / weight if weight else 0.0
    return QualityReport(
        per_image=list(per_image),
        cold_savings_fraction=cold,
        warm_savings_fraction=warm,
        page_vc=page_vc,
    )
