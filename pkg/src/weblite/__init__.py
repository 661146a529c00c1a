"""Client-side image data saving: rewrite image-CDN URLs for lighter
variants, fetch image prefixes under a byte budget with HTTP range
requests, reconstruct displayable images from partial payloads, and
measure the savings and visual cost."""

from .codec_meta import ImageMeta, NeedMoreBytes, complete_rows, parse_meta, sniff_format
from .gateway import Gateway, GatewayConfig, process_image
from .metrics import QualityReport, compose_page, savings, ssim, visual_completeness
from .oracle_pipeline import PipelineMode, estimate_page, optimize
from .page_model import (
    CacheDecision,
    ImageEntry,
    PageManifest,
    classify_cacheable,
    load_manifest,
    save_manifest,
    sprite_savings,
    warm_page_weight,
)
from .partial_fetch import (
    CacheState,
    FetchBudget,
    FetchOutcome,
    RangeCache,
    fetch_with_budget,
    plan_cached_range,
    plan_second_range,
    probe,
)
from .reconstruct import Raster, ReflectionParams, finalize, reflect_fill, render_prefix
from .url_rewrite import RewriteRule, RewriteStats, RuleSet, discover, rewrite, validate

__version__ = "0.1.0"

__all__ = [
    "ImageMeta", "NeedMoreBytes", "complete_rows", "parse_meta", "sniff_format",
    "Gateway", "GatewayConfig", "process_image",
    "QualityReport", "compose_page", "savings", "ssim", "visual_completeness",
    "PipelineMode", "estimate_page", "optimize",
    "CacheDecision", "ImageEntry", "PageManifest", "classify_cacheable",
    "load_manifest", "save_manifest", "sprite_savings", "warm_page_weight",
    "CacheState", "FetchBudget", "FetchOutcome", "RangeCache",
    "fetch_with_budget", "plan_cached_range", "plan_second_range", "probe",
    "Raster", "ReflectionParams", "finalize", "reflect_fill", "render_prefix",
    "RewriteRule", "RewriteStats", "RuleSet", "discover", "rewrite", "validate",
    "__version__",
]
