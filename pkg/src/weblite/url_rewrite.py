"""Image-service URL rewriting.

Image CDNs expose size/quality/format knobs as URL tokens (``w_400``,
``quality=90``, ``.jpg``). When a token's value equals the image's native
property we take that as evidence the token is live, rewrite it to ask for
a lighter variant, and confirm with a cheap probe before trusting it.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .codec_meta import ImageMeta
from .errors import HttpStatus, NetworkError, NothingToRewrite
from .partial_fetch import ProbeResult, probe

KLASSES = ("width", "height", "quality", "format")

_FORMAT_ALIASES = {"jpg": "jpeg", "jpeg": "jpeg", "png": "png", "gif": "gif",
                   "webp": "webp", "bmp": "bmp", "tif": "tiff", "tiff": "tiff"}


@dataclass(frozen=True)
class RewriteRule:
    id: str
    klass: str
    token_pattern: str
    template: str
    scope: str | None = None

    def __post_init__(self):
        if self.klass not in KLASSES:
            raise ValueError(f"bad rule class {self.klass}")
        if re.compile(self.token_pattern).groups != 1:
            raise ValueError(f"rule {self.id}: token_pattern needs exactly one capture group")
        if self.template.count("{value}") != 1:
            raise ValueError(f"rule {self.id}: template needs exactly one {{value}}")

    def applies_to(self, url: str) -> bool:
        return self.scope is None or re.search(self.scope, url) is not None


@dataclass
class Match:
    rule: RewriteRule
    klass: str
    matched_value: str
    span: tuple[int, int]  # full token span in the URL


class RuleSet:
    def __init__(self, rules: list[RewriteRule]):
        self.rules = list(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleSet":
        raw = json.loads(Path(path).read_text())
        return cls([RewriteRule(**r) for r in raw])

    @classmethod
    def default(cls) -> "RuleSet":
        raw = json.loads(
            resources.files("weblite").joinpath("rules/default_rules.json").read_text())
        return cls([RewriteRule(**r) for r in raw])


class RewriteStats:
    """Thread-safe counters for rewrite attempts and their outcomes."""

    def __init__(self):
        self._lock = threading.Lock()
        self.attempted = 0
        self.matched = 0
        self.accepted = 0
        self.reverted_404 = 0
        self.reverted_no_savings = 0
        self.savings_bytes = 0

    def as_dict(self) -> dict:
        with self._lock:
            return {
                "attempted": self.attempted,
                "matched": self.matched,
                "accepted": self.accepted,
                "reverted_404": self.reverted_404,
                "reverted_no_savings": self.reverted_no_savings,
                "savings_bytes": self.savings_bytes,
            }

    def bump(self, name: str, by: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + by)


def discover(url: str, meta: ImageMeta, rules: RuleSet) -> list[Match]:
    """Tokens in `url` whose value matches a native property of the image.

    Width/height require numeric equality with the decoded dimensions and
    format requires extension equality; quality tokens match on pattern
    alone since the encoded quality is not recoverable from headers.
    """
    matches: list[Match] = []
    taken: list[tuple[int, int]] = []
    for rule in rules.rules:
        if not rule.applies_to(url):
            continue
        for m in re.finditer(rule.token_pattern, url):
            value = m.group(1)
            if rule.klass == "width":
                if not meta.header_complete or not value.isdigit() or int(value) != meta.width:
                    continue
            elif rule.klass == "height":
                if not meta.header_complete or not value.isdigit() or int(value) != meta.height:
                    continue
            elif rule.klass == "format":
                if _FORMAT_ALIASES.get(value.lower()) != meta.format:
                    continue
            span = m.span()
            if any(a < span[1] and span[0] < b for a, b in taken):
                continue  # first rule wins on overlapping tokens
            taken.append(span)
            matches.append(Match(rule, rule.klass, value, span))
    return matches


_KLASS_ORDER = {"width": 0, "height": 1, "quality": 2, "format": 3}


def rewrite(url: str, matches: list[Match], targets: dict) -> str:
    """Apply matched rules, producing the lighter-variant URL.

    `targets` carries css-pixel width/height (0 = unknown, leave alone),
    quality (default 85), and format (default webp, only used when a
    format-class token matched). Dimension targets never upscale.
    """
    if not matches:
        raise NothingToRewrite(url)
    quality = targets.get("quality", 85)
    fmt = targets.get("format", "webp")
    replacements: list[tuple[tuple[int, int], str]] = []
    for match in sorted(matches, key=lambda m: _KLASS_ORDER[m.klass]):
        if match.klass in ("width", "height"):
            css = targets.get(match.klass, 0)
            if not css:
                continue  # unknown geometry: do not touch dimensions
            native = int(match.matched_value)
            value = min(native, css)
        elif match.klass == "quality":
            value = quality
        else:
            value = fmt
        replacements.append((match.span, match.rule.template.format(value=value)))
    out = url
    for (lo, hi), text in sorted(replacements, key=lambda r: -r[0][0]):
        out = out[:lo] + text + out[hi:]
    return out


@dataclass
class ValidationResult:
    accepted: bool
    reason: str  # accepted | 404 | no_savings
    probe_result: ProbeResult | None = None
    new_total: int | None = None


def validate(
    original_url: str,
    rewritten_url: str,
    original_total: int,
    stats: RewriteStats | None = None,
    probe_bytes: int = 2048,
    session=None,
) -> ValidationResult:
    """Probe the rewritten URL and decide accept vs revert.

    A 404 (or any network failure) reverts; a variant at least as big as the
    original reverts as no-savings. On accept, the probe result is returned
    so the caller reuses those bytes instead of refetching them.
    """
    stats = stats or RewriteStats()
    stats.bump("attempted")
    try:
        pr = probe(rewritten_url, probe_bytes, session=session)
    except (HttpStatus, NetworkError):
        stats.bump("reverted_404")
        return ValidationResult(False, "404")
    new_total = pr.total if pr.total is not None else len(pr.prefix)
    if new_total >= original_total:
        stats.bump("reverted_no_savings")
        return ValidationResult(False, "no_savings", probe_result=pr, new_total=new_total)
    stats.bump("accepted")
    stats.bump("savings_bytes", original_total - new_total)
    return ValidationResult(True, "accepted", probe_result=pr, new_total=new_total)
