"""Command line interface."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import click

from . import gateway as gateway_mod
from . import metrics, oracle_pipeline, page_model, url_rewrite
from .codec_meta import parse_meta
from .errors import WebliteError
from .partial_fetch import FetchBudget, probe, fetch_with_budget


def _fail(message: str, code: int = 1):
    json.dump({"error": message}, sys.stderr)
    sys.stderr.write("\n")
    sys.exit(code)


@click.group()
def main():
    """Image data-saving toolkit: probing, budgeted fetching, URL rewriting,
    savings estimation, and a local optimizing gateway."""


@main.command("probe")
@click.argument("url")
@click.option("--probe-bytes", default=2048, show_default=True)
def probe_cmd(url, probe_bytes):
    """Fetch the first bytes of URL and print its metadata and total size."""
    try:
        pr = probe(url, probe_bytes)
        parsed = parse_meta(pr.prefix)
    except WebliteError as exc:
        _fail(str(exc))
    doc = {"status": pr.status, "total_bytes": pr.total}
    if hasattr(parsed, "format"):
        doc["meta"] = dataclasses.asdict(parsed)
    else:
        doc["need_more_bytes"] = parsed.n
    click.echo(json.dumps(doc, indent=2))


@main.command("fetch")
@click.argument("url")
@click.option("--budget", "-f", "fraction", type=float, default=0.5, show_default=True)
@click.option("-o", "--output", type=click.Path(), required=True)
def fetch_cmd(url, fraction, output):
    """Fetch URL under a byte budget and write the finalized image."""
    if not (0 < fraction <= 1):
        _fail("budget must be in (0, 1]")
    try:
        result = gateway_mod.process_image(
            url, fraction, "range_only", rules=url_rewrite.RuleSet.default())
    except WebliteError as exc:
        _fail(str(exc))
    Path(output).write_bytes(result.body)
    click.echo(json.dumps({
        "mode": result.mode,
        "original_size": result.original_size,
        "fetched_bytes": result.fetched_bytes,
        "output": output,
    }))


@main.command("rewrite")
@click.argument("url")
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              envvar="BL_RULES")
@click.option("--width", default=0, help="rendered CSS width in px")
@click.option("--height", default=0, help="rendered CSS height in px")
@click.option("--validate/--no-validate", "do_validate", default=True)
def rewrite_cmd(url, rules_path, width, height, do_validate):
    """Rewrite URL against the ruleset and report the validation outcome."""
    rules = (url_rewrite.RuleSet.from_file(rules_path)
             if rules_path else url_rewrite.RuleSet.default())
    try:
        pr = probe(url)
        parsed = parse_meta(pr.prefix)
    except WebliteError as exc:
        _fail(str(exc))
    if not getattr(parsed, "header_complete", False):
        _fail("could not parse image header from probe")
    matches = url_rewrite.discover(url, parsed, rules)
    if not matches:
        click.echo(json.dumps({"rewritten_url": url, "matches": [], "outcome": "no_match"}))
        return
    new_url = url_rewrite.rewrite(
        url, matches, {"width": width, "height": height, "quality": 85, "format": "webp"})
    doc = {
        "rewritten_url": new_url,
        "matches": [{"rule": m.rule.id, "class": m.klass, "value": m.matched_value}
                    for m in matches],
    }
    if do_validate and new_url != url:
        vr = url_rewrite.validate(url, new_url, pr.total or len(pr.prefix))
        doc["outcome"] = vr.reason
        doc["new_total"] = vr.new_total
    else:
        doc["outcome"] = "not_validated"
    click.echo(json.dumps(doc, indent=2))


@main.command("estimate")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["standard", "extreme"]), default="standard",
              show_default=True)
@click.option("--csv", "csv_out", type=click.Path(), default=None)
def estimate_cmd(manifest, mode, csv_out):
    """Oracle savings estimate for one page manifest."""
    try:
        m = page_model.load_manifest(manifest, "native_json")
        est = oracle_pipeline.estimate_page(
            m, oracle_pipeline.PipelineMode.by_name(mode),
            base_dir=Path(manifest).parent)
    except WebliteError as exc:
        _fail(str(exc))
    click.echo(json.dumps({
        "page_url": m.page_url,
        "mode": est.mode,
        "saved_bytes": est.saved_bytes,
        "cold_fraction": est.cold_fraction,
        "skipped": est.skipped,
    }, indent=2))
    if csv_out:
        _write_report_csv(est.report, csv_out)


@main.command("report")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--warm", is_flag=True, help="also compute warm-cache savings for internal pages")
@click.option("--budget", "fraction", type=float, default=0.5, show_default=True)
@click.option("--csv", "csv_out", type=click.Path(), default=None)
@click.option("--cdf-csv", type=click.Path(), default=None,
              help="write per-page savings CDF points")
def report_cmd(corpus_dir, warm, fraction, csv_out, cdf_csv):
    """Budget-policy savings report over a directory of native manifests."""
    corpus = Path(corpus_dir)
    manifests = {}
    for path in sorted(corpus.glob("*.json")):
        try:
            manifests[path.stem] = (page_model.load_manifest(path, "native_json"), path)
        except WebliteError:
            continue
    if not manifests:
        _fail(f"no manifests in {corpus_dir}")
    landings = {page_model.site_key(m.page_url): m
                for m, _ in manifests.values() if m.kind == "landing"}
    budget = FetchBudget()
    pages = []
    all_rows = []
    for name, (m, path) in manifests.items():
        per_image = []
        for e in m.entries:
            progressive = _entry_progressive(e, path.parent)
            frac = budget.progressive_fraction if progressive else fraction
            fetched = min(e.transfer_bytes, max(budget.probe_bytes,
                                                math.ceil(frac * e.transfer_bytes)))
            per_image.append(metrics.ImageResult(
                url=e.url, original_bytes=e.transfer_bytes, fetched_bytes=fetched,
                mode="progressive" if progressive else "baseline"))
        landing = None
        if warm and m.kind == "internal":
            landing = landings.get(page_model.site_key(m.page_url))
        rep = metrics.savings(m, per_image, landing=landing)
        pages.append({
            "page": name,
            "page_url": m.page_url,
            "cold_savings_fraction": rep.cold_savings_fraction,
            "warm_savings_fraction": rep.warm_savings_fraction,
        })
        all_rows.extend(rep.per_image)
    click.echo(json.dumps({"pages": pages}, indent=2))
    if csv_out:
        _write_rows_csv(all_rows, csv_out)
    if cdf_csv:
        values = sorted(p["cold_savings_fraction"] for p in pages)
        with open(cdf_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["savings_fraction", "cdf"])
            for i, v in enumerate(values):
                writer.writerow([f"{v:.6f}", f"{(i + 1) / len(values):.6f}"])


def _entry_progressive(entry, base_dir: Path) -> bool:
    if not entry.body_ref:
        return False
    path = base_dir / entry.body_ref
    if not path.exists():
        return False
    try:
        parsed = parse_meta(path.read_bytes()[:65536])
    except WebliteError:
        return False
    return bool(getattr(parsed, "progressive", False))


def _write_report_csv(report, path):
    _write_rows_csv(report.per_image, path)


def _write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["url", "original_bytes", "fetched_bytes", "ssim", "vc", "mode"])
        for r in rows:
            writer.writerow([r.url, r.original_bytes, r.fetched_bytes,
                             "" if r.ssim is None else f"{r.ssim:.4f}",
                             "" if r.vc is None else f"{r.vc:.4f}",
                             r.mode])


@main.command("serve")
@click.option("--port", default=8080, show_default=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              envvar="BL_RULES")
@click.option("--budget", "fraction", type=float, default=0.5, show_default=True)
@click.option("--mode", type=click.Choice(list(gateway_mod.MODES)), default="auto",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file; flags override its values")
def serve_cmd(port, rules_path, fraction, mode, config_path):
    """Run the optimizing gateway / forward proxy."""
    kwargs = {}
    if config_path:
        kwargs.update(json.loads(Path(config_path).read_text()))
    budget_kwargs = kwargs.pop("budget", {})
    budget = FetchBudget(**{**budget_kwargs,
                            "baseline_fraction": fraction,
                            "progressive_fraction": min(fraction, 0.15)})
    config = gateway_mod.GatewayConfig(
        port=kwargs.pop("port", port),
        budget=budget,
        ruleset_path=kwargs.pop("ruleset_path", rules_path),
        mode=kwargs.pop("mode", mode),
        **kwargs,
    )
    gw = gateway_mod.Gateway(config)
    click.echo(f"listening on 127.0.0.1:{gw.port}")
    try:
        gw.serve_forever()
    except KeyboardInterrupt:
        gw.stop()


if __name__ == "__main__":
    main()
