"""What could a whole page save?

Builds a small page manifest (three images plus a sprite sheet), runs the
middlebox-style compression oracle in both modes, and prints the page-level
savings accounting the measurement tooling produces.
"""

from _shared import demo_image, encode_jpeg

from weblite.oracle_pipeline import PipelineMode, estimate_page
from weblite.page_model import ImageEntry, PageManifest


def main():
    bodies = {}
    entries = []
    for name, dims, css in [("hero.jpg", (1200, 800), (600, 400)),
                            ("card.jpg", (480, 360), (240, 180)),
                            ("thumb.jpg", (160, 120), (160, 120))]:
        body = encode_jpeg(demo_image(*dims, seed=len(name)))
        url = f"http://shop.example/{name}"
        bodies[url] = body
        entries.append(ImageEntry(url=url, transfer_bytes=len(body),
                                  css_width=css[0], css_height=css[1]))
    # a 512x512 sprite sheet of which only two 64x64 icons are ever shown
    entries.append(ImageEntry(
        url="http://shop.example/sprite.png", transfer_bytes=18000,
        crop_rects=[(0, 0, 64, 64), (64, 0, 64, 64)],
        native_width=512, native_height=512, is_background=True))

    image_bytes = sum(e.transfer_bytes for e in entries)
    manifest = PageManifest(
        page_url="http://shop.example/", viewport=(411, 731),
        total_page_bytes=image_bytes + 120_000,  # html/css/js on top
        entries=entries)

    print(f"page weight {manifest.total_page_bytes:,} bytes, "
          f"{image_bytes:,} of it images\n")
    for mode in (PipelineMode.standard(), PipelineMode.extreme()):
        est = estimate_page(manifest, mode, bodies=bodies)
        print(f"{mode.name:>8}: save {est.saved_bytes:,} bytes "
              f"({100 * est.cold_fraction:.1f}% of the page)")
        for r in est.report.per_image:
            ssim = f"ssim {r.ssim:.3f}" if r.ssim is not None else f"[{r.mode}]"
            print(f"    {r.url.rsplit('/', 1)[1]:<12} "
                  f"{r.original_bytes:>8,} -> {r.fetched_bytes:>8,}  {ssim}")
        print()


if __name__ == "__main__":
    main()
