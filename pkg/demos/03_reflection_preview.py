"""Make half a baseline JPEG look like a whole picture.

Decodes the top rows from a 50% prefix, then completes the frame by
mirroring decoded rows downward with a blur — and shows, via the visual
completeness metric, how much better that reads than a blank bottom half.

Writes three WebP files to the current directory for eyeballing.
"""

from pathlib import Path

from _shared import demo_image, encode_jpeg

from weblite import parse_meta
from weblite.metrics import visual_completeness
from weblite.reconstruct import Raster, finalize, reflect_fill, render_prefix


def main():
    data = encode_jpeg(demo_image(640, 480, seed=21))
    meta = parse_meta(data)
    cut = data[:len(data) // 2]

    full, _ = render_prefix(data, meta)
    partial, valid = render_prefix(cut, meta)
    print(f"50% of the bytes decode {valid} of {meta.height} rows")

    reflected = reflect_fill(partial, valid)
    blank = Raster(partial.pixels.copy())
    blank.pixels[valid:] = (255, 255, 255, 255)

    for name, raster in [("full", full), ("reflected", reflected), ("blank", blank)]:
        Path(f"preview_{name}.webp").write_bytes(finalize(raster))
        if name != "full":
            vc = visual_completeness(raster, full)
            print(f"  {name:>9}: visual completeness {vc:.3f}")
    print("wrote preview_full.webp / preview_reflected.webp / preview_blank.webp")


if __name__ == "__main__":
    main()
