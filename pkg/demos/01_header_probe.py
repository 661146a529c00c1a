"""How little of an image do we need to know what it is?

Feeds growing byte prefixes of a JPEG to the header parser until it has
enough to report format, dimensions, and progressiveness — the information
that drives every downstream budgeting decision.
"""

from _shared import demo_image, encode_jpeg

from weblite import ImageMeta, NeedMoreBytes, parse_meta


def main():
    for progressive in (False, True):
        data = encode_jpeg(demo_image(640, 480), progressive=progressive)
        have = 8
        while True:
            result = parse_meta(data[:have])
            if isinstance(result, ImageMeta):
                break
            assert isinstance(result, NeedMoreBytes)
            print(f"  {have:5d} bytes: parser wants {result.n} more")
            have += result.n
        label = "progressive" if progressive else "baseline"
        print(f"{label:>12}: {result.format} {result.width}x{result.height}, "
              f"header complete after {result.header_bytes} of {len(data)} bytes\n")


if __name__ == "__main__":
    main()
