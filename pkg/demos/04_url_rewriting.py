"""Ask the image service for a lighter file by editing its URL.

Image CDNs encode size and quality knobs in the URL. When a token's value
matches the image's native property, the token is almost certainly live:
rewrite it to the rendered size, probe the new URL, and keep it only if the
variant really is smaller.
"""

from _shared import demo_image, encode_jpeg

from weblite import parse_meta
from weblite.url_rewrite import RuleSet, discover, rewrite


def main():
    # a 400x300 image served under a token-bearing path
    body = encode_jpeg(demo_image(400, 300, seed=31))
    meta = parse_meta(body)
    url = "https://images.example/cdn/fill/w_400,h_300,q_90/product.jpg"

    rules = RuleSet.default()
    matches = discover(url, meta, rules)
    print(f"native {meta.width}x{meta.height}; live tokens found:")
    for m in matches:
        print(f"  {m.rule.id:<22} {m.klass:<8} value={m.matched_value}")

    # the page renders this image in a 200x150 box
    lighter = rewrite(url, matches, {"width": 200, "height": 150, "quality": 60})
    print(f"\noriginal:  {url}")
    print(f"rewritten: {lighter}")
    print("\nIn production the rewritten URL is probed first (2 KB); a 404 or a"
          "\nbigger variant reverts to the original — see weblite.url_rewrite.validate.")


if __name__ == "__main__":
    main()
