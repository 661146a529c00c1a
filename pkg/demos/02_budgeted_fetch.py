"""Fetch half an image — on purpose.

Spins up a local range-capable origin, then fetches a baseline and a
progressive JPEG under byte budgets. Baseline images get 50% of their bytes;
progressive ones only need 15% because every scan covers the whole frame.
"""

from _shared import DemoOrigin, demo_image, encode_jpeg

from weblite import FetchBudget, fetch_with_budget


def main():
    im = demo_image(800, 600, seed=11)
    files = {
        "baseline.jpg": encode_jpeg(im),
        "progressive.jpg": encode_jpeg(im, progressive=True),
    }
    origin = DemoOrigin(files)
    try:
        budget = FetchBudget()  # 0.5 baseline, 0.15 progressive, 2 KB probe
        for name, data in files.items():
            out = fetch_with_budget(origin.url(name), budget)
            pct = 100 * out.fetched_bytes / out.total_bytes
            print(f"{name}: {out.mode}, {out.fetched_bytes}/{out.total_bytes} "
                  f"bytes ({pct:.0f}%)")
            for rng, status in out.request_log:
                print(f"    {status} {rng}")
            assert out.payload == data[:out.fetched_bytes]
        print("\nEvery payload is an exact byte prefix of the origin object.")
    finally:
        origin.close()


if __name__ == "__main__":
    main()
