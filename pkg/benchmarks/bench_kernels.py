"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from edgeprint import frame as fr
from edgeprint import kernels


def cases(rng):
    frames = [
        fr.FrameSpec(int(rng.integers(0, 0x800)), rng.integers(0, 256, 8, dtype=np.uint8).tobytes())
        for _ in range(200)
    ]
    heads = [fr.crc_prefix(f).bits for f in frames]
    raw = [fr.serialize(f).bits[:-fr.TRAILER_BITS] for f in frames]
    stuffed = [fr.encode(f).bits for f in frames]
    x = rng.normal(size=(1500, 8))
    y = rng.integers(0, 7, 1500)
    order = np.arange(1500)
    priors = np.bincount(y) / len(y)
    return {
        "crc15 x200": lambda impl: [kernels.crc15(h, impl) for h in heads],
        "stuff x200": lambda impl: [kernels.stuff_bits(b, impl) for b in raw],
        "destuff x200": lambda impl: [kernels.destuff_bits(b[:-fr.TRAILER_BITS], impl) for b in stuffed],
        "rising_edges x200": lambda impl: [kernels.rising_edges(b, 34, impl) for b in stuffed],
        "relief_f 1500x8": lambda impl: kernels.relief_f_weights(x, y, order, 10, priors, impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':<20}" + "".join(f"{n + ' ms':>14}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases(np.random.default_rng(0)).items():
        best = {}
        for n in names:
            number = 1 if "relief" in label and n == "python" else 3
            t = min(timeit.repeat(lambda: fn(backends[n]), number=number, repeat=args.repeat))
            best[n] = 1000 * t / number
        speed = f"{best['python'] / best['compiled']:.1f}x" if len(best) == 2 else "-"
        print(f"{label:<20}" + "".join(f"{best[n]:>14.3f}" for n in names) + f"{speed:>10}")


if __name__ == "__main__":
    main()
