"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N time per call for each kernel and backend, and the
speed-up of the compiled one.
"""

import argparse
import timeit

import numpy as np

from toolloc import _backend
from toolloc.synth import SynthConfig, synth_scenes


def workloads(rng):
    stack, gt = synth_scenes(SynthConfig(frames=1, seed=0))
    heat = stack.frame(0)[0].ravel().astype(np.float64)
    values = rng.normal(size=100_000)
    mask = rng.random((96, 96)) < 0.45
    n = 2000
    xy = rng.uniform(0, 90, (n, 2))
    boxes = np.concatenate([xy, xy + rng.uniform(4, 20, (n, 2))], axis=1)
    frames = rng.integers(0, 50, n)
    gxy = rng.uniform(0, 90, (n // 2, 2))
    gboxes = np.concatenate([gxy, gxy + rng.uniform(4, 20, (n // 2, 2))], axis=1)
    gframes = rng.integers(0, 50, n // 2)
    return {
        "otsu_scan 96x96 map": lambda k: k.otsu_scan(heat, heat.min(), heat.max(), 256),
        "otsu_scan 100k values": lambda k: k.otsu_scan(values, values.min(), values.max(), 256),
        "label_components 96x96 (8)": lambda k: k.label_components(mask, 8),
        "greedy_match 2000x1000": lambda k: k.greedy_match(boxes, frames, gboxes, gframes, 0.5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _backend.available_backends()
    print(f"backends: {', '.join(sorted(backends))} (default: {_backend.NAME})")
    print(f"{'kernel':<30} {'backend':<8} {'ms/call':>10}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        times = {}
        for bname, mod in sorted(backends.items()):
            number = 1 if bname == "python" else 20
            t = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times[bname] = t
            print(f"{name:<30} {bname:<8} {t * 1e3:>10.3f}")
        if len(times) == 2:
            print(f"{'':<30} speed-up {times['python'] / times['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
