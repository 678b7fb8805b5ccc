#!/usr/bin/env python3
"""Benchmark the compiled pixel kernels against the pure-Python fallback.

Labels and traces synthetic thermal masks at typical camera resolutions.
Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from smartlid.kernels import _pure

try:
    from smartlid.kernels import _native
except ImportError:
    _native = None


def blobby_mask(rng, h, w, blobs=40):
    """Cluster-like foreground, similar to a segmented thermal frame."""
    rows, cols = np.indices((h, w))
    field = np.zeros((h, w))
    for _ in range(blobs):
        r0, c0 = rng.uniform(0, h), rng.uniform(0, w)
        sigma = rng.uniform(2, h / 12)
        field += np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2 * sigma**2))
    return (field > np.quantile(field, 0.8)).astype(np.uint8)


def starts_of(labels, count):
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    _, first = np.unique(flat[fg], return_index=True)
    w = labels.shape[1]
    return [(int(fg[i]) // w, int(fg[i]) % w) for i in first]


def bench(module, masks, repeats=3):
    label_t = stats_t = trace_t = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        labeled = [module.label_components(m) for m in masks]
        label_t = min(label_t, time.perf_counter() - t0)
        t0 = time.perf_counter()
        for labels, count in labeled:
            module.component_stats(labels, count)
        stats_t = min(stats_t, time.perf_counter() - t0)
        t0 = time.perf_counter()
        for labels, count in labeled:
            for k, (r, c) in enumerate(starts_of(labels, count), start=1):
                module.trace_contour(labels, k, r, c)
        trace_t = min(trace_t, time.perf_counter() - t0)
    return label_t, stats_t, trace_t


def main():
    rng = np.random.default_rng(0)
    for h, w, frames in ((60, 96, 20), (512, 640, 4)):
        masks = [blobby_mask(rng, h, w) for _ in range(frames)]
        print(f"\n{w}x{h} x{frames} frames "
              f"(fill {np.mean([m.mean() for m in masks]):.0%})")
        pure = bench(_pure, masks)
        print(f"  pure    label {pure[0]*1e3:8.1f} ms   stats {pure[1]*1e3:7.1f} ms"
              f"   trace {pure[2]*1e3:7.1f} ms")
        if _native is None:
            print("  native  (extension not built)")
            continue
        native = bench(_native, masks)
        print(f"  native  label {native[0]*1e3:8.1f} ms   stats {native[1]*1e3:7.1f} ms"
              f"   trace {native[2]*1e3:7.1f} ms")
        print(f"  speedup label {pure[0]/native[0]:7.1f}x    stats "
              f"{pure[1]/native[1]:6.1f}x    trace {pure[2]/native[2]:6.1f}x")


if __name__ == "__main__":
    main()
