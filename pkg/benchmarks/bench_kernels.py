#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the NumPy fallback.

Times the traversal kernels (ray casting, log-odds accumulation, beam
painting), the convolution lowering (im2col/col2im), and one full network
forward pass under each backend.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import math
import time

import numpy as np

from gridnav import kernels
from gridnav.gridworld import CellState, Pose
from gridnav.nn import DetectorNet, NetSpec
from gridnav.scansim import LidarParams, cast_scan
from gridnav.evalkit import generate_world, SynthParams


def timeit(fn, repeats):
    fn()     # warmup
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def build_cases(quick):
    world, _ = generate_world("bench", seed=7, params=SynthParams())
    grid = world.grid
    pose = Pose(4.0, grid.height * grid.resolution / 2.0, 0.0)
    lidar = LidarParams()
    rng = np.random.default_rng(0)

    n_beams = 541
    ang = np.linspace(-3 * math.pi / 4, 3 * math.pi / 4, n_beams)
    ex = 200 + rng.uniform(40, 260, n_beams)
    ey = 200 + rng.uniform(-180, 180, n_beams)
    hit = (rng.random(n_beams) < 0.8).astype(np.uint8)
    acc = np.zeros(grid.cells.shape, dtype=np.float32)
    img = np.full((488, 488), 128, dtype=np.uint8)

    x_small = rng.random((8 if quick else 60, 16, 62, 62), dtype=np.float32)
    cols_shape = kernels.im2col(x_small, 3, 3, 2, 1).shape
    g_small = rng.random(cols_shape, dtype=np.float32)

    net = DetectorNet(NetSpec(input_px=244), seed=0)
    frame = rng.random((1, 1, 244, 244), dtype=np.float32)

    return {
        "raycast (541 beams)": lambda: cast_scan(grid, pose, lidar),
        "accumulate_beams": lambda: kernels.accumulate_beams(
            acc, 200.0, 200.0, ex, ey, hit, -0.4, 0.85),
        "paint_beams": lambda: kernels.paint_beams(
            img, 244.0, 487.5, ex, ey, hit, 255),
        "im2col (60x16x62x62)": lambda: kernels.im2col(x_small, 3, 3, 2, 1),
        "col2im (60x16x62x62)": lambda: kernels.col2im(
            g_small, x_small.shape, 3, 3, 2, 1),
        "net forward 244px": lambda: net.forward(frame, frame),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer repeats")
    args = ap.parse_args()
    repeats = 3 if args.quick else 10

    backends = kernels.available_backends()
    results = {}
    for backend in backends:
        kernels.use_backend(backend)
        cases = build_cases(args.quick)
        results[backend] = {name: timeit(fn, repeats)
                            for name, fn in cases.items()}

    names = list(next(iter(results.values())))
    width = max(len(n) for n in names)
    header = f"{'kernel':<{width}}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name in names:
        row = f"{name:<{width}}"
        for b in backends:
            row += f"{results[b][name] * 1000:>12.2f}ms"
        if len(backends) == 2:
            ratio = results["python"][name] / results["compiled"][name]
            row += f"{ratio:>9.1f}x"
        print(row)
    if "compiled" not in backends:
        print("\ncompiled backend not built; showing NumPy fallback only")


if __name__ == "__main__":
    main()
