"""Decode + association timing for the numba and pure-numpy kernel backends.

    python3 benchmarks/bench_decode.py [--frames 50] [--repeats 20] [--noise 0.05]
"""
import argparse
import statistics
import time

from armloc import _kernels
from armloc.associate import detect_arms
from armloc.core import PipelineConfig
from armloc.labelgen import render_stack
from armloc.synth import add_noise, noise_rng, synth_frames


def bench(stacks, cfg, repeats):
    for s in stacks[:3]:
        detect_arms(s, cfg)  # warm-up, includes JIT compilation
    per_stack = []
    for s in stacks:
        t = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            detect_arms(s, cfg)
            t.append(time.perf_counter() - t0)
        per_stack.append(min(t))
    return 1e3 * statistics.median(per_stack), 1e3 * max(per_stack)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = PipelineConfig()
    frames = synth_frames(args.frames, args.seed)
    clean = [render_stack(f, cfg) for f in frames]
    noisy = [add_noise(s, args.noise, noise_rng(args.seed, i)) for i, s in enumerate(clean)]

    print(f"{'backend':8} {'input':6} {'median ms':>10} {'worst ms':>9}")
    for name in _kernels.available_backends():
        with _kernels.using_backend(name):
            for label, stacks in (("clean", clean), ("noisy", noisy)):
                med, worst = bench(stacks, cfg, args.repeats)
                print(f"{name:8} {label:6} {med:10.3f} {worst:9.3f}")


if __name__ == "__main__":
    main()
