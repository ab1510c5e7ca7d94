"""
Compiled vs pure-numpy backends: batch Viterbi decoding and a short SWVP run.

    python3 benchmarks/bench_kernels.py [--items 1000] [--epochs 3] [--repeat 3]

Both backends must agree exactly; the script checks that before timing.
"""

import argparse
import time

import numpy as np

from swvp import _kernels
from swvp.features import FeatureIndex
from swvp.gamma import GammaScheme
from swvp.synth import get_setup, sample_arrays, sample_dataset, sample_model
from swvp.trainers import TrainConfig, train_swvp


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--items", type=int, default=1000)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = get_setup(1, "desk")
    params = sample_model(spec, 0)
    index = FeatureIndex(spec.n_obs, spec.n_labels)
    X, _ = sample_arrays(params, args.items, spec.length, 1)
    w = np.random.default_rng(2).normal(size=index.size)
    data = sample_dataset(params, args.items, spec.length, 3)
    config = TrainConfig(max_epochs=args.epochs, scheme=GammaScheme.parse("B-WMR", 2.0), jj_policy="single")

    if not _kernels.NUMBA_AVAILABLE:
        print("numba not importable; only the numpy backend is available")
    rows = []
    results = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _kernels.NUMBA_AVAILABLE:
            continue
        _kernels.set_backend(backend)
        # warm-up triggers compilation outside the timed region
        _kernels.decode_batch(w, X[:2], index.offsets, index.n_labels)
        train_swvp(data[:5], index, TrainConfig(max_epochs=1, scheme=config.scheme, jj_policy="single"))
        t_dec, pred = best_of(lambda: _kernels.decode_batch(w, X, index.offsets, index.n_labels), args.repeat)
        t_tr, res = best_of(lambda: train_swvp(data, index, config), args.repeat)
        results[backend] = (pred, res)
        rows.append((backend, t_dec, t_tr))

    if len(results) == 2:
        (p1, r1), (p2, r2) = results["numba"], results["numpy"]
        assert np.array_equal(p1, p2), "decoders disagree"
        assert r1.w == r2.w, "training trajectories disagree"

    print(f"{'backend':<8} {'decode (s)':>12} {'train (s)':>12}   items={args.items} epochs={args.epochs}")
    for backend, t_dec, t_tr in rows:
        print(f"{backend:<8} {t_dec:>12.4f} {t_tr:>12.4f}")
    if len(rows) == 2:
        print(f"speedup  {rows[1][1] / rows[0][1]:>12.1f}x {rows[1][2] / rows[0][2]:>12.1f}x")


if __name__ == "__main__":
    main()
