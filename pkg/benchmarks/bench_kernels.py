#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the pure-numpy fallback.

The similarity kernel runs once per training batch, so the interesting
regime is small matrices where per-call overhead dominates. Also times
a full composite loss+gradient step through whichever lane is active.

Usage: python benchmarks/bench_kernels.py [--repeats 2000]
"""

import argparse
import timeit

import numpy as np

from protocite import kernels
from protocite.kernels import _pykernels
from protocite.encoder import EncoderParams, encode_backward, encode_features
from protocite.loss import ClassifierHead, LossWeights, PrototypeBank, loss_backward, loss_forward

try:
    from protocite.kernels import _ckernels
except ImportError:
    _ckernels = None

# (batch, prototypes, dim): training step, evaluation sweep, large sweep.
SHAPES = [(8, 18, 32), (8, 165, 32), (64, 165, 32), (256, 528, 64)]


def _time(fn, repeats):
    best = min(timeit.repeat(fn, number=repeats, repeat=3))
    return best / repeats * 1e6  # microseconds per call


def bench_similarity(repeats: int) -> None:
    print(f"similarity_forward, microseconds/call (best of 3, repeats scaled by size):")
    print(f"{'shape (B,M,d)':>18} {'pure':>10} {'compiled':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    base_cells = SHAPES[0][0] * SHAPES[0][1]
    for b, m, d in SHAPES:
        x = rng.normal(size=(b, d))
        p = rng.normal(size=(m, d))
        scaled = max(5, int(repeats * base_cells / (b * m)))
        pure = _time(lambda: _pykernels.similarity_forward(x, p, 1e-4), scaled)
        if _ckernels is None:
            print(f"{(b, m, d)!s:>18} {pure:>10.1f} {'n/a':>10} {'n/a':>8}")
            continue
        compiled = _time(lambda: _ckernels.similarity_forward(x, p, 1e-4), scaled)
        print(f"{(b, m, d)!s:>18} {pure:>10.1f} {compiled:>10.1f} {pure / compiled:>7.1f}x")


def bench_train_step(repeats: int) -> None:
    rng = np.random.default_rng(1)
    batch, n, k, dim, hash_dim = 8, 10, 5, 32, 4096
    feats = rng.integers(0, 3, size=(batch, hash_dim)).astype(float)
    params = EncoderParams.initialize(hash_dim, dim, seed=0)
    labels = (rng.random((batch, n)) < 0.3).astype(np.uint8)
    labels[:, 0] = 1
    mp = n * k
    prec = rng.normal(size=(mp, dim))
    bank = PrototypeBank(prec, np.repeat(np.arange(n), k), rng.normal(size=(n, dim)), np.arange(n))
    head = ClassifierHead(rng.normal(size=(n, mp + n)) * 0.1, np.zeros(n))
    weights = LossWeights()

    def step():
        emb, cache = encode_features(feats, params)
        _, _, fcache = loss_forward(emb, labels, bank, head, weights)
        grads = loss_backward(fcache)
        encode_backward(grads["d_embeddings"], cache)

    per_call = _time(step, max(1, repeats // 10))
    print(f"\nfull loss+gradient step (B=8, {mp + n} prototypes, d={dim}, H={hash_dim}), "
          f"active lane '{kernels.ACTIVE_LANE}': {per_call:.0f} us/step")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled lane not built; showing pure lane only")
    bench_similarity(args.repeats)
    bench_train_step(args.repeats)


if __name__ == "__main__":
    main()
