"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the recurrent encoder and the pairwise attention block, forward and
backward, at production sizes (T=30, 300-d inputs, 64 units per direction),
plus one full training example (forward + backward + optimizer step) through
each backend.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from sprl.kernels import numpy_impl

try:
    from sprl.kernels import numba_impl
except ImportError:
    numba_impl = None


def timeit(fn, repeats):
    fn()  # warm-up (and JIT compilation for the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    T, D, H, A = 30, 300, 64, 64
    S = 2 * H
    x = rng.normal(size=(T, D)).astype(np.float32)
    w = rng.normal(scale=0.05, size=(4 * H, D)).astype(np.float32)
    u = rng.normal(scale=0.1, size=(4 * H, H)).astype(np.float32)
    b = np.zeros(4 * H, dtype=np.float32)
    dh = rng.normal(size=(T, H)).astype(np.float32)
    s = rng.normal(size=(T, S)).astype(np.float32)
    q = rng.normal(scale=0.1, size=(A, S)).astype(np.float32)
    k = rng.normal(scale=0.1, size=(A, S)).astype(np.float32)
    beta = np.zeros(A, dtype=np.float32)
    v = rng.normal(scale=0.1, size=(A,)).astype(np.float32)
    alpha = np.zeros(1, dtype=np.float32)
    dz = rng.normal(size=(T, S)).astype(np.float32)

    impls = [("numpy", numpy_impl)] + ([("numba", numba_impl)] if numba_impl else [])
    rows = []
    for label, impl in impls:
        cache = impl.lstm_forward(x, w, u, b)
        att_cache = impl.attention_forward(s, q, k, beta, v, alpha)
        rows.append((label, "lstm forward", timeit(lambda: impl.lstm_forward(x, w, u, b), repeats)))
        rows.append(
            (label, "lstm backward", timeit(lambda: impl.lstm_backward(dh, x, w, u, *cache), repeats))
        )
        rows.append(
            (
                label,
                "attention forward",
                timeit(lambda: impl.attention_forward(s, q, k, beta, v, alpha), repeats),
            )
        )
        rows.append(
            (
                label,
                "attention backward",
                timeit(
                    lambda: impl.attention_backward(dz, s, q, k, v, *att_cache[1:]), repeats
                ),
            )
        )
    return rows


def bench_train_step(repeats):
    import sprl.autodiff as ad
    import sprl.kernels as kernels
    from sprl.dataset import TAG_ARGUMENT, TAG_OTHER, TAG_PREDICATE, PreparedExample
    from sprl.model import ModelConfig, ModelParams
    from sprl.training import TrainConfig, build_loss

    rng = np.random.default_rng(1)
    config = ModelConfig(mode="multilabel", n_properties=18, input_dim=300, seed=0)
    params = ModelParams.initialize(config)
    state = ad.AdamState(params.arrays)
    tags = np.full(30, TAG_OTHER, dtype=np.int8)
    tags[10] = TAG_PREDICATE
    tags[20:23] = TAG_ARGUMENT
    example = PreparedExample(
        id="bench",
        vectors=rng.normal(size=(30, 300)).astype(np.float32),
        tags=tags,
        labels=rng.random(18) > 0.5,
        likert=rng.uniform(1, 5, 18).astype(np.float32),
    )
    train_config = TrainConfig(mode="multilabel", seed=0)

    def step():
        graph = ad.Graph()
        loss, _ = build_loss(example, params.bind(graph), config, train_config, graph)
        grads = ad.backward(graph, loss)
        ad.adam_step(params.arrays, grads, state, train_config.learning_rate)

    return kernels.BACKEND, timeit(step, repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rows = bench_kernels(args.repeats)
    width = max(len(r[1]) for r in rows)
    by_kernel = {}
    print(f"{'kernel':<{width}}  {'backend':<7}  best time")
    for label, kernel, seconds in rows:
        by_kernel.setdefault(kernel, {})[label] = seconds
        print(f"{kernel:<{width}}  {label:<7}  {seconds * 1e6:9.1f} us")
    if numba_impl:
        print()
        for kernel, times in by_kernel.items():
            print(f"{kernel:<{width}}  numba speedup: {times['numpy'] / times['numba']:5.1f}x")

    backend, seconds = bench_train_step(args.repeats)
    print(f"\nfull train step (T=30, 300-d input, |P|=18) on the active backend "
          f"[{backend}]: {seconds * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
