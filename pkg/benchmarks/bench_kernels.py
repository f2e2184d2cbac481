"""Time the compiled and pure-Python kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--paths 20000]

Each kernel runs on identical arrays under both backends; the outputs are
compared bit for bit before any timing is reported. The last block times a
whole ``simulate_paths`` call on the mixed fixture under each backend.
"""
import argparse
import timeit

import numpy as np

from levyito import _kernels
from levyito.measure import AtomicMeasure, LevyTriplet
from levyito.simulate import SimConfig, simulate_paths


def _inputs(n_paths, seed=0):
    rng = np.random.default_rng(seed)
    n_draws = 50 * n_paths
    streams = rng.integers(0, 2**40, n_draws, dtype=np.uint64)
    subs = rng.integers(0, 64, n_draws, dtype=np.uint64)
    counters = rng.integers(0, 2**20, n_draws, dtype=np.uint64)
    n_jumps = 20 * n_paths
    path_ids = np.sort(rng.integers(0, n_paths, n_jumps))
    times = rng.uniform(0, 10, n_jumps)
    order = np.lexsort((times, path_ids))
    times = times[order]
    sizes = rng.choice([-1.0, 1.0], n_jumps)[:, None]
    grid_idx = np.searchsorted(np.linspace(0, 10, 101), times)
    mask = sizes[:, 0] > 0
    return {
        "philox_bits": (2024, streams, subs, counters),
        "grid_jump_sums": (path_ids, grid_idx, sizes, n_paths, 101),
        "segment_count_sum": (path_ids, mask, sizes, n_paths),
        "first_masked_time": (path_ids, times, mask, n_paths),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=20_000)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {_kernels.BACKEND})")
    if len(backends) < 2:
        print("compiled backend not built; only the pure-Python kernels can be timed")
    inputs = _inputs(args.paths)
    previous = _kernels.BACKEND
    try:
        print(f"{'kernel':22s}" + "".join(f"{b:>14s}" for b in backends) + "   identical")
        for name, call_args in inputs.items():
            outs, best = {}, {}
            for b in backends:
                _kernels.set_backend(b)
                fn = getattr(_kernels, name)
                outs[b] = fn(*call_args)
                best[b] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
            same = all(_same(outs[backends[0]], outs[b]) for b in backends[1:])
            print(f"{name:22s}" + "".join(f"{best[b] * 1e3:11.2f} ms" for b in backends) + f"   {same}")

        triplet = LevyTriplet(0.0, 1.0, AtomicMeasure.from_atoms([(1.0, 1.0), (-1.0, 1.0)]))
        cfg = SimConfig(10.0, 0.1)
        row = {}
        for b in backends:
            _kernels.set_backend(b)
            row[b] = min(timeit.repeat(lambda: simulate_paths(triplet, cfg, 7, args.paths),
                                       number=1, repeat=max(1, args.repeat // 2)))
        print(f"{'simulate_paths':22s}" + "".join(f"{row[b] * 1e3:11.2f} ms" for b in backends))
    finally:
        _kernels.set_backend(previous)


if __name__ == "__main__":
    main()
