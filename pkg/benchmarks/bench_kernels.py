"""Time the numba kernels against the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--reps 20000] [--studies 10] [--repeat 5]

Both backends are called directly, so the environment flag is irrelevant here.
The first numba call (compilation) is excluded from the timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from causalmeta import kernels


def _random_counts(rng: np.random.Generator, reps: int, studies: int) -> np.ndarray:
    n1 = rng.integers(20, 400, size=(reps, studies))
    n0 = rng.integers(20, 400, size=(reps, studies))
    a = rng.binomial(n1, 0.3)
    c = rng.binomial(n0, 0.2)
    return np.stack([a, n1 - a, c, n0 - c], axis=-1).astype(np.float64)


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--studies", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    counts = _random_counts(np.random.default_rng(args.seed), args.reps, args.studies)
    code = kernels.measure_code("rr")

    def classical_np():
        theta, var, _ = kernels.study_effects_np(counts, code)
        return kernels.inverse_variance_np(theta, var)

    def classical_nb():
        theta, var, _ = kernels.study_effects_nb(counts, code)
        return kernels.inverse_variance_nb(theta, var)

    cases = {
        "study_effects": (lambda: kernels.study_effects_np(counts, code),
                          lambda: kernels.study_effects_nb(counts, code)),
        "classical_pooled": (classical_np, classical_nb),
        "causal_pooled": (lambda: kernels.causal_pooled_np(counts, code),
                          lambda: kernels.causal_pooled_nb(counts, code)),
    }
    print(f"R={args.reps} K={args.studies} measure=rr, best of {args.repeat}; numba available: "
          f"{kernels.NUMBA_AVAILABLE}")
    print(f"{'kernel':<18}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}  max |diff|")
    for name, (np_fn, nb_fn) in cases.items():
        ref = np_fn()
        t_np = _best(np_fn, args.repeat)
        if not kernels.NUMBA_AVAILABLE:
            print(f"{name:<18}{1e3 * t_np:>12.2f}{'n/a':>12}{'':>10}")
            continue
        got = nb_fn()  # compile
        diff = max(float(np.nanmax(np.abs(np.asarray(x, float) - np.asarray(y, float)))) for x, y in zip(ref, got))
        t_nb = _best(nb_fn, args.repeat)
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
