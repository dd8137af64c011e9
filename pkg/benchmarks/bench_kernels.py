"""Compare the compiled and pure-numpy simulation backends.

Runs the full Monte Carlo engine once per backend and mechanism, reports the
best wall time over a few repeats and checks that both backends agree.

    python3 benchmarks/bench_kernels.py --samples 1000000 --repeat 3
"""

import argparse
import time

from privremap import Mechanism, ModelParams, run_monte_carlo
from privremap.kernels import available_backends


def best_time(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=1_000_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    params = ModelParams(1.0, 1.0, 1.0, 1.0, 0.5)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}; samples={args.samples}; threads={args.threads}")
    print(f"{'mechanism':<12}{'backend':<8}{'best s':>10}{'Msamples/s':>12}")

    mismatches = 0
    for mechanism in Mechanism:
        results = {}
        for name in backends:
            def run():
                return run_monte_carlo(params, mechanism, args.samples, args.seed,
                                       workers=args.threads, backend=name)
            run_monte_carlo(params, mechanism, 1000, 0, backend=name)  # warm the JIT
            elapsed, report = best_time(run, args.repeat)
            results[name] = report
            print(f"{mechanism.value:<12}{name:<8}{elapsed:>10.3f}{args.samples / elapsed / 1e6:>12.2f}")
        if len(results) > 1:
            ref, other = results["numpy"], results["numba"]
            for metric in ("u", "p_loc", "p_model"):
                x, y = getattr(ref, metric).empirical, getattr(other, metric).empirical
                if abs(x - y) > 1e-9 * (1.0 + abs(x)):
                    mismatches += 1
                    print(f"  mismatch {metric}: numpy={x!r} numba={y!r}")
    print("backends agree" if mismatches == 0 else f"{mismatches} mismatches")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
