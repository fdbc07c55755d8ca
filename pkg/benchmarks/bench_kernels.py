"""Compare the compiled and pure-Python level kernels.

    python benchmarks/bench_kernels.py [--n 1000] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from onlinefwer import _pykernels
from onlinefwer.kernels import compiled_backend
from onlinefwer.procedures import RiemannSequence


def cases(n, rng):
    p = rng.random(n) ** 2
    xi = rng.random(n)
    lam = np.full(n, 0.5)
    gamma = RiemannSequence().array(n + 1)
    return {
        "adaptive_spending": lambda k: k.adaptive_spending(p, 0.05, 0.5, gamma),
        "geometric": lambda k: k.geometric(xi, 0.05, lam, np.full(n, 0.1)),
        "graph(open)": lambda k: k.graph(p, xi, lam, 0.05, gamma, gamma, False),
        "graph(closed)": lambda k: k.graph(p, xi, lam, 0.05, gamma, gamma, True),
        "spending(closed)": lambda k: k.spending(p, xi, 0.05, 0.5, 1.0, gamma, True),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)]
    if compiled_backend is not None:
        backends.insert(0, ("cython", compiled_backend))
    else:
        print("compiled extension not available; timing the Python fallback only")
    print(f"stream length {args.n}, best of {args.repeat}")
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speed-up':>12}")
    for label, fn in cases(args.n, rng).items():
        times = []
        for _, mod in backends:
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        if len(backends) == 2:
            np.testing.assert_allclose(fn(backends[0][1]), fn(backends[1][1]), rtol=1e-12)
        speed = f"{times[-1] / times[0]:>11.1f}x" if len(times) == 2 else ""
        print(f"{label:<20}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
