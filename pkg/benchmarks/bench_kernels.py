"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from pccopula import kernels
from pccopula.estimate import make_family
from pccopula.pcc import PccModel


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, np.pi, (20, 1303))
    cw, sw = rng.standard_normal((20, 257)), rng.standard_normal((20, 257))
    eps = rng.standard_normal(5000)
    d = 20
    rho = np.full((d, d), 0.4)
    np.fill_diagonal(rho, 1.0)
    model = PccModel.from_correlation(rho, make_family("skew-t1-td-1").spec((8.0, -1.0), d))
    u = model.simulate(1303, 1).u

    def density():
        PccModel(model.W, model.lambdas, model.spec, cos=model.cos).copula_log_density(u)

    return {
        "cos_series 20x1303x257": lambda: kernels.cos_series(theta, cw, sw),
        "garch_recursion n=5000": lambda: kernels.garch_recursion(eps, 0.05, 0.08, 0.9, 1.0),
        "copula_log_density d=20 n=1303": density,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"]
    try:
        kernels.use_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy backend only")
    results = {}
    for b in backends:
        kernels.use_backend(b)
        for name, fn in cases().items():
            fn()  # warm-up
            results.setdefault(name, {})[b] = _best(fn, args.repeat)
    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + "     speed-up")
    for name, row in results.items():
        line = f"{name:34s}" + "".join(f"{row[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{row['python'] / row['cython']:12.1f}x"
        print(line)


if __name__ == "__main__":
    main()
