"""Compare the compiled and numpy kernel backends.

Times ``kernel_sums`` (values and gradients) and ``cell_curvature`` on 1D and
2D workloads shaped like the certificate scans, checks that both backends
agree, and prints one row per case. Run ``python benchmarks/bench_kernels.py``
(``--quick`` for smaller sizes).
"""
import argparse
import math
import timeit

import numpy as np

from hkbary import kernels


def _cases(quick):
    rng = np.random.default_rng(12345)
    s = 0.25 if quick else 1.0
    out = []
    # 1D: a 1000-atom sample scanned at kappa/1000 spacing
    src = np.sort(rng.uniform(0.0, 1.0, (int(1000 * s), 1)), axis=0)
    tgt = np.linspace(0.0, 1.0, int(10001 * s)).reshape(-1, 1)
    out.append(("1d sample", src, rng.uniform(0.5, 1.5, src.shape[0]), tgt, 0.1, tgt[1, 0] - tgt[0, 0]))
    # 2D: the 131 x 131 lattice against a scan grid at kappa/25
    n = int(131 * math.sqrt(s))
    g = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(g, g, indexing="ij")
    src2 = np.column_stack([X.ravel(), Y.ravel()])
    t = np.linspace(0.0, 1.0, int(85 * math.sqrt(s)))
    TX, TY = np.meshgrid(t, t, indexing="ij")
    tgt2 = np.column_stack([TX.ravel(), TY.ravel()])
    out.append(("2d lattice", src2, np.full(src2.shape[0], 1.0 / src2.shape[0]), tgt2, 0.3, t[1] - t[0]))
    return out


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true")
    args = p.parse_args(argv)
    backends = ["python"]
    try:
        kernels.get_impl("compiled")
        backends.insert(0, "compiled")
    except RuntimeError:
        print("compiled backend unavailable; timing the numpy fallback only")
    print(f"{'case':<12} {'op':<16} {'sources':>8} {'targets':>8} "
          + " ".join(f"{b + ' [s]':>14}" for b in backends) + f" {'speedup':>8} {'max |diff|':>11}")
    for name, src, coef, tgt, kappa, h in _cases(args.quick):
        # one scan cell per target point
        lo, hi = tgt, tgt + h
        ops = {
            "values": lambda b: kernels.kernel_sums(src, coef, tgt, kappa, grad=False, backend=b),
            "values+grad": lambda b: kernels.kernel_sums(src, coef, tgt, kappa, grad=True, backend=b),
            "cell_curvature": lambda b: kernels.cell_curvature(src, coef, lo, hi, kappa, backend=b),
        }
        for op, fn in ops.items():
            times = {b: _time(lambda b=b: fn(b), args.repeat) for b in backends}
            res = {b: fn(b) for b in backends}
            if len(backends) == 2:
                a, c = res["compiled"], res["python"]
                a = a if isinstance(a, tuple) else (a,)
                c = c if isinstance(c, tuple) else (c,)
                diff = max(float(np.max(np.abs(x - y))) if x.size else 0.0 for x, y in zip(a, c))
                speed = times["python"] / times["compiled"]
            else:
                diff, speed = math.nan, math.nan
            print(f"{name:<12} {op:<16} {src.shape[0]:>8} {tgt.shape[0]:>8} "
                  + " ".join(f"{times[b]:>14.4f}" for b in backends) + f" {speed:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
