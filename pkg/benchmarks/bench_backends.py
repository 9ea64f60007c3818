"""Compare the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--repeat 3] [--quick]

Times ``sample_graph`` (cell list + union-find with wrap tracking), the
expected mean degree, and one application of the discretised integral
operator, on both backends, after a warm-up call that triggers compilation.
Results are checked to agree before timing is reported.
"""

import argparse
import time

import numpy as np

from spreadperc import Window, ball, mean_degree, sample_graph, sample_poisson
from spreadperc.spectral import OperatorGrid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def graph_cases(quick):
    sides = [64, 128] if quick else [64, 128, 256, 384]
    k = ball(2)
    for side in sides:
        cloud = sample_poisson(Window.cube(float(side), 2), 1.0, side)
        yield f"sample_graph side={side} n={len(cloud)} r=8", \
            lambda b, c=cloud: sample_graph(c, k, 2.0, 8.0, 1, backend=b), \
            lambda x: (x.C1, x.C2, x.component_count, x.wrapping)
        yield f"mean_degree(expected) side={side} r=8", \
            lambda b, c=cloud: mean_degree(c, k, 2.0, 8.0, expected=True, backend=b), \
            lambda x: round(x, 9)


def operator_cases(quick):
    Ls = [4.0, 8.0] if quick else [4.0, 8.0, 16.0]
    for L in Ls:
        for boundary in ("free", "torus"):
            g = OperatorGrid(L, int(8 * L), ball(2), 1.5, boundary=boundary)
            f = np.random.default_rng(0).random(int(np.prod(g.shape)))
            # touch the cached stencil outside the timed region
            g.sparse_stencil
            yield f"operator apply L={L:g} m={g.m} {boundary}", \
                lambda b, g=g, f=f: g.apply(f, backend=b), \
                lambda x: np.round(x, 9).tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    print(f"{'case':48s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, run, key in list(graph_cases(args.quick)) + list(operator_cases(args.quick)):
        run("numba")  # compile / warm caches
        t_nb, a = best_of(lambda: run("numba"), args.repeat)
        t_np, b = best_of(lambda: run("numpy"), args.repeat)
        if key(a) != key(b):
            raise SystemExit(f"backends disagree on {name}")
        print(f"{name:48s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.2f}x")


if __name__ == "__main__":
    main()
