"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeat 5]

Prints one CSV row per (kernel, n, backend) with the best time over the
repeats, and the speedup of the compiled core over the fallback.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from dichotomy import kernels
from dichotomy.engine import DichotomySolver
from dichotomy.tridiag import random_dominant


def bench(sizes, repeat):
    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the fallback is timed", file=sys.stderr)
    rows = []
    for n in sizes:
        A = random_dominant(n, rng)
        f = rng.standard_normal(n)
        jobs = {
            "thomas": lambda: kernels.thomas(A.lower, A.diag, A.upper, f),
            "pivot_solve": lambda: kernels.pivot_solve(A.lower, A.diag, A.upper, f),
            "dichotomy_p8": lambda: solver.solve(f),
        }
        for name in backends:
            kernels.use_backend(name)
            solver = DichotomySolver(A, 8).prepare()
            for kernel, job in jobs.items():
                best = min(timeit.repeat(job, number=1, repeat=repeat))
                rows.append({"kernel": kernel, "n": n, "backend": name, "seconds": best})
    kernels.use_backend("cython" if "cython" in backends else "python")
    times = {(r["kernel"], r["n"], r["backend"]): r["seconds"] for r in rows}
    for r in rows:
        py = times.get((r["kernel"], r["n"], "python"))
        r["speedup_vs_python"] = py / r["seconds"] if py else ""
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rows = bench([int(s) for s in args.sizes.split(",")], args.repeat)
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)


if __name__ == "__main__":
    main()
