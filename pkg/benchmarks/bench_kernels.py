"""Compiled vs pure-Python kernels: wall-clock time and agreement.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import time

import numpy as np

from modwave import kernels
from modwave.chain import ChainSpec, propagate
from modwave.mathieu import trace_grid


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def chain_case(backend, spec, bloch=None):
    dim = 2 * (spec.z if bloch is not None else spec.n_sites)
    eye = np.eye(dim, dtype=complex if bloch is not None else float)
    return lambda: propagate(spec, eye, 0.0, spec.tau, bloch=bloch, backend=backend)


def mathieu_case(backend, nd, ne):
    return lambda: trace_grid((0, 8), (0, 6), nd, ne, jobs=1, backend=backend).values


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    spec = ChainSpec(z=8, cells=4, dk=0.3, dm=0.2, nu=0.5)
    cases = [
        ("chain_integrate, full chain 32 sites", lambda b: chain_case(b, spec)),
        ("chain_integrate, Bloch cell 8 sites", lambda b: chain_case(b, spec, bloch=np.exp(0.7j))),
        ("mathieu_traces, 100 x 20 grid", lambda b: mathieu_case(b, 100, 20)),
    ]
    print(f"{'kernel':40s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, make in cases:
        t_py, ref = best_of(make("python"), args.repeat)
        t_c, out = best_of(make("compiled"), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
        print(f"{name:40s} {t_py:10.3f} {t_c:11.3f} {t_py / t_c:7.1f}x {diff:10.2e}")


if __name__ == "__main__":
    main()
