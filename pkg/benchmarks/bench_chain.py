"""Throughput comparison of the chain-solver backends.

Times the compiled extension against the pure-NumPy reference on identical
batches of (detuning, kappa_r, kappa_l) points for a few array sizes, at
two- and three-excitation depth, and reports points/second plus the
multi-threaded figure for the active backend.  No assertions: this is a
reporting tool, the equivalence of the backends is covered by the tests.

Run from the repository root:

    python3 benchmarks/bench_chain.py [--points 4096] [--threads N]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from chiralpb.kernels import backend_name, build_templates, chain_batch, resolve_threads
from chiralpb.model import SystemSpec


def make_base(n_cells: int) -> SystemSpec:
    return SystemSpec(
        n_cells=n_cells,
        cavity_freq=0.0,
        atom_freq=0.0,
        coupling_g=0.8,
        kappa_r=0.5,
        kappa_l=0.5,
    )


def load_impls() -> dict:
    impls = {}
    try:
        impls["cython"] = importlib.import_module("chiralpb.kernels._chain")
    except ImportError:
        pass
    impls["reference"] = importlib.import_module("chiralpb.kernels.reference")
    return impls


def run_impl(impl, tpl, deltas, krs, kls, max_n) -> float:
    out = np.empty((deltas.shape[0], 4), dtype=np.complex128)
    t0 = time.perf_counter()
    impl.chain_points(
        tpl.k0[0], tpl.kr[0], tpl.kl[0],
        tpl.k0[1], tpl.kr[1], tpl.kl[1],
        tpl.k0[2], tpl.kr[2], tpl.kl[2],
        tpl.dims[0], tpl.dims[1], tpl.dims[2],
        tpl.o_vac, tpl.o_cross, tpl.o_12, tpl.o_23,
        deltas, krs, kls, max_n, out,
    )
    return time.perf_counter() - t0


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=4096, help="batch size per case")
    parser.add_argument("--threads", type=int, default=None, help="threads for chain_batch")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    npts = args.points
    deltas = np.ascontiguousarray(rng.uniform(-0.8, 0.8, npts))
    alphas = rng.uniform(0.05, 0.95, npts)
    krs = np.ascontiguousarray(1.0 / (1.0 + alphas))
    kls = np.ascontiguousarray(1.0 - krs)

    impls = load_impls()
    threads = resolve_threads(args.threads)
    print(f"active backend: {backend_name()}; batch {npts} points; {threads} threads")
    print(f"{'case':<16}" + "".join(f"{name + ' pts/s':>18}" for name in impls)
          + f"{'speedup':>10}{'batch(thr) pts/s':>18}")

    for n_cells in (1, 3, 5, 8):
        for max_n in (2, 3):
            tpl = build_templates(make_base(n_cells), max_n=max_n)
            rates = {}
            for name, impl in impls.items():
                run_impl(impl, tpl, deltas[:64], krs[:64], kls[:64], max_n)  # warm-up
                rates[name] = npts / run_impl(impl, tpl, deltas, krs, kls, max_n)
            if "cython" in rates:
                speedup = f"{rates['cython'] / rates['reference']:8.1f}x"
            else:
                speedup = "n/a"
            t0 = time.perf_counter()
            chain_batch(tpl, deltas, krs, kls, threads=args.threads)
            batch_rate = npts / (time.perf_counter() - t0)
            print(
                f"N={n_cells:<2} max_n={max_n:<4}"
                + "".join(f"{rates[name]:>18.0f}" for name in impls)
                + f"{speedup:>10}{batch_rate:>18.0f}"
            )


if __name__ == "__main__":
    main()
