"""Batched resolvent-chain evaluation for parameter sweeps.

Grid campaigns evaluate the same chain of small dense solves at 10^4-10^5
(detuning, chirality) points.  The effective Hamiltonian of every
n-excitation block is affine in the waveguide rates,

    K_n(Delta, kr, kl) = K0_n + kr Kr_n + kl Kl_n - i n Delta I,

because kr and kl enter the hops, the collective-loss diagonal, and the
collapse normalizations linearly (everything else — g, detunings, local
losses, disorder — is rate-independent).  `build_templates` extracts the
three coefficient matrices per level once, by exact differencing of
`build_h_eff` at unit rates; `chain_batch` then replays the chain

    P_1 = kr (o x_1),  P_2 = kr^2 (o O_12 x_2),  P_3 = kr^3 (o O_12 O_23 x_3),
    cross = sqrt(kr kl) (o^l x_1),

per point with collapse templates at unit rate.  Two interchangeable
backends implement the inner loop: a compiled extension driving LAPACK
directly with the GIL released (preferred), and a pure-numpy stacked-solve
fallback.  Selection happens at import; `CHIRALPB_KERNEL=reference|cython`
forces a choice, and `CHIRALPB_THREADS` caps the worker pool.

Backends are numerically interchangeable (same templates, same LAPACK
underneath) but not bitwise identical to the per-point `scatter` path; tests
pin agreement at 1e-12 relative.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from chiralpb.model import Direction, SystemSpec, build_collapse, build_h_eff, count_states
from chiralpb.kernels import reference as _reference

__all__ = [
    "ChainTemplates",
    "build_templates",
    "chain_batch",
    "backend_name",
    "resolve_threads",
]

_env = os.environ.get("CHIRALPB_KERNEL", "").strip().lower()
if _env == "reference":
    _impl = _reference
elif _env == "cython":
    from chiralpb.kernels import _chain as _impl  # hard error if missing, as requested
else:
    try:
        from chiralpb.kernels import _chain as _impl
    except ImportError:
        _impl = _reference


def backend_name() -> str:
    """Name of the active batch backend: "cython" or "reference"."""
    return "cython" if _impl.__name__.endswith("_chain") else "reference"


def resolve_threads(explicit: int | None = None) -> int:
    """Worker count: explicit argument, else CHIRALPB_THREADS, else CPU count."""
    if explicit is not None:
        if explicit < 1:
            raise ValueError("thread count must be >= 1")
        return explicit
    env = os.environ.get("CHIRALPB_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CHIRALPB_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ChainTemplates:
    """Rate-affine chain operators of one spec family, flattened for kernels.

    The family is everything in the base spec except (kappa_r, kappa_l),
    which become per-point kernel inputs.  k0/kr/kl hold the -i-premultiplied
    n-excitation coefficient matrices in flat Fortran order; o_right/o_cross
    are unit-rate collapse templates.  Levels with no states store empty
    arrays and yield amplitude 0.
    """

    max_n: int
    dims: tuple[int, int, int]
    k0: tuple[np.ndarray, np.ndarray, np.ndarray]
    kr: tuple[np.ndarray, np.ndarray, np.ndarray]
    kl: tuple[np.ndarray, np.ndarray, np.ndarray]
    o_vac: np.ndarray  # unit right collapse 1 <- vacuum row, shape (d1,)
    o_cross: np.ndarray  # unit left collapse row, shape (d1,)
    o_12: np.ndarray  # unit right collapse (d1 x d2), flat Fortran
    o_23: np.ndarray  # unit right collapse (d2 x d3), flat Fortran


def _flat_f(a: np.ndarray) -> np.ndarray:
    return np.asfortranarray(a, dtype=np.complex128).reshape(-1, order="F")


def build_templates(spec: SystemSpec, max_n: int = 3) -> ChainTemplates:
    """Extract the rate-affine chain templates of `spec` up to level max_n.

    The base spec's own kappa_r/kappa_l are irrelevant (they are kernel
    inputs); its frequencies are rebased so the drive detuning is the only
    frequency a kernel point needs: cavities sit at 0 and atoms keep their
    offset from the cavity line.  Differencing at integer rates is exact for
    the hop entries and exact to one rounding of the loss diagonal.
    """
    if not 1 <= max_n <= 3:
        raise ValueError("max_n must be 1, 2 or 3")
    base = spec.replace(
        cavity_freq=0.0,
        atom_freq=spec.atom_freq - spec.cavity_freq,
        kappa_r=1.0,
        kappa_l=1.0,
    )
    up_r = base.replace(kappa_r=2.0)
    up_l = base.replace(kappa_l=2.0)

    dims = [0, 0, 0]
    k0: list[np.ndarray] = []
    kr: list[np.ndarray] = []
    kl: list[np.ndarray] = []
    empty = np.empty(0, dtype=np.complex128)
    for n in range(1, max_n + 1):
        d = count_states(spec, n)
        dims[n - 1] = d
        if d == 0:
            k0.append(empty)
            kr.append(empty)
            kl.append(empty)
            continue
        h11 = build_h_eff(base, n).entries
        r = build_h_eff(up_r, n).entries - h11
        l = build_h_eff(up_l, n).entries - h11
        c = h11 - r - l
        k0.append(_flat_f(-1j * c))
        kr.append(_flat_f(-1j * r))
        kl.append(_flat_f(-1j * l))
    while len(k0) < 3:
        k0.append(empty)
        kr.append(empty)
        kl.append(empty)

    d1 = dims[0]
    o01 = build_collapse(base, 1, Direction.RIGHT).entries if d1 else np.zeros((1, 0))
    ol1 = build_collapse(base, 1, Direction.LEFT).entries if d1 else np.zeros((1, 0))
    o12 = (
        _flat_f(build_collapse(base, 2, Direction.RIGHT).entries)
        if max_n >= 2 and dims[1]
        else np.empty(0, dtype=np.complex128)
    )
    o23 = (
        _flat_f(build_collapse(base, 3, Direction.RIGHT).entries)
        if max_n >= 3 and dims[2]
        else np.empty(0, dtype=np.complex128)
    )
    return ChainTemplates(
        max_n=max_n,
        dims=(dims[0], dims[1], dims[2]),
        k0=(k0[0], k0[1], k0[2]),
        kr=(kr[0], kr[1], kr[2]),
        kl=(kl[0], kl[1], kl[2]),
        o_vac=np.ascontiguousarray(o01[0], dtype=np.complex128),
        o_cross=np.ascontiguousarray(ol1[0], dtype=np.complex128),
        o_12=o12,
        o_23=o23,
    )


def chain_batch(
    templates: ChainTemplates,
    deltas: np.ndarray,
    kappa_rs: np.ndarray,
    kappa_ls: np.ndarray,
    max_n: int | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Evaluate the chain at many (Delta, kappa_r, kappa_l) points.

    Returns an (npoints, 4) complex array with columns (P_1, P_2, P_3,
    cross); levels beyond max_n (or beyond the templates) are zero.  Points
    whose resolvent is exactly singular come back as NaN rows rather than
    raising, so one bad grid point cannot kill a sweep.
    """
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    kappa_rs = np.ascontiguousarray(kappa_rs, dtype=np.float64)
    kappa_ls = np.ascontiguousarray(kappa_ls, dtype=np.float64)
    if not (deltas.shape == kappa_rs.shape == kappa_ls.shape) or deltas.ndim != 1:
        raise ValueError("deltas, kappa_rs, kappa_ls must be equal-length 1-D arrays")
    if np.any(kappa_rs <= 0) or np.any(kappa_ls < 0):
        raise ValueError("kappa_r must be positive and kappa_l nonnegative")
    n_levels = templates.max_n if max_n is None else max_n
    if not 1 <= n_levels <= templates.max_n:
        raise ValueError(f"max_n must be in [1, {templates.max_n}] for these templates")

    npts = deltas.shape[0]
    out = np.empty((npts, 4), dtype=np.complex128)
    if npts == 0:
        return out
    workers = min(resolve_threads(threads), max(1, npts // 64))

    def run(lo: int, hi: int) -> None:
        _impl.chain_points(
            templates.k0[0], templates.kr[0], templates.kl[0],
            templates.k0[1], templates.kr[1], templates.kl[1],
            templates.k0[2], templates.kr[2], templates.kl[2],
            templates.dims[0], templates.dims[1], templates.dims[2],
            templates.o_vac, templates.o_cross, templates.o_12, templates.o_23,
            deltas[lo:hi], kappa_rs[lo:hi], kappa_ls[lo:hi],
            n_levels, out[lo:hi],
        )

    if workers == 1:
        run(0, npts)
        return out
    chunk = max(64, math.ceil(npts / (workers * 4)))
    bounds = [(lo, min(lo + chunk, npts)) for lo in range(0, npts, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for future in [pool.submit(run, lo, hi) for lo, hi in bounds]:
            future.result()
    return out
