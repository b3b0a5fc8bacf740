"""Pure-numpy fallback backend for the batched resolvent chain.

Implements the same `chain_points` contract as the compiled extension using
stacked LAPACK solves (`numpy.linalg.solve` on (m, d, d) batches).  Points
are processed in fixed-size chunks to bound the memory of the stacked
blocks; a chunk whose batch solve reports singularity is retried point by
point so only the genuinely singular points degrade to NaN rows.
"""
from __future__ import annotations

import numpy as np

_CHUNK = 256


def _solve_stack(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a[i] x[i] = b[i] for each i, NaN-filling singular systems."""
    try:
        x = np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        x = np.empty_like(b)
        for i in range(a.shape[0]):
            try:
                x[i] = np.linalg.solve(a[i], b[i])
            except np.linalg.LinAlgError:
                x[i] = np.nan
        return x
    # LAPACK can also return non-finite rows without raising (overflow);
    # normalize those to NaN so callers see one sentinel.
    bad = ~np.all(np.isfinite(x), axis=1)
    if np.any(bad):
        x[bad] = np.nan
    return x


def chain_points(
    k0_1, kr_1, kl_1,
    k0_2, kr_2, kl_2,
    k0_3, kr_3, kl_3,
    d1: int, d2: int, d3: int,
    o_vac, o_cross, o_12, o_23,
    deltas, kappa_rs, kappa_ls,
    max_n: int,
    out,
) -> None:
    K1 = (k0_1.reshape(d1, d1, order="F"), kr_1.reshape(d1, d1, order="F"),
          kl_1.reshape(d1, d1, order="F"))
    if max_n >= 2 and d2:
        K2 = (k0_2.reshape(d2, d2, order="F"), kr_2.reshape(d2, d2, order="F"),
              kl_2.reshape(d2, d2, order="F"))
        O12 = o_12.reshape(d1, d2, order="F")
    if max_n >= 3 and d3:
        K3 = (k0_3.reshape(d3, d3, order="F"), kr_3.reshape(d3, d3, order="F"),
              kl_3.reshape(d3, d3, order="F"))
        O23 = o_23.reshape(d2, d3, order="F")

    npts = deltas.shape[0]
    out[:, 1] = 0.0
    out[:, 2] = 0.0
    for lo in range(0, npts, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, npts))
        kr = kappa_rs[sl]
        kl = kappa_ls[sl]
        dl = deltas[sl]
        m = dl.shape[0]

        def assemble(level_templates, dim, level):
            t0, tr, tl = level_templates
            a = t0[None, :, :] + kr[:, None, None] * tr + kl[:, None, None] * tl
            idx = np.arange(dim)
            a[:, idx, idx] += (-1j * level) * dl[:, None]
            return a

        x1 = _solve_stack(assemble(K1, d1, 1), np.broadcast_to(np.conj(o_vac), (m, d1)))
        out[sl, 0] = kr * (x1 @ o_vac)
        out[sl, 3] = np.sqrt(kr * kl) * (x1 @ o_cross)
        if max_n < 2 or not d2:
            continue
        x2 = _solve_stack(assemble(K2, d2, 2), x1 @ np.conj(O12))
        out[sl, 1] = kr**2 * ((x2 @ O12.T) @ o_vac)
        if max_n < 3 or not d3:
            continue
        x3 = _solve_stack(assemble(K3, d3, 3), x2 @ np.conj(O23))
        out[sl, 2] = kr**3 * (((x3 @ O23.T) @ O12.T) @ o_vac)
