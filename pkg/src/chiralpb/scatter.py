"""Few-photon scattering amplitudes, correlations, and phase classification.

For a weak coherent drive at frequency w_d, the n-photon equal-time output
amplitudes of the array follow from the resolvent of the effective
Hamiltonian on the n-excitation subspace,

    K_w(n) = -i (H_eff^(n) - w),   w = n w_d,

through the alternating chain of collapse blocks O_{n-1,n} (right-moving):

    P_1(0) = O_01 K^-1(1) O_01+,
    P_2(0) = O_01 O_12 K^-1(2) O_12+ K^-1(1) O_01+,
    P_3(0) = O_01 O_12 O_23 K^-1(3) O_23+ K^-1(2) O_12+ K^-1(1) O_01+.

P_n is the amplitude for all n photons to be absorbed and re-emitted
forward.  For side-coupled arrays photons can also pass the array freely, so
the total n-photon amplitude interferes free propagation with every partial
absorption pattern,

    p_n = sum_m binom(n, m) P_m       (P_0 = 1),

while direct-coupled cavities admit only the full absorption path, p_n = P_n.
All amplitudes here are the time-independent factors: free-propagation
phases e^{-i n w_d t} and constant i^n prefactors are dropped, since every
reported observable (g^(n), T, R, arg p_2) is insensitive to them.

Correlations, transmission and reflection:

    g^(n)(0) = |p_n|^2 / |p_1|^(2n),
    T = |1 + P_1|^2,   R = |O^l_01 K^-1(1) O^r_01+|^2    (side-coupled),

with T and R exchanging roles for direct-coupled cavities (the cross-port
amplitude of a two-sided cavity is what the side-coupled geometry calls
reflection; this is the unique assignment with T + R = 1 in the lossless
case).  Everything in this module is a pure function of (spec, frame); the
resolvent factorizations of one evaluation point are shared across the
chain stages.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from chiralpb.model import (
    DEFAULT_DIM_CAP,
    CouplingKind,
    Direction,
    DriveFrame,
    OperatorBlock,
    SystemSpec,
    build_collapse,
    build_h_eff,
    count_states,
)

__all__ = [
    "AmplitudeSet",
    "ScatterResult",
    "PhaseLabel",
    "ResolventSingularError",
    "VanishingChannelError",
    "k_solve",
    "amplitudes",
    "photon_amplitude",
    "total_amplitude",
    "correlation",
    "transmission_reflection",
    "classify",
    "result_from_amplitudes",
    "scatter_point",
    "ZERO_TOL_FACTOR",
]

#: |p_2| < ZERO_TOL_FACTOR * max(1, |p_1|^2) counts as an analytic zero of
#: the two-photon amplitude (double precision leaves ~1e-12 relative noise
#: after a five-solve chain, so 1e-10 is a safe two-decade margin).
ZERO_TOL_FACTOR = 1e-10

#: Below this |p_1| the correlation functions are considered undefined.
_P1_FLOOR = 1e-14


class ResolventSingularError(np.linalg.LinAlgError):
    """K_w(n) was numerically singular (a real pole of the closed system)."""


class VanishingChannelError(ZeroDivisionError):
    """|p_1| vanished, leaving g^(n)(0) undefined."""


class PhaseLabel(enum.Enum):
    """Photon-statistics regime of one drive point."""

    ONE_PB = "1PB"
    TWO_PB = "2PB"
    PIT = "PIT"
    NONE = "none"


@dataclass(frozen=True)
class AmplitudeSet:
    """Time-independent photon amplitudes of one drive point.

    p_single/p_double/p_triple are the full-absorption amplitudes P_n(0);
    total_n are the path-interfered totals p_n(0) with the free-propagation
    factor set to 1.  Entries beyond the requested max_n are None.
    """

    detuning: float
    p_single: complex
    p_double: complex | None = None
    p_triple: complex | None = None
    total_1: complex = 0.0
    total_2: complex | None = None
    total_3: complex | None = None


@dataclass(frozen=True)
class ScatterResult:
    """Observables of one drive point."""

    g2: float
    g3: float
    transmission: float
    reflection: float
    survival: float
    arg_p2: float
    label: PhaseLabel


def k_solve(h_block: OperatorBlock, total_freq: float, rhs: np.ndarray) -> np.ndarray:
    """Solve K_w x = rhs with K_w = -i(H_eff^(n) - w I), w the total frequency.

    Uses one dense LU factorization.  Call sites that need several solves
    against the same block at the same frequency should use `amplitudes`,
    which shares factors across the whole chain.
    """
    h = h_block.entries
    if rhs.shape[0] != h.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match block dim {h.shape[0]}")
    k = -1j * h
    k.flat[:: k.shape[0] + 1] += 1j * total_freq
    return _solve_checked(_lu(k), rhs)


def _lu(k: np.ndarray):
    # Exactly singular K is reported through ResolventSingularError by
    # _solve_checked; scipy's advance warning would just duplicate it.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        return lu_factor(k, check_finite=False)


def _solve_checked(lu_piv, rhs: np.ndarray) -> np.ndarray:
    x = lu_solve(lu_piv, rhs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise ResolventSingularError("resolvent singular")
    return x


class _ChainPoint:
    """One (spec, drive) evaluation with resolvent factors shared lazily."""

    def __init__(self, spec: SystemSpec, frame: DriveFrame, dim_cap: int = DEFAULT_DIM_CAP):
        self.spec = spec
        self.frame = frame
        self.dim_cap = dim_cap
        self._p: dict[int, complex] = {0: 1.0 + 0.0j}
        self._x: dict[int, np.ndarray] = {}  # K^-1(n) (chain vector) per n
        self._o: dict[int, np.ndarray] = {}  # right O_{n-1,n} blocks

    def _o_right(self, n: int) -> np.ndarray:
        if n not in self._o:
            self._o[n] = build_collapse(
                self.spec, n, Direction.RIGHT, dim_cap=self.dim_cap
            ).entries
        return self._o[n]

    def _chain_to(self, n: int) -> None:
        """Extend the solve chain up to level n (no-op if already there)."""
        spec, wd = self.spec, self.frame.drive_freq
        for level in range(len(self._x) + 1, n + 1):
            if count_states(spec, level) == 0:
                # No states to absorb into (e.g. more photons than bare
                # atoms): the full-absorption amplitude vanishes, and so do
                # all deeper ones.
                for deeper in range(level, n + 1):
                    self._p[deeper] = 0.0 + 0.0j
                return
            o = self._o_right(level)
            if level == 1:
                rhs = o.conj().T[:, 0]
            else:
                rhs = o.conj().T @ self._x[level - 1]
            h = build_h_eff(spec, level, dim_cap=self.dim_cap).entries
            k = -1j * h
            k.flat[:: k.shape[0] + 1] += 1j * level * wd
            x = _solve_checked(_lu(k), rhs)
            self._x[level] = x
            # Close the chain: apply the O blocks back down to the vacuum.
            vec = x
            for down in range(level, 0, -1):
                vec = self._o_right(down) @ vec
            self._p[level] = complex(vec[0])

    def photon_amplitude(self, n: int) -> complex:
        if n not in self._p:
            self._chain_to(n)
        return self._p[n]

    def reflection_amplitude(self) -> complex:
        """O^l_01 K^-1(1) O^r_01+ — single photon out the back port."""
        self._chain_to(1)
        if 1 not in self._x:
            return 0.0 + 0.0j
        o_left = build_collapse(self.spec, 1, Direction.LEFT, dim_cap=self.dim_cap).entries
        return complex((o_left @ self._x[1])[0])


def _total(spec: SystemSpec, p: dict[int, complex], n: int) -> complex:
    if spec.kind is CouplingKind.DIRECT_CAVITY_ATOM:
        return p[n]
    return sum(math.comb(n, m) * p[m] for m in range(n + 1))


def amplitudes(
    spec: SystemSpec,
    frame: DriveFrame,
    max_n: int = 3,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> AmplitudeSet:
    """Evaluate P_1..P_max_n and the totals p_1..p_max_n at one drive point."""
    if not 1 <= max_n <= 3:
        raise ValueError("max_n must be 1, 2 or 3")
    point = _ChainPoint(spec, frame, dim_cap)
    p = {m: point.photon_amplitude(m) for m in range(max_n + 1)}
    return AmplitudeSet(
        detuning=frame.detuning,
        p_single=p[1],
        p_double=p.get(2),
        p_triple=p.get(3),
        total_1=_total(spec, p, 1),
        total_2=_total(spec, p, 2) if max_n >= 2 else None,
        total_3=_total(spec, p, 3) if max_n >= 3 else None,
    )


def photon_amplitude(spec: SystemSpec, frame: DriveFrame, n: int) -> complex:
    """Full-absorption amplitude P_n(0), n in {1, 2, 3}."""
    if not 1 <= n <= 3:
        raise ValueError("n must be 1, 2 or 3")
    return _ChainPoint(spec, frame).photon_amplitude(n)


def total_amplitude(spec: SystemSpec, frame: DriveFrame, n: int) -> complex:
    """Total n-photon amplitude p_n(0) for the spec's coupling kind."""
    if not 1 <= n <= 3:
        raise ValueError("n must be 1, 2 or 3")
    point = _ChainPoint(spec, frame)
    p = {m: point.photon_amplitude(m) for m in range(n + 1)}
    return _total(spec, p, n)


def correlation(spec: SystemSpec, frame: DriveFrame, n: int) -> float:
    """Equal-time correlation g^(n)(0) = |p_n|^2 / |p_1|^(2n), n in {2, 3}."""
    if n not in (2, 3):
        raise ValueError("correlation order must be 2 or 3")
    point = _ChainPoint(spec, frame)
    p = {m: point.photon_amplitude(m) for m in range(n + 1)}
    p1 = _total(spec, p, 1)
    if abs(p1) < _P1_FLOOR:
        raise VanishingChannelError("vanishing single-photon channel")
    return abs(_total(spec, p, n)) ** 2 / abs(p1) ** (2 * n)


def transmission_reflection(
    spec: SystemSpec, frame: DriveFrame, dim_cap: int = DEFAULT_DIM_CAP
) -> tuple[float, float, float]:
    """Single-photon transmission, reflection and survival T + R.

    Side-coupled kinds: T = |1 + P_1|^2, R = |O^l K^-1 O^r+|^2.  For
    direct-coupled cavities the two formulas swap roles (see module
    docstring).  With no loss channels T + R = 1.
    """
    point = _ChainPoint(spec, frame, dim_cap)
    through = abs(1.0 + point.photon_amplitude(1)) ** 2
    cross = abs(point.reflection_amplitude()) ** 2
    if spec.kind is CouplingKind.DIRECT_CAVITY_ATOM:
        t, r = cross, through
    else:
        t, r = through, cross
    return t, r, t + r


def classify(g2: float, g3: float, one_pb_threshold: float = 0.01) -> PhaseLabel:
    """Label a point 1PB / 2PB / PIT by its correlation pair (in that order)."""
    if g2 < 0 or g3 < 0:
        raise ValueError("correlations must be nonnegative")
    if g2 < one_pb_threshold:
        return PhaseLabel.ONE_PB
    if g3 < 1.0 and g2 >= 1.0:
        return PhaseLabel.TWO_PB
    if g2 > 1.0 and g3 > 1.0:
        return PhaseLabel.PIT
    return PhaseLabel.NONE


def result_from_amplitudes(
    spec: SystemSpec,
    p_single: complex,
    p_double: complex,
    p_triple: complex | None,
    cross_amp: complex,
    one_pb_threshold: float = 0.01,
) -> ScatterResult:
    """Assemble the observables of one point from its raw chain amplitudes.

    Takes the full-absorption amplitudes P_1, P_2 (and optionally P_3) plus
    the single-photon cross-port amplitude O^l K^-1 O^r+, forms the totals
    for the spec's coupling kind, and evaluates correlations, T/R/survival,
    arg p_2 and the phase label.  Shared by the per-point chain evaluation
    and the batched sweep kernels; g3 is NaN when P_3 was not computed (NaN
    never classifies as 2PB or PIT).
    """
    p = {0: 1.0 + 0.0j, 1: p_single, 2: p_double}
    if p_triple is not None:
        p[3] = p_triple
    p1 = _total(spec, p, 1)
    p2 = _total(spec, p, 2)
    if abs(p1) < _P1_FLOOR:
        raise VanishingChannelError("vanishing single-photon channel")
    g2 = abs(p2) ** 2 / abs(p1) ** 4
    g3 = abs(_total(spec, p, 3)) ** 2 / abs(p1) ** 6 if p_triple is not None else math.nan
    through = abs(1.0 + p_single) ** 2
    cross = abs(cross_amp) ** 2
    if spec.kind is CouplingKind.DIRECT_CAVITY_ATOM:
        t, r = cross, through
    else:
        t, r = through, cross
    return ScatterResult(
        g2=g2,
        g3=g3,
        transmission=t,
        reflection=r,
        survival=t + r,
        arg_p2=cmath.phase(p2),
        label=classify(g2, g3, one_pb_threshold),
    )


def scatter_point(
    spec: SystemSpec,
    frame: DriveFrame,
    dim_cap: int = DEFAULT_DIM_CAP,
    one_pb_threshold: float = 0.01,
) -> ScatterResult:
    """All observables of one drive point with shared resolvent factors."""
    point = _ChainPoint(spec, frame, dim_cap)
    p = {m: point.photon_amplitude(m) for m in range(4)}
    return result_from_amplitudes(
        spec, p[1], p[2], p[3], point.reflection_amplitude(), one_pb_threshold
    )
