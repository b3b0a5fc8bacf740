"""Parameter-space campaigns: sweeps, blockade zeros, disorder, scaling fits.

The central objects of study live in the (detuning, chirality) plane: the
two-photon total amplitude p_2 vanishes at isolated points (perfect photon
blockade), and those zeros carry a topological charge — the phase arg p_2
winds by +-2pi around each one.  Zero location therefore proceeds in two
stages: a coarse grid sweep flags every plaquette whose wrapped phase
circulation is +-2pi (robust even when |p_2| has broad shallow valleys),
then a damped Newton iteration on (Re p_2, Im p_2) over (Delta, alpha)
polishes each candidate to the residual floor.

Sweeps run through the batched chain kernels; every row is finished by the
same observable assembly as scatter.scatter_point, so per-point and batched
results are interchangeable.  Disorder ensembles draw one offset sample per
instance, evaluate it on the whole grid (a physical sample measured
everywhere), and aggregate per grid point with a geometric mean, following
how ensemble-averaged blockade maps are usually reported.  Scaling laws
(optimal chirality and detuning versus N) are extracted with deterministic
fits: exact linear regression for linearizable forms and a damped
Gauss-Newton descent for the two bespoke forms.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from chiralpb.kernels import build_templates, chain_batch
from chiralpb.model import DriveFrame, SystemSpec
from chiralpb.scatter import (
    ZERO_TOL_FACTOR,
    ScatterResult,
    VanishingChannelError,
    amplitudes,
    result_from_amplitudes,
)

__all__ = [
    "SweepGrid",
    "SweepTable",
    "ZeroPoint",
    "AlphaOptResult",
    "DisorderTable",
    "FitForm",
    "FitResult",
    "FitError",
    "spec_at_alpha",
    "sweep",
    "find_zeros",
    "boundary_winding",
    "alpha_opt",
    "disorder_ensemble",
    "fit_scaling",
]

logger = logging.getLogger(__name__)

#: Columns of every emitted table, in order.
CSV_HEADER = ("delta_over_kappa", "alpha", "g2", "g3", "T", "R", "arg_p2", "label", "err")

_DEFAULT_QUANTITIES = frozenset({"g2", "T", "R", "arg_p2", "label"})
_KNOWN_QUANTITIES = frozenset({"g2", "g3", "T", "R", "arg_p2", "label"})


def spec_at_alpha(base: SystemSpec, alpha: float) -> SystemSpec:
    """The member of `base`'s family with chirality alpha and the same kappa.

    Sweeping chirality means redistributing a fixed total waveguide rate:
    kappa_r = kappa/(1+alpha), kappa_l = kappa - kappa_r.
    """
    if alpha < 0:
        raise ValueError("chirality must be nonnegative")
    kappa_r = base.kappa / (1.0 + alpha)
    return base.replace(kappa_r=kappa_r, kappa_l=base.kappa - kappa_r)


@dataclass(frozen=True)
class SweepGrid:
    """A rectangular (detuning, chirality) grid around a base spec.

    Axes are (min, max, count) with counts >= 2; detunings are absolute
    rates (divide by base.kappa for the conventional axis).  The per-axis
    count doubles as the sampling-frequency knob: grids with equal counts on
    both axes are the usual square maps, and `with_sampling` rescales both
    counts at once when studying detection density.
    """

    base: SystemSpec
    delta_axis: tuple[float, float, int]
    alpha_axis: tuple[float, float, int]

    def __post_init__(self) -> None:
        for name, (lo, hi, count) in (("delta", self.delta_axis), ("alpha", self.alpha_axis)):
            if count < 2:
                raise ValueError(f"{name} axis needs at least 2 points")
            if not lo < hi:
                raise ValueError(f"{name} axis must be strictly increasing")
        if self.alpha_axis[0] < 0:
            raise ValueError("chirality axis must be nonnegative")

    @property
    def deltas(self) -> np.ndarray:
        lo, hi, count = self.delta_axis
        return np.linspace(lo, hi, count)

    @property
    def alphas(self) -> np.ndarray:
        lo, hi, count = self.alpha_axis
        return np.linspace(lo, hi, count)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.delta_axis[2], self.alpha_axis[2])

    @property
    def sampling_frequency(self) -> tuple[int, int]:
        """Grid counts per axis (the density knob of min-g2 detection studies)."""
        return self.shape

    def with_sampling(self, count: int) -> "SweepGrid":
        """Same region, `count` points on each axis."""
        return replace(
            self,
            delta_axis=(self.delta_axis[0], self.delta_axis[1], count),
            alpha_axis=(self.alpha_axis[0], self.alpha_axis[1], count),
        )

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        """(deltas, alphas) of all grid points, detuning-major row order."""
        d, a = np.meshgrid(self.deltas, self.alphas, indexing="ij")
        return d.ravel(), a.ravel()


@dataclass
class SweepTable:
    """Column-oriented result of a grid campaign (one row per grid point).

    Unrequested or failed quantities are NaN (label: empty string); `err`
    holds a short reason for rows whose evaluation failed.  `extra` carries
    campaign-specific columns (ensemble diagnostics) appended after `err`.
    """

    delta_over_kappa: np.ndarray
    alpha: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    transmission: np.ndarray
    reflection: np.ndarray
    arg_p2: np.ndarray
    label: list[str]
    err: list[str]
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.delta_over_kappa.shape[0]

    def column(self, name: str) -> np.ndarray | list[str]:
        if name in ("T", "transmission"):
            return self.transmission
        if name in ("R", "reflection"):
            return self.reflection
        if name in self.extra:
            return self.extra[name]
        return getattr(self, name)

    def min_g2_location(self) -> tuple[float, float, float]:
        """(delta_over_kappa, alpha, g2) of the smallest finite g2 entry."""
        if not np.any(np.isfinite(self.g2)):
            raise ValueError("table has no finite g2 entries")
        i = int(np.nanargmin(self.g2))
        return float(self.delta_over_kappa[i]), float(self.alpha[i]), float(self.g2[i])

    def write_csv(self, stream: io.TextIOBase) -> None:
        """Emit the fixed header (plus any extra columns) at full precision."""
        writer = csv.writer(stream, lineterminator="\n")
        extras = list(self.extra)
        writer.writerow(list(CSV_HEADER) + extras)
        numeric = [
            self.delta_over_kappa, self.alpha, self.g2, self.g3,
            self.transmission, self.reflection, self.arg_p2,
        ]
        for i in range(len(self)):
            row = [_fmt(col[i]) for col in numeric]
            row.append(self.label[i])
            row.append(self.err[i])
            row.extend(_fmt(self.extra[k][i]) for k in extras)
            writer.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


@dataclass(frozen=True)
class ZeroPoint:
    """A refined perfect-blockade point p_2(Delta*, alpha*) = 0.

    `winding` is the topological charge read off the flagging plaquette;
    `residual` is |p_2| at the refined point (bounded by the same floor the
    scatter module uses to declare analytic zeros).
    """

    detuning: float
    chirality: float
    residual: float
    winding: int


@dataclass(frozen=True)
class AlphaOptResult:
    """Weakest chirality that still yields perfect blockade, and its detuning.

    Unpacks as (alpha_opt, delta_opt).  `alpha_levels` counts the distinct
    chirality levels among all zeros (grouped within 1e-4); `zeros` keeps
    the full refined list for reuse.
    """

    alpha_opt: float
    delta_opt: float
    alpha_levels: int
    zeros: tuple[ZeroPoint, ...]

    def __iter__(self):
        return iter((self.alpha_opt, self.delta_opt))


class FitForm(enum.Enum):
    """Scaling-law model forms for fit_scaling."""

    ALPHA_OPT = "alpha_opt"  # y = 1 - N^eta (c1 e^{-a1 N} + c2 e^{-a2 N})
    DELTA_OPT = "delta_opt"  # y = d_inf - c N^gamma
    POWER_LAW = "power_law"  # y = c N^gamma          (exact fit on log/log)
    LOG_LINEAR = "log_linear"  # log y = a + b N      (exact fit on semilog)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a deterministic least-squares fit.

    For the linearizable forms the residuals (and hence sse/r_squared) are
    measured in the transformed space the regression was solved in; for the
    Gauss-Newton forms they are measured directly.
    """

    form: FitForm
    params: tuple[float, ...]
    sse: float
    r_squared: float
    iterations: int

    def predict(self, n: np.ndarray) -> np.ndarray:
        return _FIT_MODELS[self.form](np.asarray(n, dtype=float), np.array(self.params))


class FitError(RuntimeError):
    """Fit did not converge or the data cannot support the form."""


# --------------------------------------------------------------------------
# grid sweeps


def _batch(spec: SystemSpec, deltas, alphas, max_n: int, threads) -> np.ndarray:
    templates = build_templates(spec, max_n=max_n)
    kappa_rs = spec.kappa / (1.0 + alphas)
    kappa_ls = spec.kappa - kappa_rs
    return chain_batch(templates, deltas, kappa_rs, kappa_ls, max_n=max_n, threads=threads)


def _finish_rows(
    spec: SystemSpec,
    deltas: np.ndarray,
    alphas: np.ndarray,
    amps: np.ndarray,
    want_g3: bool,
    one_pb_threshold: float = 0.01,
) -> SweepTable:
    """Run the shared observable assembly over a batch of chain amplitudes."""
    n = deltas.shape[0]
    cols = {k: np.full(n, np.nan) for k in ("g2", "g3", "t", "r", "arg")}
    labels = [""] * n
    errs = [""] * n
    for i in range(n):
        row = amps[i]
        if not np.all(np.isfinite(row[: (3 if want_g3 else 2)])) or not np.isfinite(row[3]):
            errs[i] = "singular resolvent"
            continue
        try:
            res = result_from_amplitudes(
                spec,
                complex(row[0]),
                complex(row[1]),
                complex(row[2]) if want_g3 else None,
                complex(row[3]),
                one_pb_threshold,
            )
        except VanishingChannelError:
            errs[i] = "vanishing single-photon channel"
            continue
        cols["g2"][i] = res.g2
        cols["g3"][i] = res.g3
        cols["t"][i] = res.transmission
        cols["r"][i] = res.reflection
        cols["arg"][i] = res.arg_p2
        labels[i] = res.label.value
    return SweepTable(
        delta_over_kappa=deltas / spec.kappa,
        alpha=alphas.copy(),
        g2=cols["g2"],
        g3=cols["g3"],
        transmission=cols["t"],
        reflection=cols["r"],
        arg_p2=cols["arg"],
        label=labels,
        err=errs,
    )


def sweep(
    grid: SweepGrid,
    quantities: frozenset[str] | set[str] = _DEFAULT_QUANTITIES,
    threads: int | None = None,
    one_pb_threshold: float = 0.01,
) -> SweepTable:
    """Evaluate the grid, detuning-major, one table row per point.

    `quantities` selects what is computed; requesting g3 adds the
    three-excitation solve chain (the dominant cost for large N).  Labels
    computed without g3 can only distinguish 1PB from none.  Per-point
    failures land in the err column and never abort the sweep.
    """
    unknown = set(quantities) - _KNOWN_QUANTITIES
    if unknown:
        raise ValueError(f"unknown sweep quantities: {sorted(unknown)}")
    want_g3 = "g3" in quantities
    deltas, alphas = grid.flatten()
    amps = _batch(grid.base, deltas, alphas, 3 if want_g3 else 2, threads)
    table = _finish_rows(grid.base, deltas, alphas, amps, want_g3, one_pb_threshold)
    if "g2" not in quantities:
        table.g2[:] = np.nan
    if not want_g3:
        table.g3[:] = np.nan
    if "T" not in quantities:
        table.transmission[:] = np.nan
    if "R" not in quantities:
        table.reflection[:] = np.nan
    if "arg_p2" not in quantities:
        table.arg_p2[:] = np.nan
    if "label" not in quantities:
        table.label = [""] * len(table)
    return table


# --------------------------------------------------------------------------
# zero location


def _total_pair(spec: SystemSpec, frame: DriveFrame) -> tuple[complex, complex]:
    amp = amplitudes(spec, frame, max_n=2)
    return amp.total_2, amp.total_1


def _plaquette_windings(arg: np.ndarray) -> np.ndarray:
    """Phase circulation (in turns) of every grid plaquette.

    arg has shape (n_delta, n_alpha); the return has shape
    (n_delta-1, n_alpha-1) with entries near +-1 marking singularities.
    Four-corner circulation aliases where the phase varies by more than pi
    between neighbouring nodes, so nonzero entries are candidates to refine,
    not verdicts; `boundary_winding` and the per-zero circle charge use
    adaptively subdivided paths that cannot alias.
    """

    def wrap(x: np.ndarray) -> np.ndarray:
        return (x + np.pi) % (2.0 * np.pi) - np.pi

    d_right = wrap(arg[1:, :-1] - arg[:-1, :-1])  # along +delta at low alpha
    d_up = wrap(arg[1:, 1:] - arg[1:, :-1])  # along +alpha at high delta
    d_left = wrap(arg[:-1, 1:] - arg[1:, 1:])
    d_down = wrap(arg[:-1, :-1] - arg[:-1, 1:])
    return (d_right + d_up + d_left + d_down) / (2.0 * np.pi)


def _wrap_angle(x: float) -> float:
    return math.remainder(x, 2.0 * math.pi)


def _path_winding(base: SystemSpec, points: list[tuple[float, float]], max_depth: int = 48) -> float:
    """Accumulated arg p_2 along a polyline, with chord-validated bisection.

    A segment's phase step is trusted only when the chord |p_2(b) - p_2(a)|
    is below 0.7 x min(|p_2(a)|, |p_2(b)|): that bounds the step by ~0.72
    rad and, crucially, fires on antipodal flips across narrow phase creases
    (where naive wrapped differences alias by ~2 pi even though no zero is
    crossed).  Unresolved segments bisect until the chord test passes or the
    depth cap is hit (only possible with a zero essentially on the path).
    Returns the total phase change in radians.
    """

    def p2_at(delta: float, alpha: float) -> complex:
        spec = spec_at_alpha(base, max(alpha, 1e-12))
        p2, _ = _total_pair(spec, DriveFrame.at_detuning(spec, delta))
        return p2

    def segment(q0, z0, q1, z1, depth) -> float:
        if abs(z1 - z0) < 0.7 * min(abs(z0), abs(z1)):
            return _wrap_angle(math.atan2(z1.imag, z1.real) - math.atan2(z0.imag, z0.real))
        if depth >= max_depth:
            logger.warning("path winding hit bisection depth near %s", q0)
            return _wrap_angle(math.atan2(z1.imag, z1.real) - math.atan2(z0.imag, z0.real))
        mid = (0.5 * (q0[0] + q1[0]), 0.5 * (q0[1] + q1[1]))
        zm = p2_at(*mid)
        return segment(q0, z0, mid, zm, depth + 1) + segment(mid, zm, q1, z1, depth + 1)

    values = [p2_at(*p) for p in points]
    total = 0.0
    for k in range(len(points) - 1):
        total += segment(points[k], values[k], points[k + 1], values[k + 1], 0)
    return total


def boundary_winding(spec: SystemSpec, region: SweepGrid, points_per_edge: int = 32) -> int:
    """Net topological charge of p_2 zeros enclosed by the region boundary.

    Walks the rectangle counterclockwise in the (Delta, alpha) plane with
    adaptive bisection of every step, so the count is exact whenever no zero
    sits on the boundary itself.  Matches the sum of `winding` over
    find_zeros output on the same region.
    """
    (d_lo, d_hi, _), (a_lo, a_hi, _) = region.delta_axis, region.alpha_axis
    corners = [(d_lo, a_lo), (d_hi, a_lo), (d_hi, a_hi), (d_lo, a_hi), (d_lo, a_lo)]
    path: list[tuple[float, float]] = []
    for (x0, y0), (x1, y1) in zip(corners[:-1], corners[1:]):
        ts = np.linspace(0.0, 1.0, points_per_edge, endpoint=False)
        path.extend((x0 + t * (x1 - x0), y0 + t * (y1 - y0)) for t in ts)
    path.append(corners[-1])
    total = _path_winding(spec, path)
    return int(round(total / (2.0 * math.pi)))


def _circle_charge(base: SystemSpec, delta: float, alpha: float, radius: float) -> int:
    """Winding of p_2 on a small counterclockwise circle around a zero."""
    kappa = base.kappa
    thetas = np.linspace(0.0, 2.0 * math.pi, 17)
    pts = [
        (delta + radius * kappa * math.cos(t), max(alpha + radius * math.sin(t), 1e-12))
        for t in thetas
    ]
    total = _path_winding(base, pts)
    return int(round(total / (2.0 * math.pi)))


def _newton_refine(
    base: SystemSpec,
    delta0: float,
    alpha0: float,
    bounds: tuple[float, float, float, float],
    max_iterations: int = 50,
) -> tuple[float, float, float, complex, bool]:
    """Polish one zero candidate of p_2 over (Delta, alpha).

    Damped two-dimensional Newton iteration on (Re p_2, Im p_2) with a
    central finite-difference Jacobian; iterates are clamped to `bounds`
    (delta_lo, delta_hi, alpha_lo, alpha_hi).  Returns (delta, alpha,
    |p_2|, p_1, converged).
    """
    kappa = base.kappa
    h_d = 1e-7 * kappa
    h_a = 1e-7
    d_lo, d_hi, a_lo, a_hi = bounds

    def f(delta: float, alpha: float) -> tuple[complex, complex]:
        spec = spec_at_alpha(base, alpha)
        return _total_pair(spec, DriveFrame.at_detuning(spec, delta))

    x = np.array([delta0, alpha0])
    p2, p1 = f(*x)
    for _ in range(max_iterations):
        tol = ZERO_TOL_FACTOR * max(1.0, abs(p1) ** 2)
        if abs(p2) < tol:
            return float(x[0]), float(x[1]), abs(p2), p1, True
        col_d = (np.asarray(f(x[0] + h_d, x[1])[0]) - f(x[0] - h_d, x[1])[0]) / (2 * h_d)
        col_a = (np.asarray(f(x[0], x[1] + h_a)[0]) - f(x[0], x[1] - h_a)[0]) / (2 * h_a)
        jac = np.array(
            [[col_d.real, col_a.real], [col_d.imag, col_a.imag]], dtype=float
        )
        rhs = np.array([p2.real, p2.imag])
        try:
            step = np.linalg.solve(jac, -rhs)
        except np.linalg.LinAlgError:
            return float(x[0]), float(x[1]), abs(p2), p1, False
        lam = 1.0
        while lam > 1e-4:
            trial = x + lam * step
            trial[0] = min(max(trial[0], d_lo), d_hi)
            trial[1] = min(max(trial[1], a_lo), a_hi)
            p2_t, p1_t = f(*trial)
            if abs(p2_t) < abs(p2):
                x, p2, p1 = trial, p2_t, p1_t
                break
            lam *= 0.5
        else:
            return float(x[0]), float(x[1]), abs(p2), p1, False
    tol = ZERO_TOL_FACTOR * max(1.0, abs(p1) ** 2)
    return float(x[0]), float(x[1]), abs(p2), p1, abs(p2) < tol


def find_zeros(
    spec: SystemSpec,
    region: SweepGrid,
    threads: int | None = None,
    max_iterations: int = 50,
) -> list[ZeroPoint]:
    """Locate all perfect-blockade zeros of p_2 inside the region.

    Coarse stage: arg p_2 on the region grid; plaquettes with +-1 turn of
    four-corner circulation become candidates (aliased plaquettes with no
    zero inside are possible and get weeded out by the refinement).  Fine
    stage: damped Newton per candidate; converged zeros are deduplicated
    within 1e-6 in the (Delta/kappa, alpha) plane, their charge is read off
    a small adaptive circle, and the list is returned sorted by decreasing
    chirality (ties by detuning).  Candidates that do not reach the residual
    floor are logged at debug level and dropped.
    """
    deltas, alphas = region.flatten()
    amps = _batch(spec, deltas, alphas, 2, threads)
    if spec.kind.name == "DIRECT_CAVITY_ATOM":
        p2 = amps[:, 1]
    else:
        p2 = 1.0 + 2.0 * amps[:, 0] + amps[:, 1]
    arg = np.angle(p2).reshape(region.shape)
    winding = _plaquette_windings(arg)
    flags = np.argwhere(np.abs(np.rint(winding)) == 1)
    d_ax, a_ax = region.deltas, region.alphas
    # Allow refinement one grid cell beyond the region so boundary-straddling
    # zeros still converge; filter back to the region afterwards.
    d_pad = d_ax[1] - d_ax[0]
    a_pad = a_ax[1] - a_ax[0]
    bounds = (
        d_ax[0] - d_pad, d_ax[-1] + d_pad,
        max(1e-9, a_ax[0] - a_pad), a_ax[-1] + a_pad,
    )
    found: list[tuple[float, float, float]] = []
    for i, j in flags:
        d0 = 0.5 * (d_ax[i] + d_ax[i + 1])
        a0 = 0.5 * (a_ax[j] + a_ax[j + 1])
        d, a, residual, _, ok = _newton_refine(spec, d0, a0, bounds, max_iterations)
        if not ok:
            logger.debug(
                "zero candidate near (delta=%.4g, alpha=%.4g) did not converge "
                "(residual %.3g)", d0, a0, residual,
            )
            continue
        if not (d_ax[0] <= d <= d_ax[-1] and a_ax[0] <= a <= a_ax[-1]):
            continue
        found.append((d, a, residual))
    kappa = spec.kappa
    unique: list[tuple[float, float, float]] = []
    for z in sorted(found, key=lambda z: z[2]):
        if all(
            math.hypot((z[0] - u[0]) / kappa, z[1] - u[1]) > 1e-6 for u in unique
        ):
            unique.append(z)
    zeros: list[ZeroPoint] = []
    for d, a, residual in unique:
        nearest = min(
            (math.hypot((d - u[0]) / kappa, a - u[1]) for u in unique if u != (d, a, residual)),
            default=math.inf,
        )
        radius = min(1e-4, 0.45 * nearest)
        charge = _circle_charge(spec, d, a, radius)
        zeros.append(ZeroPoint(detuning=d, chirality=a, residual=residual, winding=charge))
    # Quantize the chirality key so +-Delta partners (equal alpha up to
    # refinement noise) order by detuning, stable across grid densities.
    zeros.sort(key=lambda z: (-round(z.chirality, 8), z.detuning))
    return zeros


def alpha_opt(
    n_cells: int,
    g: float,
    kappa: float = 1.0,
    region: SweepGrid | None = None,
    threads: int | None = None,
) -> AlphaOptResult:
    """Optimal (weakest) chirality with perfect blockade for an N-cell array.

    Sweeps the default window Delta in [-0.8, 0.8] kappa, alpha in
    [0.001, 0.999] unless a region is given, refines all zeros, and returns
    the one with maximum alpha together with |Delta| there.  The number of
    distinct alpha levels (grouped within 1e-4) is reported alongside.
    """
    base = SystemSpec(
        n_cells=n_cells,
        cavity_freq=0.0,
        atom_freq=0.0,
        coupling_g=g,
        kappa_r=kappa / 2.0,
        kappa_l=kappa / 2.0,
    )
    if region is None:
        region = SweepGrid(
            base=base,
            delta_axis=(-0.8 * kappa, 0.8 * kappa, 240),
            alpha_axis=(0.001, 0.999, 240),
        )
    else:
        region = replace(region, base=base)
    zeros = find_zeros(base, region, threads=threads)
    if not zeros:
        raise ValueError("no perfect PB in region")
    best = max(zeros, key=lambda z: z.chirality)
    levels = _count_levels([z.chirality for z in zeros], 1e-4)
    return AlphaOptResult(
        alpha_opt=best.chirality,
        delta_opt=abs(best.detuning),
        alpha_levels=levels,
        zeros=tuple(zeros),
    )


def _count_levels(values: list[float], tol: float) -> int:
    levels = 0
    last = None
    for v in sorted(values):
        if last is None or v - last > tol:
            levels += 1
        last = v
    return levels


# --------------------------------------------------------------------------
# disorder ensembles


DisorderTable = SweepTable


def disorder_ensemble(
    spec: SystemSpec,
    strength_w: float,
    n_instances: int,
    seed: int,
    grid: SweepGrid,
    threads: int | None = None,
) -> SweepTable:
    """Geometric-mean g2 map over an ensemble of disordered arrays.

    Every instance draws one vector of cavity and atom frequency offsets
    (uniform in [-W, W] kappa, replacing the base spec's own offsets) and is
    evaluated on the full grid, so a grid point's statistics aggregate the
    same physical samples everywhere.  Instance k's draw comes from child k
    of SeedSequence(seed), making the whole ensemble a pure function of
    (spec, W, n_instances, seed, grid).  The g2 column holds the geometric
    mean exp(mean log g2); arithmetic mean, minimum and the per-point count
    of successful instances ride along as extra columns (g2_mean, g2_min,
    n_ok).  Instances that fail at a point are excluded there.  When every
    instance produced the identical value (W = 0 in particular) the mean
    passes that value through untouched, keeping the zero-disorder ensemble
    bit-identical to the clean sweep.
    """
    if strength_w < 0:
        raise ValueError("disorder strength must be nonnegative")
    if n_instances < 1:
        raise ValueError("need at least one instance")
    from chiralpb.model import sample_disorder

    deltas, alphas = grid.flatten()
    npts = deltas.shape[0]
    samples = np.full((n_instances, npts), np.nan)
    children = np.random.SeedSequence(seed).spawn(n_instances)
    table = None
    for k in range(n_instances):
        inst = sample_disorder(spec, strength_w, children[k])
        amps = _batch(inst, deltas, alphas, 2, threads)
        inst_table = _finish_rows(inst, deltas, alphas, amps, want_g3=False)
        samples[k] = inst_table.g2
        if table is None:
            table = inst_table  # reuse axes/shape of the first instance
    assert table is not None
    valid = np.isfinite(samples)
    n_ok = valid.sum(axis=0)
    geo = np.full(npts, np.nan)
    amean = np.full(npts, np.nan)
    gmin = np.full(npts, np.nan)
    for i in range(npts):
        vals = samples[valid[:, i], i]
        if vals.size == 0:
            continue
        amean[i] = vals.mean()
        gmin[i] = vals.min()
        if np.all(vals == vals[0]):
            geo[i] = vals[0]
        else:
            geo[i] = math.exp(float(np.mean(np.log(vals))))
    errs = ["" if n else "all instances failed" for n in n_ok]
    return SweepTable(
        delta_over_kappa=deltas / spec.kappa,
        alpha=alphas.copy(),
        g2=geo,
        g3=np.full(npts, np.nan),
        transmission=np.full(npts, np.nan),
        reflection=np.full(npts, np.nan),
        arg_p2=np.full(npts, np.nan),
        label=[""] * npts,
        err=errs,
        extra={"g2_mean": amean, "g2_min": gmin, "n_ok": n_ok.astype(float)},
    )


# --------------------------------------------------------------------------
# scaling-law fits


def _model_alpha_opt(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    c1, a1, c2, a2, eta = p
    return 1.0 - n**eta * (c1 * np.exp(-a1 * n) + c2 * np.exp(-a2 * n))


def _model_delta_opt(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    d_inf, c, gamma = p
    return d_inf - c * n**gamma


def _model_power_law(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    c, gamma = p
    return c * n**gamma


def _model_log_linear(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    a, b = p
    return np.exp(a + b * n)


_FIT_MODELS = {
    FitForm.ALPHA_OPT: _model_alpha_opt,
    FitForm.DELTA_OPT: _model_delta_opt,
    FitForm.POWER_LAW: _model_power_law,
    FitForm.LOG_LINEAR: _model_log_linear,
}

_N_PARAMS = {
    FitForm.ALPHA_OPT: 5,
    FitForm.DELTA_OPT: 3,
    FitForm.POWER_LAW: 2,
    FitForm.LOG_LINEAR: 2,
}


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Exact least squares y ~ a + b x; returns (a, b, sse, r2)."""
    coeffs, *_ = np.linalg.lstsq(np.column_stack([np.ones_like(x), x]), y, rcond=None)
    resid = y - (coeffs[0] + coeffs[1] * x)
    sse = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / tss if tss > 0 else 1.0
    return float(coeffs[0]), float(coeffs[1]), sse, r2


def fit_scaling(
    points: list[tuple[float, float]],
    form: FitForm,
    initial_guess: tuple[float, ...] | None = None,
    max_iterations: int = 500,
) -> FitResult:
    """Fit a scaling form to (N, value) points deterministically.

    POWER_LAW and LOG_LINEAR are solved by exact linear regression on the
    appropriate transform (values must be positive); ALPHA_OPT and DELTA_OPT
    run a damped Gauss-Newton (Levenberg) descent from `initial_guess`,
    whose defaults are representative magnitudes of the published scaling
    constants.  Identical inputs produce identical results.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("points must be (N, value) pairs")
    n, y = data[:, 0], data[:, 1]
    if data.shape[0] < _N_PARAMS[form]:
        raise FitError(f"{form.value} needs at least {_N_PARAMS[form]} points")

    if form is FitForm.POWER_LAW:
        if np.any(y <= 0) or np.any(n <= 0):
            raise FitError("power-law fit needs positive N and values")
        a, b, sse, r2 = _linear_fit(np.log(n), np.log(y))
        return FitResult(form, (math.exp(a), b), sse, r2, 0)
    if form is FitForm.LOG_LINEAR:
        if np.any(y <= 0):
            raise FitError("log-linear fit needs positive values")
        a, b, sse, r2 = _linear_fit(n, np.log(y))
        return FitResult(form, (a, b), sse, r2, 0)

    if initial_guess is None:
        initial_guess = {
            FitForm.ALPHA_OPT: (1.1, 0.46, 0.29, 0.089, -0.8),
            FitForm.DELTA_OPT: (0.59, 0.35, -0.57),
        }[form]
    params = np.asarray(initial_guess, dtype=float)
    if params.shape[0] != _N_PARAMS[form]:
        raise ValueError(f"{form.value} takes {_N_PARAMS[form]} parameters")
    model = _FIT_MODELS[form]

    def sse_of(p: np.ndarray) -> float:
        r = model(n, p) - y
        return float(r @ r)

    lam = 1e-3
    sse = sse_of(params)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        r = model(n, params) - y
        jac = np.empty((n.shape[0], params.shape[0]))
        for j in range(params.shape[0]):
            h = 1e-7 * max(1.0, abs(params[j]))
            up, down = params.copy(), params.copy()
            up[j] += h
            down[j] -= h
            jac[:, j] = (model(n, up) - model(n, down)) / (2 * h)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        stepped = False
        for _ in range(40):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-30), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            trial_sse = sse_of(trial)
            if np.isfinite(trial_sse) and trial_sse <= sse:
                improvement = sse - trial_sse
                params, sse = trial, trial_sse
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not stepped:
            break
        if improvement <= 1e-15 * max(sse, 1e-300):
            break
    else:
        raise FitError(f"no convergence after {max_iterations} iterations (sse={sse:.3g})")
    if not np.all(np.isfinite(params)):
        raise FitError("fit diverged to non-finite parameters")
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / tss if tss > 0 else 1.0
    return FitResult(form, tuple(float(p) for p in params), sse, r2, iterations)
