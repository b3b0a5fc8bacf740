"""Closed-form amplitude expressions for uniform mirror-configuration arrays.

Every formula here is an independent oracle for the numeric resolvent chain
in chiralpb.scatter: no operator is built, everything reduces to scalar
algebra in the derived drive-frame quantities

    Delta_c  = Delta - i kappa/2              (lossless single-cavity symbol)
    Delta~_c = Delta - i (kappa + kappa_ext)/2
    Delta~_e = (w_e - w_d) - i gamma_e/2
    xi_1     = kappa_l kappa_r
    xi_2     = (Delta~_c Delta~_e - g^2) / Delta~_e.

The single-photon amplitude of an N-cell array admits the continued-fraction
recursion

    y_j = y_{j-1} + (1 - xi_1 y_{j-1}^2 + i kappa y_{j-1}) / (xi_2 + xi_1 y_{j-1}),
    y_0 = 0,    P_1^N(0) = i kappa_r y_N,

whose closed solution is

    P_1^N(0) = 2 [ |1-alpha| (z^N + 1)/(z^N - 1) - (1 + alpha) ]^{-1},
    z = (2 xi_2 + i kappa + s)/(2 xi_2 + i kappa - s),
    s = sqrt(4 xi_1 - kappa^2) = i |kappa_r - kappa_l|.

|z| = 1 exactly when gamma_e = kappa_ext = 0, and with the atom resonant
with the cavity the closed form collapses to

    P_1^N(0) = -(1 - e^{i N theta}) / (1 - alpha e^{i N theta}),
    tan(theta/2) = Delta (1-alpha) kappa / [2 (1+alpha)(Delta^2 - g^2)].

Two- and three-photon amplitudes have closed forms for a single cell and, at
resonance, for any odd N; the perfect-blockade parameter curves follow from
their zeros.  All formulas assume a clean (disorder-free) array in the
mirror configuration; everything else is the numeric chain's job.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from chiralpb.model import CouplingKind, DriveFrame, SystemSpec

__all__ = [
    "FormulaId",
    "ClosedFormResult",
    "p1_closed",
    "p1_recursive",
    "single_cavity_p2_p3",
    "pb_curve_single",
    "odd_resonant",
    "survival_limit",
    "dcc_resonant_p1_p2",
]


class FormulaId(enum.Enum):
    """Identifies which closed form produced a ClosedFormResult."""

    P1_CLOSED = "p1_closed"
    P1_RECURSION = "p1_recursion"
    SINGLE_CELL_P2 = "single_cell_p2"
    SINGLE_CELL_P3 = "single_cell_p3"
    PB_CURVE_SINGLE = "pb_curve_single"
    ODD_RESONANT_P2 = "odd_resonant_p2"
    ODD_RESONANT_G2 = "odd_resonant_g2"
    ODD_RESONANT_CURVE = "odd_resonant_curve"
    SURVIVAL_LIMIT = "survival_limit"
    DCC_RESONANT = "dcc_resonant"


@dataclass(frozen=True)
class ClosedFormResult:
    """A closed-form value tagged with the formula that produced it."""

    value: complex
    formula_id: FormulaId


def _require_uniform_mirror(spec: SystemSpec) -> None:
    if abs(math.remainder(spec.hop_phase, 2.0 * math.pi)) > 1e-12:
        raise ValueError("closed forms require the mirror configuration (phase 2*pi*m)")
    if any(spec.cavity_detune_disorder) or any(spec.atom_detune_disorder):
        raise ValueError("closed forms require a uniform (disorder-free) array")
    if spec.kind is not CouplingKind.SIDE_CAVITY_ATOM:
        raise ValueError("closed forms cover side-coupled cavity-atom arrays only")


def _p1_alpha_one_limit(spec: SystemSpec, de: complex, dc: complex) -> complex:
    """alpha -> 1 limit of the closed form (z -> 1 makes it 0/0)."""
    n, kappa = spec.n_cells, spec.kappa
    g = spec.coupling_g
    if de == 0:
        return 0.0 + 0.0j
    xi2 = (dc * de - g * g) / de
    return 2j * n * spec.kappa_r / (2.0 * xi2 + 1j * kappa - 1j * n * kappa)


def p1_closed(spec: SystemSpec, frame: DriveFrame) -> complex:
    """Closed-form single-photon amplitude P_1^N(0) (mirror, uniform array).

    Routes the lossless resonant-atom case through the e^{iN theta} form and
    everything else through the general modulus/argument form; both are
    guarded against their removable alpha = 1 and Delta~_e = 0 degeneracies.
    """
    _require_uniform_mirror(spec)
    alpha = spec.alpha
    lossless = spec.atom_loss == 0.0 and spec.cavity_loss == 0.0
    resonant_atom = spec.atom_freq == spec.cavity_freq

    if lossless and resonant_atom:
        if alpha == 1.0:
            de = frame.derived_lossy_atom
            return _p1_alpha_one_limit(spec, de, frame.derived_lossy_cavity)
        # expm1 keeps 1 - e^{iN theta} accurate for small theta (the
        # amplitude vanishes ~ i N theta there, far below 1).
        e = _cexpm1(1j * spec.n_cells * frame.derived_theta)
        return e / (1.0 - alpha - alpha * e)

    de = frame.derived_lossy_atom
    dc = frame.derived_lossy_cavity
    g = spec.coupling_g
    if g == 0.0 and de == 0.0:
        # decoupled atom: xi_2 = Delta~_c independent of Delta~_e
        de = 1.0 + 0.0j
    s = 1j * abs(spec.kappa_r - spec.kappa_l)
    if s == 0.0:
        return _p1_alpha_one_limit(spec, de, dc)
    u = 2.0 * (dc * de - g * g) + 1j * spec.kappa * de
    den = u - s * de
    if den == 0:
        # z -> infinity: (z^N+1)/(z^N-1) -> 1
        return 2.0 / (abs(1.0 - alpha) - (1.0 + alpha))
    zm1 = 2.0 * s * de / den
    w = _cexpm1(spec.n_cells * _clog1p(zm1))  # z^N - 1
    if w == 0:
        return _p1_alpha_one_limit(spec, de, dc)
    return 2.0 * w / (abs(1.0 - alpha) * (w + 2.0) - (1.0 + alpha) * w)


def p1_recursive(spec: SystemSpec, frame: DriveFrame) -> complex:
    """P_1^N(0) by iterating the single-cell recursion N times.

    The iteration is written with numerator and denominator multiplied
    through by Delta~_e, which keeps it finite when the drive hits the bare
    atomic line (xi_2 diverges there but y stays put).
    """
    _require_uniform_mirror(spec)
    de = frame.derived_lossy_atom
    dc = frame.derived_lossy_cavity
    g = spec.coupling_g
    if g == 0.0 and de == 0.0:
        de = 1.0 + 0.0j
    xi1 = spec.kappa_l * spec.kappa_r
    kappa = spec.kappa
    core = dc * de - g * g
    y = 0.0 + 0.0j
    for _ in range(spec.n_cells):
        den = core + xi1 * de * y
        if abs(den) < 1e-300:
            raise ArithmeticError("single-photon recursion hit a parameter pole")
        y = y + de * (1.0 - xi1 * y * y + 1j * kappa * y) / den
    return 1j * spec.kappa_r * y


def single_cavity_p2_p3(
    frame: DriveFrame, g: float, kappa: float, alpha: float
) -> tuple[complex, complex]:
    """Closed-form P_2(0), P_3(0) of one lossless side-coupled cell.

        P_2(0) = - (g^2 + D Dc + D^2) / prod_{n=0,1} [(n Dc^2 + D Dc - g^2)(1+a)/k]
        P_3(0) = -i [prod_{n=0..2}(n Dc + D) + (4 Dc + 3 D) g^2]
                    / prod_{n=0..2} [(n Dc^2 + D Dc - g^2)(1+a)/k]

    with D the detuning and Dc = D - i k/2; the -1 and -i prefactors are the
    time-independent remnants of the i^n free-phase factors.
    """
    d = frame.detuning
    dc = d - 0.5j * kappa
    den = [(n * dc * dc + d * dc - g * g) * (1.0 + alpha) / kappa for n in range(3)]
    p2 = -(g * g + d * dc + d * d) / (den[0] * den[1])
    p3_num = (d * (dc + d) * (2 * dc + d)) + (4.0 * dc + 3.0 * d) * g * g
    p3 = -1j * p3_num / (den[0] * den[1] * den[2])
    return p2, p3


def pb_curve_single(alpha: float) -> float:
    """Coupling g/kappa giving perfect blockade of one cell at resonance.

    g/kappa = sqrt((1-alpha)(3+alpha)) / (2(1+alpha)), defined on [0, 1):
    no chirality, no blockade.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"perfect blockade requires 0 <= alpha < 1, got {alpha}")
    return math.sqrt((1.0 - alpha) * (3.0 + alpha)) / (2.0 * (1.0 + alpha))


def odd_resonant(alpha: float, g: float, kappa: float) -> tuple[complex, float, float]:
    """Resonant two-photon results for any odd N >= 3 (N-independent).

    Returns (p2, g2, curve_g_over_kappa):

        p2 = -[4 (1-a)^2 / (1+a^2)] / [4 (g/k)^2 (1+a)^2 + (1-a)^2],
        g2 = |(4 q (1+a^2) - (1-a)^2 (3-a^2)) / (4 q (1+a^2) + (1-a)^2 (1+a^2))|^2
             with q = (g/k)^2 (1+a)^2,
        curve: g/k = |1-a|/(2(1+a)) * sqrt((3-a^2)/(1+a^2)),

    the last being the parameter line on which g2 vanishes (alpha < 1).
    """
    gk2 = (g / kappa) ** 2
    one_m = (1.0 - alpha) ** 2
    one_p2 = 1.0 + alpha * alpha
    denom = 4.0 * gk2 * (1.0 + alpha) ** 2 + one_m
    p2 = complex(-4.0 * one_m / (one_p2 * denom))
    q = 4.0 * gk2 * (1.0 + alpha) ** 2
    g2 = abs((q * one_p2 - one_m * (3.0 - alpha * alpha)) / (q * one_p2 + one_m * one_p2)) ** 2
    if alpha < 1.0:
        curve = abs(1.0 - alpha) / (2.0 * (1.0 + alpha)) * math.sqrt((3.0 - alpha * alpha) / one_p2)
    else:
        curve = float("nan")
    return p2, g2, curve


def survival_limit(alpha: float) -> float:
    """Large-N limit of the single-photon survival rate T + R.

    alpha for alpha <= 1, and 1 - 1/alpha + 1/alpha^2 beyond; continuous at
    alpha = 1 where both branches give 1.
    """
    if alpha < 0:
        raise ValueError("chirality must be >= 0")
    if alpha <= 1.0:
        return alpha
    return 1.0 - 1.0 / alpha + 1.0 / alpha**2


def dcc_resonant_p1_p2(g: float, kappa: float, gamma_e: float, alpha: float) -> tuple[complex, complex]:
    """Resonant P_1(0), P_2(0) of one cell (shared by both coupling kinds).

        P_1(0) = (kr/k) (-2 ge) / (4 gk^2 + ge)
        P_2(0) = (kr/k)^2 [-16 gk^2 + 4 (ge + 1) ge] / [(4 gk^2 + ge)(4 gk^2 + ge + 1)]

    with gk = g/kappa, ge = gamma_e/kappa, kr/k = 1/(1+alpha).  These feed
    the bunching/antibunching contrast of direct- vs side-coupled cavities:
    g2_DCC = |P_2|^2/|P_1|^4 explodes as gamma_e -> 0 while
    g2_SCC = |1 + 2 P_1 + P_2|^2/|1 + P_1|^4 stays finite.
    """
    gk2 = (g / kappa) ** 2
    ge = gamma_e / kappa
    kr_frac = 1.0 / (1.0 + alpha)
    p1 = complex(kr_frac * (-2.0 * ge) / (4.0 * gk2 + ge))
    p2 = complex(
        kr_frac**2
        * (-16.0 * gk2 + 4.0 * (ge + 1.0) * ge)
        / ((4.0 * gk2 + ge) * (4.0 * gk2 + ge + 1.0))
    )
    return p1, p2


# -- complex helpers ---------------------------------------------------------

def _cexpm1(z: complex) -> complex:
    """exp(z) - 1 accurate for small |z| (complex expm1)."""
    if abs(z) > 0.5:
        return cmath.exp(z) - 1.0
    # expm1/cos building blocks keep each real part fully accurate
    a, b = z.real, z.imag
    em = math.expm1(a)
    cb, sb = math.cos(b), math.sin(b)
    # e^a cos b - 1 = expm1(a) cos b - 2 sin^2(b/2)
    re = em * cb - 2.0 * math.sin(0.5 * b) ** 2
    im = (em + 1.0) * sb
    return complex(re, im)


def _clog1p(z: complex) -> complex:
    """log(1 + z) accurate for small |z| (complex log1p)."""
    if abs(z) > 0.5:
        return cmath.log(1.0 + z)
    # |1+z| via hypot-free stable form: log|1+z| = 0.5 log1p(2 Re z + |z|^2)
    re = 0.5 * math.log1p(2.0 * z.real + (z.real * z.real + z.imag * z.imag))
    im = math.atan2(z.imag, 1.0 + z.real)
    return complex(re, im)
