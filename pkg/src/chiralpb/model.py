"""Parameter types and excitation-subspace operator builders.

The physical setting is an array of N cells coupled to a single chiral
waveguide.  Each cell is either a cavity-atom pair coupled to the waveguide
through the cavity (side- or direct-coupled) or a bare two-level atom.  Cell j
decays into the right/left-propagating waveguide modes at rates kappa_r /
kappa_l; integrating the waveguide out in the Markovian regime leaves the
non-Hermitian effective Hamiltonian

    H_eff = sum_j [ (w_c + e_cj - i(kappa + kappa_ext)/2) a_j^dag a_j
                  + (w_e + e_ej - i gamma_e/2) s_j^dag s_j
                  + g (a_j^dag s_j + s_j^dag a_j) ]
          - i sum_{j>k} e^{i phi (j-k)} [ kappa_r a_j^dag a_k
                                        + kappa_l a_k^dag a_j ],

with kappa = kappa_l + kappa_r, phi the inter-cell propagation phase, and the
collective waveguide jump operators

    A_r = sqrt(kappa_r) sum_j e^{-i phi (j-1)} a_j,
    A_l = sqrt(kappa_l) sum_j e^{+i phi (j-1)} a_j.

For bare-atom arrays a_j is replaced by s_j throughout (the atoms couple to
the waveguide directly, kappa_ext folds into the atomic loss, and g plays no
role).  Total excitation number is conserved by H_eff, so everything is built
block-by-block on the n-excitation subspaces; n <= 3 suffices for all
observables handled here.

All builders are pure functions of their arguments and the returned objects
are treated as immutable, so specs and operator blocks can be shared freely
across threads.
"""
from __future__ import annotations

import cmath
import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "CouplingKind",
    "SystemSpec",
    "DriveFrame",
    "ExcitationBasis",
    "OperatorBlock",
    "Direction",
    "validate_spec",
    "sample_disorder",
    "count_states",
    "enumerate_basis",
    "build_h_eff",
    "build_collapse",
    "DEFAULT_DIM_CAP",
]

#: Hard ceiling on the dimension of any single excitation block.  The studies
#: shipped with the package stay in the few-hundred range (N = 8, n = 3 is
#: ~750 states); the cap guards against accidental blow-ups, not memory.
DEFAULT_DIM_CAP = 20_000


class CouplingKind(enum.Enum):
    """How each cell is built and how it attaches to the waveguide.

    SIDE_CAVITY_ATOM   cavity-atom pair, cavity side-coupled to the waveguide
                       (input photons can also pass the cell without entering
                       it, so free propagation interferes with re-emission).
    DIRECT_CAVITY_ATOM cavity-atom pair with the cavity sitting *in* the
                       waveguide path: every transmitted photon has traversed
                       the cavity.  The Hamiltonian is identical to the
                       side-coupled one; only the composition of transmitted
                       amplitudes differs (see chiralpb.scatter).
    BARE_ATOM          two-level atoms coupled to the waveguide directly,
                       with no cavities (a_j -> s_j everywhere).
    """

    SIDE_CAVITY_ATOM = "side_cavity_atom"
    DIRECT_CAVITY_ATOM = "direct_cavity_atom"
    BARE_ATOM = "bare_atom"

    @property
    def has_cavities(self) -> bool:
        return self is not CouplingKind.BARE_ATOM


class Direction(enum.Enum):
    """Waveguide propagation direction of a collective jump operator."""

    RIGHT = "right"
    LEFT = "left"


def _as_tuple(values: Sequence[float] | None, n: int, name: str) -> tuple[float, ...]:
    if values is None:
        return (0.0,) * n
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise ValueError(
            f"{name} must have length n_cells={n}, got {len(out)}"
        )
    return out


@dataclass(frozen=True)
class SystemSpec:
    """Full physical parameter set of one N-cell array.

    Rates are in arbitrary but common units; the natural choice is
    kappa_r = 1.  Chirality alpha = kappa_l/kappa_r and the total waveguide
    rate kappa = kappa_l + kappa_r are derived, not stored.  `hop_phase` is
    the propagation phase phi = w_c d / v between neighbouring cells; the
    mirror configuration corresponds to phi = 2 pi m (use 0.0).
    """

    n_cells: int
    cavity_freq: float = 0.0
    atom_freq: float = 0.0
    coupling_g: float = 0.0
    kappa_r: float = 1.0
    kappa_l: float = 0.0
    hop_phase: float = 0.0
    atom_loss: float = 0.0
    cavity_loss: float = 0.0
    kind: CouplingKind = CouplingKind.SIDE_CAVITY_ATOM
    cavity_detune_disorder: tuple[float, ...] | None = None
    atom_detune_disorder: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.n_cells, (int, np.integer)) or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")
        if not self.kappa_r > 0:
            raise ValueError("zero right-decay: kappa_r must be > 0")
        for name in ("kappa_l", "coupling_g", "atom_loss", "cavity_loss"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", CouplingKind(self.kind))
        object.__setattr__(
            self,
            "cavity_detune_disorder",
            _as_tuple(self.cavity_detune_disorder, self.n_cells, "cavity_detune_disorder"),
        )
        object.__setattr__(
            self,
            "atom_detune_disorder",
            _as_tuple(self.atom_detune_disorder, self.n_cells, "atom_detune_disorder"),
        )

    # -- derived rates -----------------------------------------------------
    @property
    def kappa(self) -> float:
        """Total waveguide decay rate kappa = kappa_l + kappa_r."""
        return self.kappa_l + self.kappa_r

    @property
    def alpha(self) -> float:
        """Chirality alpha = kappa_l / kappa_r (0 = fully chiral)."""
        return self.kappa_l / self.kappa_r

    @property
    def beta(self) -> float:
        """Waveguide coupling efficiency beta = kappa / (kappa + kappa_ext)."""
        return self.kappa / (self.kappa + self.cavity_loss)

    def replace(self, **changes) -> "SystemSpec":
        """Return a copy with the given fields replaced (re-validated)."""
        return replace(self, **changes)

    # -- serialization -----------------------------------------------------
    def to_document(self) -> dict:
        """Plain-dict form with keys named exactly like the fields.

        Numbers are emitted in the stored rate units; the document carries
        `units: "rate"` so a round trip never rescales.
        """
        return {
            "units": "rate",
            "n_cells": self.n_cells,
            "cavity_freq": self.cavity_freq,
            "atom_freq": self.atom_freq,
            "coupling_g": self.coupling_g,
            "kappa_r": self.kappa_r,
            "kappa_l": self.kappa_l,
            "hop_phase": self.hop_phase,
            "atom_loss": self.atom_loss,
            "cavity_loss": self.cavity_loss,
            "kind": self.kind.value,
            "cavity_detune_disorder": list(self.cavity_detune_disorder),
            "atom_detune_disorder": list(self.atom_detune_disorder),
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_document(), **kwargs)

    @classmethod
    def from_document(cls, doc: dict) -> "SystemSpec":
        """Build a spec from a config dict.

        Rate-valued entries are interpreted in the unit named by the optional
        `units` key: "kappa_r" (default) or "kappa" rescale the whole spec so
        that the named rate equals 1 internally; "rate" takes numbers as-is.
        """
        doc = dict(doc)
        units = doc.pop("units", "kappa_r")
        kind = doc.get("kind", CouplingKind.SIDE_CAVITY_ATOM)
        known = {
            "n_cells",
            "cavity_freq",
            "atom_freq",
            "coupling_g",
            "kappa_r",
            "kappa_l",
            "hop_phase",
            "atom_loss",
            "cavity_loss",
            "cavity_detune_disorder",
            "atom_detune_disorder",
        }
        unknown = set(doc) - known - {"kind"}
        if unknown:
            raise ValueError(f"unknown spec keys: {sorted(unknown)}")
        kappa_r = float(doc.get("kappa_r", 1.0))
        kappa_l = float(doc.get("kappa_l", 0.0))
        if units == "kappa_r":
            scale = kappa_r
        elif units == "kappa":
            scale = kappa_r + kappa_l
        elif units == "rate":
            scale = 1.0
        else:
            raise ValueError(f"unknown units {units!r}; expected kappa_r, kappa or rate")
        if not scale > 0:
            raise ValueError("zero right-decay: kappa_r must be > 0")

        def rate(key: str, default: float = 0.0) -> float:
            return float(doc.get(key, default)) / scale

        def rate_list(key: str) -> list[float] | None:
            vals = doc.get(key)
            if vals is None:
                return None
            return [float(v) / scale for v in vals]

        return cls(
            n_cells=int(doc["n_cells"]),
            cavity_freq=rate("cavity_freq"),
            atom_freq=rate("atom_freq"),
            coupling_g=rate("coupling_g"),
            kappa_r=kappa_r / scale,
            kappa_l=kappa_l / scale,
            hop_phase=float(doc.get("hop_phase", 0.0)),
            atom_loss=rate("atom_loss"),
            cavity_loss=rate("cavity_loss"),
            kind=CouplingKind(kind) if isinstance(kind, str) else kind,
            cavity_detune_disorder=rate_list("cavity_detune_disorder"),
            atom_detune_disorder=rate_list("atom_detune_disorder"),
        )

    @classmethod
    def from_json(cls, text: str) -> "SystemSpec":
        return cls.from_document(json.loads(text))


def validate_spec(spec: SystemSpec) -> SystemSpec:
    """Check all SystemSpec invariants and return the (normalized) spec.

    Construction already validates, so this exists for call sites that
    receive a spec of unknown provenance (e.g. deserialized configs).
    """
    if not isinstance(spec, SystemSpec):
        raise TypeError(f"expected SystemSpec, got {type(spec).__name__}")
    # Re-run the constructor checks on the current field values.
    return replace(spec)


def sample_disorder(
    spec: SystemSpec,
    strength_w: float,
    seed: "int | np.random.SeedSequence",
) -> SystemSpec:
    """Return a copy of `spec` with frequency disorder drawn uniformly.

    Each cavity and atom detuning offset eps/kappa is drawn independently and
    uniformly from [-W, W].  The generator is numpy's PCG64 seeded with
    `seed` (one stream; cavity row drawn first, atom row second), so a given
    (spec, W, seed) always produces the identical disorder realization.

    Args:
        spec: clean or already-disordered spec; its disorder lists are
            replaced, not accumulated.
        strength_w: disorder half-width W >= 0 in units of kappa.
        seed: integer seed or SeedSequence for the PCG64 stream.
    """
    if strength_w < 0:
        raise ValueError(f"disorder strength W must be >= 0, got {strength_w}")
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.uniform(-strength_w, strength_w, size=(2, spec.n_cells)) * spec.kappa
    return spec.replace(
        cavity_detune_disorder=tuple(eps[0]),
        atom_detune_disorder=tuple(eps[1]),
    )


# ---------------------------------------------------------------------------
# Excitation-subspace enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExcitationBasis:
    """Ordered basis of the n-excitation subspace.

    States are occupation tuples (c_1, s_1, ..., c_N, s_N) with c_j photons
    in cavity j and s_j in {0, 1} for atom j, listed in *descending*
    lexicographic order.  That order runs cell-major with cavity before atom
    ("all excitation as far left and as photonic as possible" first), e.g.
    N = 2, n = 1 gives [a1, s1, a2, s2].  For bare-atom arrays all c_j are 0.
    """

    excitation_count: int
    states: tuple[tuple[int, ...], ...]
    index_of: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)


def count_states(spec: SystemSpec, n: int) -> int:
    """Dimension of the n-excitation subspace without enumerating it.

    Counts solutions of sum_j c_j + sum_j s_j = n with s_j <= 1 (and c_j = 0
    for bare atoms) by a small DP over cells.
    """
    if n < 0:
        raise ValueError("excitation number must be >= 0")
    ways = np.zeros(n + 1, dtype=np.int64)
    ways[0] = 1
    for _ in range(spec.n_cells):
        nxt = np.zeros_like(ways)
        for total in range(n + 1):
            if ways[total] == 0:
                continue
            for s in (0, 1):
                if spec.kind.has_cavities:
                    for c in range(n + 1 - total - s + 1):
                        if total + s + c <= n:
                            nxt[total + s + c] += ways[total]
                elif total + s <= n:
                    nxt[total + s] += ways[total]
        ways = nxt
    return int(ways[n])


def enumerate_basis(spec: SystemSpec, n: int) -> ExcitationBasis:
    """Enumerate all n-excitation occupation states of the spec's kind.

    The enumeration is complete, duplicate-free and deterministic
    (descending lexicographic on the occupation tuple; see ExcitationBasis).
    n = 0 yields the single vacuum state.
    """
    if n < 0:
        raise ValueError("excitation number must be >= 0")
    n_cells = spec.n_cells
    has_cav = spec.kind.has_cavities
    states: list[tuple[int, ...]] = []
    prefix = [0] * (2 * n_cells)

    def fill(pos: int, remaining: int) -> None:
        if pos == 2 * n_cells:
            if remaining == 0:
                states.append(tuple(prefix))
            return
        if pos % 2 == 0:  # cavity slot
            cap = remaining if has_cav else 0
        else:  # atom slot
            cap = min(1, remaining)
        for v in range(cap, -1, -1):
            prefix[pos] = v
            fill(pos + 1, remaining - v)
        prefix[pos] = 0

    fill(0, n)
    index_of = {s: i for i, s in enumerate(states)}
    return ExcitationBasis(excitation_count=n, states=tuple(states), index_of=index_of)


# ---------------------------------------------------------------------------
# Operator blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorBlock:
    """Dense complex matrix together with its row and column bases."""

    rows_basis: ExcitationBasis
    cols_basis: ExcitationBasis
    entries: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.rows_basis.dim, self.cols_basis.dim)
        if self.entries.shape != expected:
            raise ValueError(
                f"entries shape {self.entries.shape} does not match bases {expected}"
            )
        if self.entries.size and not np.all(np.isfinite(self.entries)):
            raise ValueError("operator block contains non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def _check_cap(spec: SystemSpec, n: int, dim_cap: int) -> None:
    dim = count_states(spec, n)
    if dim > dim_cap:
        raise ValueError(
            f"subspace too large: n={n} block has {dim} states "
            f"(cap {dim_cap}); raise dim_cap explicitly if intended"
        )


def build_h_eff(spec: SystemSpec, n: int, dim_cap: int = DEFAULT_DIM_CAP) -> OperatorBlock:
    """Effective non-Hermitian Hamiltonian on the n-excitation subspace.

    Entries are in absolute frequencies; scattering solves subtract the total
    drive frequency afterwards, so no rotating frame is baked in here.  In
    the mirror configuration (phi = 0) transposition swaps kappa_r and
    kappa_l, so the matrix is complex-symmetric only for a symmetric
    waveguide (alpha = 1); it is always non-normal, and H - H^dag equals -i
    times the sum of all jump/loss channel back-actions (see tests for the
    entrywise identity).

    For BARE_ATOM arrays the cavity operators become the atomic ones: the
    single local term is (atom_freq + eps_ej - i(kappa + kappa_ext + gamma_e)/2)
    s_j^dag s_j (the external loss simply rides along with gamma_e), g and the
    cavity frequency/disorder are ignored, and the cascaded hops exchange
    atomic excitation.
    """
    if n < 1:
        raise ValueError("build_h_eff needs n >= 1 (n = 0 is the trivial vacuum)")
    _check_cap(spec, n, dim_cap)
    basis = enumerate_basis(spec, n)
    dim = basis.dim
    ham = np.zeros((dim, dim), dtype=np.complex128)
    bare = not spec.kind.has_cavities

    half_cav = spec.cavity_freq - 0.5j * (spec.kappa + spec.cavity_loss)
    if bare:
        half_atom = spec.atom_freq - 0.5j * (spec.kappa + spec.cavity_loss + spec.atom_loss)
    else:
        half_atom = spec.atom_freq - 0.5j * spec.atom_loss
    eps_c = spec.cavity_detune_disorder
    eps_e = spec.atom_detune_disorder

    for idx, state in enumerate(basis.states):
        diag = 0.0 + 0.0j
        for j in range(spec.n_cells):
            c, s = state[2 * j], state[2 * j + 1]
            if not bare and c:
                diag += c * (half_cav + eps_c[j])
            if s:
                diag += half_atom + eps_e[j]
        ham[idx, idx] = diag

        if not bare and spec.coupling_g:
            for j in range(spec.n_cells):
                c, s = state[2 * j], state[2 * j + 1]
                # a_j^dag s_j : atom de-excites, photon count goes up.
                if s == 1:
                    tgt = list(state)
                    tgt[2 * j] += 1
                    tgt[2 * j + 1] = 0
                    ham[basis.index_of[tuple(tgt)], idx] += spec.coupling_g * math.sqrt(c + 1)
                # s_j^dag a_j : photon absorbed by the atom.
                if c >= 1 and s == 0:
                    tgt = list(state)
                    tgt[2 * j] -= 1
                    tgt[2 * j + 1] = 1
                    ham[basis.index_of[tuple(tgt)], idx] += spec.coupling_g * math.sqrt(c)

        # Cascaded waveguide-mediated hops, -i e^{i phi (j-k)} kappa_r a_j^dag a_k
        # (left-to-right) and -i e^{i phi (j-k)} kappa_l a_k^dag a_j, j > k.
        slot = 0 if not bare else 1
        for src in range(spec.n_cells):
            occ_src = state[2 * src + slot]
            if occ_src == 0:
                continue
            for dst in range(spec.n_cells):
                if dst == src:
                    continue
                occ_dst = state[2 * dst + slot]
                if bare and occ_dst == 1:
                    continue
                tgt = list(state)
                tgt[2 * src + slot] -= 1
                tgt[2 * dst + slot] += 1
                amp = 1.0 if bare else math.sqrt(occ_src) * math.sqrt(occ_dst + 1)
                if dst > src:
                    coeff = -1j * spec.kappa_r * cmath.exp(1j * spec.hop_phase * (dst - src))
                else:
                    coeff = -1j * spec.kappa_l * cmath.exp(1j * spec.hop_phase * (src - dst))
                ham[basis.index_of[tuple(tgt)], idx] += coeff * amp

    return OperatorBlock(rows_basis=basis, cols_basis=basis, entries=ham)


def build_collapse(
    spec: SystemSpec,
    n: int,
    direction: Direction = Direction.RIGHT,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> OperatorBlock:
    """Collective waveguide jump operator block O^mu_{n-1, n}.

    Projects A_mu = sqrt(kappa_mu) sum_j e^{-/+ i phi (j-1)} a_j (minus sign
    for RIGHT, plus for LEFT; s_j for bare atoms) onto <n-1| . |n>.  In the
    mirror configuration the two directions are proportional:
    O^l = sqrt(kappa_l / kappa_r) O^r.
    """
    if n < 1:
        raise ValueError("build_collapse needs n >= 1")
    _check_cap(spec, n, dim_cap)
    cols = enumerate_basis(spec, n)
    rows = enumerate_basis(spec, n - 1)
    bare = not spec.kind.has_cavities
    slot = 1 if bare else 0
    if direction is Direction.RIGHT:
        rate, sign = spec.kappa_r, -1.0
    elif direction is Direction.LEFT:
        rate, sign = spec.kappa_l, +1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    root = math.sqrt(rate)

    mat = np.zeros((rows.dim, cols.dim), dtype=np.complex128)
    for col, state in enumerate(cols.states):
        for j in range(spec.n_cells):
            occ = state[2 * j + slot]
            if occ == 0:
                continue
            tgt = list(state)
            tgt[2 * j + slot] -= 1
            amp = root * cmath.exp(sign * 1j * spec.hop_phase * j)
            if not bare:
                amp *= math.sqrt(occ)
            mat[rows.index_of[tuple(tgt)], col] += amp
    return OperatorBlock(rows_basis=rows, cols_basis=cols, entries=mat)


# ---------------------------------------------------------------------------
# Drive frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriveFrame:
    """A drive point: frequency/detuning plus the derived scalar symbols.

    detuning = cavity_freq - drive_freq by construction.  The derived
    complex/real quantities collect every scalar the closed-form amplitude
    expressions need:

        derived_single        Delta_c   = Delta - i kappa/2
        derived_lossy_cavity  Delta~_c  = Delta - i (kappa + kappa_ext)/2
        derived_lossy_atom    Delta~_e  = (w_e - w_d) - i gamma_e/2
        derived_xi1           xi_1      = kappa_l kappa_r
        derived_xi2           xi_2      = (Delta~_c Delta~_e - g^2)/Delta~_e
        derived_theta         theta with tan(theta/2)
                                  = Delta (1-alpha) kappa / [2(1+alpha)(Delta^2-g^2)]
        derived_modulus       r = |z|, z the closed-form ratio
                                  (2 xi_2 + i kappa + s)/(2 xi_2 + i kappa - s),
                                  s = i sqrt(kappa^2 - 4 xi_1); r = 1 exactly
                                  in the lossless case
        derived_zeta          zeta = (1+alpha^2)[4(g/kappa)^2(1+alpha)^2
                                                 + (1-alpha)^2]
    """

    spec: SystemSpec
    drive_freq: float
    detuning: float
    drive_amp: float = 0.0

    @classmethod
    def at_detuning(cls, spec: SystemSpec, detuning: float, drive_amp: float = 0.0) -> "DriveFrame":
        return cls(
            spec=spec,
            drive_freq=spec.cavity_freq - detuning,
            detuning=float(detuning),
            drive_amp=float(drive_amp),
        )

    @classmethod
    def at_drive_freq(cls, spec: SystemSpec, drive_freq: float, drive_amp: float = 0.0) -> "DriveFrame":
        return cls(
            spec=spec,
            drive_freq=float(drive_freq),
            detuning=spec.cavity_freq - drive_freq,
            drive_amp=float(drive_amp),
        )

    def __post_init__(self) -> None:
        if self.drive_amp < 0:
            raise ValueError("drive amplitude must be >= 0")
        if not math.isclose(
            self.detuning, self.spec.cavity_freq - self.drive_freq,
            rel_tol=0.0, abs_tol=1e-9 * max(1.0, abs(self.spec.cavity_freq)),
        ):
            raise ValueError("detuning must equal cavity_freq - drive_freq")

    @property
    def derived_single(self) -> complex:
        return self.detuning - 0.5j * self.spec.kappa

    @property
    def derived_lossy_cavity(self) -> complex:
        return self.detuning - 0.5j * (self.spec.kappa + self.spec.cavity_loss)

    @property
    def derived_lossy_atom(self) -> complex:
        return (self.spec.atom_freq - self.drive_freq) - 0.5j * self.spec.atom_loss

    @property
    def derived_xi1(self) -> complex:
        return complex(self.spec.kappa_l * self.spec.kappa_r)

    @property
    def derived_xi2(self) -> complex:
        de = self.derived_lossy_atom
        g = self.spec.coupling_g
        if de == 0:
            return complex(float("inf"), 0.0)
        return (self.derived_lossy_cavity * de - g * g) / de

    @property
    def derived_theta(self) -> float:
        spec = self.spec
        delta = self.detuning
        num = delta * (1.0 - spec.alpha) * spec.kappa
        den = 2.0 * (1.0 + spec.alpha) * (delta * delta - spec.coupling_g**2)
        # Principal branch: theta only ever enters through e^{i N theta} with
        # integer N, so any 2 pi branch is equivalent, but the principal one
        # keeps theta -> +/-0 on resonance (exact transparency through expm1)
        # instead of +/-2 pi (rounding residue ~ N eps).
        if den == 0.0:
            return math.copysign(math.pi, num)
        theta = 2.0 * math.atan(num / den)
        return theta

    @property
    def derived_modulus(self) -> float:
        num, den = self._closed_ratio_parts()
        if den == 0:
            return 1.0 if num == 0 else float("inf")
        # In the lossless case num and den are exact complex conjugates, so
        # taking moduli before dividing makes r == 1.0 bit-exact.
        return abs(num) / abs(den)

    @property
    def derived_zeta(self) -> float:
        a = self.spec.alpha
        gk = self.spec.coupling_g / self.spec.kappa
        return (1.0 + a * a) * (4.0 * gk * gk * (1.0 + a) ** 2 + (1.0 - a) ** 2)

    def _closed_ratio_parts(self) -> tuple[complex, complex]:
        """Numerator/denominator of z = (2 xi_2 + i kappa + s)/(... - s).

        Multiplying through by Delta~_e keeps the expression finite at
        Delta~_e = 0:  u = 2(Delta~_c Delta~_e - g^2) + i kappa Delta~_e,
        z = (u + s Delta~_e)/(u - s Delta~_e).  Note 4 xi_1 - kappa^2 =
        -(kappa_r - kappa_l)^2 <= 0, so s = i |kappa_r - kappa_l| up to the
        branch fixed by matching the fully chiral limit.
        """
        spec = self.spec
        de = self.derived_lossy_atom
        g = spec.coupling_g
        s = 1j * abs(spec.kappa_r - spec.kappa_l)
        u = 2.0 * (self.derived_lossy_cavity * de - g * g) + 1j * spec.kappa * de
        return u + s * de, u - s * de
