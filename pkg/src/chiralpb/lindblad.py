"""Driven master equation and quantum trajectories on the truncated space.

This module is the package's independent validation oracle.  The scattering
chain works in fixed-excitation subspaces of an effective non-Hermitian
Hamiltonian; here the same physics is posed as a driven Lindblad problem on
the full (truncated) product Hilbert space

    drho/dt = -i[H', rho] + sum_mu D[A_mu] rho + local dissipators,

with the collective chiral jump operators

    A_r = sqrt(kappa_r) sum_j e^{-i phi (j-1)} a_j,
    A_l = sqrt(kappa_l) sum_j e^{+i phi (j-1)} a_j,

and H' containing the rotating-frame cell Hamiltonians, the Hermitian half
of the cascaded photon exchange (the anti-Hermitian half is exactly the
collective dissipators' damping term, so the unraveled no-jump generator
reproduces the scattering Hamiltonian), and a weak coherent drive
Omega sum_j (e^{i phi (j-1)} a_j^dag + h.c.).

In the weak-drive limit the steady state's normalized output correlations
g^(n) converge to the few-photon scattering results with an O(Omega^2)
deviation; that convergence rate is itself one of the validation suite's
properties.  The trajectory estimator implements the first-order
no-jump/jump scheme (keep with probability equal to the decayed norm,
otherwise jump through a channel drawn by relative weight) so its
systematic error is O(dt) with deterministic per-trajectory RNG streams.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from chiralpb.model import CouplingKind, DriveFrame, SystemSpec

__all__ = [
    "TruncationSpec",
    "TrajectoryConfig",
    "SteadyState",
    "SteadyMethod",
    "LindbladGenerator",
    "DimensionOverflow",
    "SteadyStateError",
    "build_liouvillian",
    "steady_state",
    "me_correlation",
    "output_operator",
    "trajectory_g2",
]

#: Hilbert-space cap for operator construction (N = 4 cavity cells at the
#: default cutoff).  Vectorized solves have their own, much smaller, cap.
_DIM_CAP = 4096

#: Liouville-space cap for the direct null-space solve.
_VEC_CAP = 4096


class DimensionOverflow(ValueError):
    """Requested truncated space is beyond what dense validation supports."""


class SteadyStateError(RuntimeError):
    """Steady-state solve failed to converge; `residual` carries the norm."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class TruncationSpec:
    """Fock-space truncation for the dense validation path.

    Each cavity keeps photon numbers 0..photons_per_cavity, so a cavity+atom
    cell carries a local dimension of (photons_per_cavity + 1) * 2; bare-atom
    cells are two-level.  The default cutoff of 3 is sized for weak coherent
    drives, where the triple-excitation population is already negligible;
    the suite checks that raising it to 4 moves g2 by well under a percent.
    """

    photons_per_cavity: int = 3

    def __post_init__(self) -> None:
        if self.photons_per_cavity < 1:
            raise ValueError("need at least one photon per cavity")

    def local_dim(self, spec: SystemSpec) -> int:
        if spec.kind is CouplingKind.BARE_ATOM:
            return 2
        return (self.photons_per_cavity + 1) * 2

    def total_dim(self, spec: SystemSpec) -> int:
        return self.local_dim(spec) ** spec.n_cells


@dataclass(frozen=True)
class TrajectoryConfig:
    """Monte Carlo wavefunction settings; times are in units of 1/kappa.

    The first-order scheme needs dt << 1/kappa; configs with dt > 0.1 are
    rejected outright.  `seed` feeds a SeedSequence whose children give each
    trajectory (and the bootstrap) an independent, reproducible stream.
    """

    dt: float = 1e-2
    t_steady: float = 1e3
    n_traj: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > 0.1:
            raise ValueError("dt must satisfy dt <= 0.1/kappa for the first-order scheme")
        if self.t_steady <= 0:
            raise ValueError("t_steady must be positive")
        if self.n_traj < 1:
            raise ValueError("need at least one trajectory")


@dataclass(frozen=True)
class SteadyState:
    """Validated steady-state density matrix on the truncated space."""

    rho: np.ndarray
    residual: float
    trunc: TruncationSpec

    def __post_init__(self) -> None:
        rho = self.rho
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"steady state trace {tr} deviates from 1")
        herm = np.linalg.norm(rho - rho.conj().T)
        if herm > 1e-10 * max(1.0, np.linalg.norm(rho)):
            raise ValueError(f"steady state not Hermitian (defect {herm:.3g})")
        min_eig = float(np.linalg.eigvalsh(rho)[0])
        if min_eig < -1e-8:
            raise ValueError(f"steady state indefinite (min eigenvalue {min_eig:.3g})")


class SteadyMethod(enum.Enum):
    NULL_SPACE = "null_space"
    TIME_EVOLVE = "time_evolve"


# ---------------------------------------------------------------------------
# operator construction


def _site_op(op: sp.spmatrix, j: int, local_dims: Sequence[int]) -> sp.csr_matrix:
    """Embed a local operator at site j (0-based) in the product space."""
    left = int(np.prod(local_dims[:j], initial=1))
    right = int(np.prod(local_dims[j + 1:], initial=1))
    return sp.kron(sp.identity(left, format="csr"),
                   sp.kron(op, sp.identity(right, format="csr"), format="csr"),
                   format="csr")


def _cell_ops(spec: SystemSpec, trunc: TruncationSpec):
    """Per-cell waveguide-coupled and atomic lowering operators.

    Returns (c_ops, sigma_ops, a_ops) where c_ops[j] is what the waveguide
    couples to at cell j (the cavity mode, or the atom itself for bare-atom
    chains), sigma_ops[j] the atomic lowering operator, and a_ops[j] the
    cavity annihilation operator (None entries for bare atoms).
    """
    n = spec.n_cells
    if spec.kind is CouplingKind.BARE_ATOM:
        local = [2] * n
        sig = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        sigma_ops = [_site_op(sig, j, local) for j in range(n)]
        return sigma_ops, sigma_ops, [None] * n
    p = trunc.photons_per_cavity
    a_loc = sp.csr_matrix(np.diag(np.sqrt(np.arange(1, p + 1)), k=1))
    sig_loc = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    a_cell = sp.kron(a_loc, sp.identity(2, format="csr"), format="csr")
    sig_cell = sp.kron(sp.identity(p + 1, format="csr"), sig_loc, format="csr")
    local = [(p + 1) * 2] * n
    a_ops = [_site_op(a_cell, j, local) for j in range(n)]
    sigma_ops = [_site_op(sig_cell, j, local) for j in range(n)]
    return a_ops, sigma_ops, a_ops


def _collective_ops(spec: SystemSpec, c_ops) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Right- and left-moving collective jump operators (rates included)."""
    phi = spec.hop_phase
    a_r = sum(math.sqrt(spec.kappa_r) * np.exp(-1j * phi * j) * c_ops[j]
              for j in range(spec.n_cells))
    a_l = sum(math.sqrt(spec.kappa_l) * np.exp(+1j * phi * j) * c_ops[j]
              for j in range(spec.n_cells))
    return sp.csr_matrix(a_r), sp.csr_matrix(a_l)


@dataclass
class LindbladGenerator:
    """Assembled generator: Hermitian H' plus a list of collapse operators.

    Collapse operators carry their sqrt(rate) prefactors, so the action is
    rho -> -i[H, rho] + sum_k (C_k rho C_k^dag - {C_k^dag C_k, rho}/2).
    """

    spec: SystemSpec
    frame: DriveFrame
    trunc: TruncationSpec
    hamiltonian: sp.csr_matrix
    collapse_ops: tuple[sp.csr_matrix, ...]
    _matrix_cache: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Action of the generator on a density matrix (dense)."""
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for c in self.collapse_ops:
            cdag = c.conj().T.tocsr()
            cc = (cdag @ c).tocsr()
            out = out + (c @ rho) @ cdag - 0.5 * (cc @ rho) - 0.5 * (rho @ cc)
        return np.asarray(out)

    def matrix(self) -> sp.csr_matrix:
        """Row-major vectorized superoperator L with vec(rho') = L vec(rho)."""
        if self._matrix_cache is None:
            d = self.dim
            ident = sp.identity(d, format="csr")
            h = self.hamiltonian
            lmat = -1j * (sp.kron(h, ident, format="csr")
                          - sp.kron(ident, h.T, format="csr"))
            for c in self.collapse_ops:
                cc = (c.conj().T @ c).tocsr()
                lmat = lmat + sp.kron(c, c.conj(), format="csr") \
                    - 0.5 * sp.kron(cc, ident, format="csr") \
                    - 0.5 * sp.kron(ident, cc.T, format="csr")
            self._matrix_cache = lmat.tocsr()
        return self._matrix_cache

    def effective_hamiltonian(self) -> np.ndarray:
        """Dense H' - (i/2) sum C^dag C driving the no-jump trajectory step."""
        h_eff = self.hamiltonian.toarray().astype(np.complex128)
        for c in self.collapse_ops:
            h_eff -= 0.5j * (c.conj().T @ c).toarray()
        return h_eff


def build_liouvillian(
    spec: SystemSpec, frame: DriveFrame, trunc: TruncationSpec | None = None
) -> LindbladGenerator:
    """Assemble the driven chiral master-equation generator.

    H' carries, per cell, the rotating-frame diagonals (including disorder),
    the cavity-atom exchange g, the Hermitian part of the cascaded photon
    hopping, and the coherent drive with the propagation phase e^{i phi (j-1)}.
    Dissipation enters through the two collective operators plus local
    atomic and non-waveguide cavity loss channels; for bare-atom chains the
    cavity-loss rate adds to the atomic loss since there is no mode to damp.
    """
    trunc = trunc or TruncationSpec()
    dim = trunc.total_dim(spec)
    if dim > _DIM_CAP:
        raise DimensionOverflow(
            f"truncated dimension {dim} exceeds the dense-validation cap {_DIM_CAP}"
        )
    c_ops, sigma_ops, a_ops = _cell_ops(spec, trunc)
    n = spec.n_cells
    phi = spec.hop_phase
    delta_c = spec.cavity_freq - frame.drive_freq
    delta_e = spec.atom_freq - frame.drive_freq
    dis_c = spec.cavity_detune_disorder
    dis_e = spec.atom_detune_disorder

    h = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for j in range(n):
        num_e = (sigma_ops[j].conj().T @ sigma_ops[j]).tocsr()
        h = h + (delta_e + dis_e[j]) * num_e
        if a_ops[j] is not None:
            num_c = (a_ops[j].conj().T @ a_ops[j]).tocsr()
            h = h + (delta_c + dis_c[j]) * num_c
            h = h + spec.coupling_g * (a_ops[j].conj().T @ sigma_ops[j]
                                       + sigma_ops[j].conj().T @ a_ops[j])
    # Hermitian half of the cascaded exchange; the anti-Hermitian half is
    # reproduced exactly by the collective dissipators below.
    for j in range(1, n):
        for k in range(j):
            hop = -1j * np.exp(1j * phi * (j - k)) * (
                spec.kappa_r * (c_ops[j].conj().T @ c_ops[k])
                + spec.kappa_l * (c_ops[k].conj().T @ c_ops[j])
            )
            h = h + 0.5 * (hop + hop.conj().T)
    omega = frame.drive_amp
    if omega:
        for j in range(n):
            h = h + omega * (np.exp(1j * phi * j) * c_ops[j].conj().T
                             + np.exp(-1j * phi * j) * c_ops[j])

    a_r, a_l = _collective_ops(spec, c_ops)
    collapse: list[sp.csr_matrix] = []
    if spec.kappa_r > 0:
        collapse.append(a_r)
    if spec.kappa_l > 0:
        collapse.append(a_l)
    gamma_local = spec.atom_loss + (spec.cavity_loss if spec.kind is CouplingKind.BARE_ATOM else 0.0)
    if gamma_local > 0:
        collapse.extend(math.sqrt(gamma_local) * s for s in sigma_ops)
    if spec.kind is not CouplingKind.BARE_ATOM and spec.cavity_loss > 0:
        collapse.extend(math.sqrt(spec.cavity_loss) * a for a in a_ops)
    return LindbladGenerator(
        spec=spec,
        frame=frame,
        trunc=trunc,
        hamiltonian=h.tocsr(),
        collapse_ops=tuple(sp.csr_matrix(c) for c in collapse),
    )


# ---------------------------------------------------------------------------
# steady states


def _vacuum_vec(dim: int) -> np.ndarray:
    v = np.zeros(dim * dim, dtype=np.complex128)
    v[0] = 1.0
    return v


def steady_state(
    generator: LindbladGenerator,
    method: SteadyMethod = SteadyMethod.NULL_SPACE,
    t_steady: float = 1e3,
    allow_large: bool = False,
) -> SteadyState:
    """Solve for the stationary density matrix of the generator.

    NULL_SPACE replaces one row of the vectorized generator with the trace
    constraint and solves the sparse linear system directly (one step of
    iterative refinement), capped at Liouville dimension 4096 unless
    `allow_large`.  TIME_EVOLVE propagates the vacuum with fixed expm steps
    to t_steady (units of 1/kappa), monitoring trace and Hermiticity drift.
    The reported residual is ||L rho||_F of the original generator; above
    1e-7 the solve raises SteadyStateError with the residual attached.
    """
    dim = generator.dim
    lmat = generator.matrix()
    if method is SteadyMethod.NULL_SPACE:
        if dim * dim > _VEC_CAP and not allow_large:
            raise DimensionOverflow(
                f"Liouville dimension {dim * dim} exceeds the null-space cap {_VEC_CAP}; "
                "pass allow_large=True to force the direct solve"
            )
        a = lmat.tolil(copy=True)
        a[0, :] = 0.0
        for i in range(dim):
            a[0, i * (dim + 1)] = 1.0
        a = a.tocsc()
        rhs = np.zeros(dim * dim, dtype=np.complex128)
        rhs[0] = 1.0
        lu = spla.splu(a)
        x = lu.solve(rhs)
        x += lu.solve(rhs - a @ x)
        rho = x.reshape(dim, dim)
    elif method is SteadyMethod.TIME_EVOLVE:
        v = _vacuum_vec(dim)
        n_chunks = 32
        # t_steady is in units of 1/kappa; the generator carries absolute rates.
        step = sp.csc_matrix(lmat * (t_steady / n_chunks / generator.spec.kappa))
        for _ in range(n_chunks):
            v = spla.expm_multiply(step, v)
            rho_c = v.reshape(dim, dim)
            tr = float(np.trace(rho_c).real)
            herm = np.linalg.norm(rho_c - rho_c.conj().T)
            if abs(tr - 1.0) > 1e-8 or herm > 1e-8:
                raise SteadyStateError(
                    f"time evolution drifted (trace err {abs(tr - 1.0):.3g}, "
                    f"hermiticity defect {herm:.3g})",
                    residual=float(np.linalg.norm(lmat @ v)),
                )
        rho = v.reshape(dim, dim)
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown steady-state method {method}")

    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(lmat @ rho.reshape(-1)))
    if residual > 1e-7:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} above 1e-7", residual=residual
        )
    return SteadyState(rho=rho, residual=residual, trunc=generator.trunc)


# ---------------------------------------------------------------------------
# output-field correlations


def output_operator(
    spec: SystemSpec, frame: DriveFrame, trunc: TruncationSpec | None = None
) -> sp.csr_matrix:
    """Right-moving output field operator on the truncated space.

    Side-coupled (and bare-atom) chains transmit the interference of the
    drive with the collectively radiated field, b = Omega/sqrt(kappa_r) - i A_r;
    for direct-coupled cells the waveguide continues only through the cavity,
    so the transmitted field is the radiated part alone.
    """
    trunc = trunc or TruncationSpec()
    c_ops, _, _ = _cell_ops(spec, trunc)
    a_r, _ = _collective_ops(spec, c_ops)
    b = -1j * a_r
    if spec.kind is not CouplingKind.DIRECT_CAVITY_ATOM:
        dim = trunc.total_dim(spec)
        b = b + (frame.drive_amp / math.sqrt(spec.kappa_r)) * sp.identity(dim, format="csr")
    return sp.csr_matrix(b)


def me_correlation(
    state: SteadyState, spec: SystemSpec, frame: DriveFrame, n: int
) -> float:
    """Normalized equal-time output correlation g^(n)(0) of the steady state.

    g^(n) = Tr[b^dag^n b^n rho] / Tr[b^dag b rho]^n with the transmitted
    output operator b; n = 1 is the trivial normalization check, n = 2 and 3
    are the blockade observables the scattering results are validated against.
    """
    if n not in (1, 2, 3):
        raise ValueError("correlation order must be 1, 2 or 3")
    b = output_operator(spec, frame, state.trunc)
    bn = b
    for _ in range(n - 1):
        bn = bn @ b
    num = float(np.einsum("ij,ji->", (bn.conj().T @ bn).toarray(), state.rho).real)
    den = float(np.einsum("ij,ji->", (b.conj().T @ b).toarray(), state.rho).real)
    if abs(den) < 1e-300:
        raise ArithmeticError("output flux vanishes; g^(n) undefined")
    return num / den**n


# ---------------------------------------------------------------------------
# quantum trajectories


def trajectory_g2(
    spec: SystemSpec,
    frame: DriveFrame,
    trunc: TruncationSpec | None = None,
    tconf: TrajectoryConfig | None = None,
) -> tuple[float, float]:
    """Monte Carlo wavefunction estimate of g^(2)(0) with bootstrap error.

    All trajectories advance in lockstep from vacuum with the first-order
    no-jump step psi -> (1 - i H_eff dt) psi: each step keeps and
    renormalizes with probability equal to the decayed norm, otherwise
    applies a jump channel drawn proportionally to ||C_mu psi||^2.  After
    t_steady the estimator is mean<b^dag2 b^2> / mean<b^dag b>^2 over
    trajectories; the standard error comes from 1000 bootstrap resamples.
    Per-trajectory streams spawn from the config seed, so a fixed seed is
    bit-reproducible.
    """
    trunc = trunc or TruncationSpec()
    tconf = tconf or TrajectoryConfig()
    gen = build_liouvillian(spec, frame, trunc)
    kappa = spec.kappa
    dt = tconf.dt / kappa
    n_steps = int(round(tconf.t_steady / tconf.dt))
    n_traj = tconf.n_traj
    dim = gen.dim

    h_eff = gen.effective_hamiltonian()
    step_mat = np.eye(dim, dtype=np.complex128) - 1j * dt * h_eff
    step_t = np.ascontiguousarray(step_mat.T)
    jump_ops = [c.toarray() for c in gen.collapse_ops]

    seeds = np.random.SeedSequence(tconf.seed).spawn(n_traj + 1)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in seeds[:n_traj]]
    boot_rng = np.random.Generator(np.random.PCG64(seeds[n_traj]))

    psi = np.zeros((n_traj, dim), dtype=np.complex128)
    psi[:, 0] = 1.0
    chunk = 20000
    done = 0
    while done < n_steps:
        span = min(chunk, n_steps - done)
        uniforms = np.empty((n_traj, span))
        for i, rng in enumerate(rngs):
            uniforms[i] = rng.random(span)
        for s in range(span):
            phi = psi @ step_t
            norms2 = np.einsum("ij,ij->i", phi.conj(), phi).real
            keep = uniforms[:, s] < norms2
            if np.any(keep):
                psi[keep] = phi[keep] / np.sqrt(norms2[keep])[:, None]
            for i in np.flatnonzero(~keep):
                weights = np.array([np.linalg.norm(c @ psi[i]) ** 2 for c in jump_ops])
                total = weights.sum()
                if total <= 0.0:
                    psi[i] = phi[i] / math.sqrt(norms2[i])
                    continue
                pick = int(np.searchsorted(np.cumsum(weights) / total, rngs[i].random()))
                jumped = jump_ops[min(pick, len(jump_ops) - 1)] @ psi[i]
                psi[i] = jumped / np.linalg.norm(jumped)
        done += span

    b = output_operator(spec, frame, trunc).toarray()
    b_psi = psi @ b.T
    bb_psi = b_psi @ b.T
    den_each = np.einsum("ij,ij->i", b_psi.conj(), b_psi).real
    num_each = np.einsum("ij,ij->i", bb_psi.conj(), bb_psi).real
    den_mean = den_each.mean()
    if den_mean <= 0.0 or not np.isfinite(den_mean):
        raise ArithmeticError("all trajectories give vanishing output flux")
    estimate = float(num_each.mean() / den_mean**2)

    n_boot = 1000
    idx = boot_rng.integers(0, n_traj, size=(n_boot, n_traj))
    boot_num = num_each[idx].mean(axis=1)
    boot_den = den_each[idx].mean(axis=1)
    good = boot_den > 0
    boot_est = boot_num[good] / boot_den[good] ** 2
    std_error = float(boot_est.std(ddof=1)) if boot_est.size > 1 else math.inf
    return estimate, std_error
