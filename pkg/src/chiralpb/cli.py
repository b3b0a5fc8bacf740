"""Command-line front end: configs in, CSV tables + JSON manifests out.

Subcommands map one-to-one onto the library's campaign functions:

    point      one drive point -> one-row table of observables
    sweep      (detuning, chirality) grid -> fixed-header table
    zeros      perfect-blockade zeros of the two-photon amplitude
    alpha-opt  weakest blockade chirality per array size
    disorder   geometric-mean g2 map over a frequency-disorder ensemble
    validate   chain amplitudes vs master equation (vs trajectories)
    fit        scaling-law fit of (N, value) pairs read from a CSV
    curve      closed-form blockade and survival curves vs chirality

Reproducibility contract: a run that writes at least one file also writes a
JSON manifest next to its first output (``<stem>.manifest.json``) recording
the subcommand, the resolved system in plain rate units, every grid /
ensemble / fit parameter, all seeds verbatim, the package version, the
wall-clock duration and the output paths.  Re-running the same command with
the same seeds reproduces the CSV byte for byte; floats are printed with 17
significant digits so golden-file comparisons stay meaningful.

Unit conventions: rate entries in config files are read in units of kappa_r
by default (a ``units`` key or ``--units`` switches to total-``kappa`` or
plain ``rate`` numbers).  Command-line detunings, drive amplitudes and
disorder strengths are in units of the *total* waveguide rate kappa --
the same normalization as the ``delta_over_kappa`` output column.  The
``--N/--g`` shortcuts build a clean array with kappa = 1, so ``--g 0.8``
means g = 0.8 kappa.

Exit codes: 0 success; 1 usage error (unknown flags, malformed config,
output collision without ``--force``); 2 numerical failure (singular
resolvent, solver non-convergence, no zeros found, diverging fit).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from chiralpb import __version__
from chiralpb.analytic import odd_resonant, pb_curve_single, survival_limit
from chiralpb.explore import (
    CSV_HEADER,
    FitForm,
    SweepGrid,
    alpha_opt,
    disorder_ensemble,
    find_zeros,
    fit_scaling,
    spec_at_alpha,
    sweep,
)
from chiralpb.kernels import backend_name
from chiralpb.model import CouplingKind, DriveFrame, SystemSpec
from chiralpb.scatter import correlation, scatter_point

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

_ALPHA_OPT_HEADER = ("n_cells", "alpha_opt", "delta_opt", "alpha_levels", "n_zeros")
_VALIDATE_HEADER = ("delta_over_kappa", "g2_scatter", "g2_me", "rel_dev")
_SCALING_HEADER = ("omega_over_kappa", "max_rel_dev")
_CURVE_HEADER = ("alpha", "g_pb_single", "g_pb_odd", "survival_limit")

_KIND_NAMES = {
    "side": CouplingKind.SIDE_CAVITY_ATOM,
    "direct": CouplingKind.DIRECT_CAVITY_ATOM,
    "bare": CouplingKind.BARE_ATOM,
}


class UsageError(Exception):
    """Bad invocation: flags, config contents, or output collisions."""


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of sys.exit'ing, so run() owns the code."""

    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility sidecar of one CLI run.

    `spec` is the resolved system in plain rate units (or None for the
    system-free subcommands fit/curve); `parameters` holds everything else
    needed to replay the run, `seeds` verbatim copies of user-facing seeds.
    """

    subcommand: str
    spec: dict | None
    parameters: dict
    seeds: dict
    version: str
    duration_s: float
    outputs: list[str]

    def to_document(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "version": self.version,
            "duration_s": self.duration_s,
            "spec": self.spec,
            "parameters": self.parameters,
            "seeds": self.seeds,
            "outputs": self.outputs,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "RunManifest":
        return cls(
            subcommand=doc["subcommand"],
            spec=doc.get("spec"),
            parameters=doc.get("parameters", {}),
            seeds=doc.get("seeds", {}),
            version=doc["version"],
            duration_s=doc["duration_s"],
            outputs=list(doc.get("outputs", [])),
        )

    def resolved_spec(self) -> SystemSpec:
        if self.spec is None:
            raise ValueError(f"{self.subcommand} manifest carries no system")
        return SystemSpec.from_document(self.spec)


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _check_collisions(paths: Sequence[Path], force: bool) -> None:
    taken = [p for p in paths if p.exists()]
    if taken and not force:
        names = ", ".join(str(p) for p in taken)
        raise UsageError(f"output exists: {names} (pass --force to overwrite)")


def _write_manifest(
    subcommand: str,
    spec: SystemSpec | None,
    parameters: dict,
    seeds: dict,
    outputs: list[Path],
    t0: float,
) -> None:
    """Write the sidecar next to the first output (no outputs, no manifest)."""
    if not outputs:
        return
    manifest = RunManifest(
        subcommand=subcommand,
        spec=spec.to_document() if spec is not None else None,
        parameters=parameters,
        seeds=seeds,
        version=__version__,
        duration_s=time.perf_counter() - t0,
        outputs=[str(p) for p in outputs],
    )
    path = _manifest_path(outputs[0])
    path.write_text(json.dumps(manifest.to_document(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# shared flag groups and spec resolution


def _add_spec_flags(sp: argparse.ArgumentParser, inline_alpha: bool) -> None:
    sp.add_argument("--config", type=Path, help="JSON system config (core schema)")
    sp.add_argument(
        "--units",
        choices=("kappa_r", "kappa", "rate"),
        help="override the config's rate units (default from file, else kappa_r)",
    )
    sp.add_argument("--N", dest="n_cells", type=int, help="inline system: number of cells")
    sp.add_argument(
        "--g", type=float, default=0.8, help="inline system: coupling g in kappa units"
    )
    sp.add_argument(
        "--kind",
        choices=sorted(_KIND_NAMES),
        default="side",
        help="inline system: cell coupling kind",
    )
    sp.add_argument(
        "--gamma-e", type=float, default=0.0, help="inline system: atom loss in kappa units"
    )
    sp.add_argument(
        "--kappa-ext", type=float, default=0.0, help="inline system: cavity loss in kappa units"
    )
    sp.add_argument(
        "--phi", type=float, default=0.0, help="inline system: inter-cell hop phase (radians)"
    )
    if inline_alpha:
        sp.add_argument(
            "--alpha",
            type=float,
            help="chirality kappa_l/kappa_r; overrides the config at fixed total kappa",
        )


def _resolve_spec(args: argparse.Namespace) -> tuple[SystemSpec, str]:
    """The system a subcommand acts on, plus the unit convention used."""
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError(f"malformed config {args.config}: expected a JSON object")
        if args.units is not None:
            doc["units"] = args.units
        units = doc.get("units", "kappa_r")
        try:
            spec = SystemSpec.from_document(doc)
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"malformed config {args.config}: {exc}") from exc
    elif args.n_cells is not None:
        units = "kappa"
        alpha = getattr(args, "alpha", None)
        a = 1.0 if alpha is None else alpha
        if a < 0:
            raise UsageError("--alpha must be nonnegative")
        kappa_r = 1.0 / (1.0 + a)
        try:
            spec = SystemSpec(
                n_cells=args.n_cells,
                cavity_freq=0.0,
                atom_freq=0.0,
                coupling_g=args.g,
                kappa_r=kappa_r,
                kappa_l=1.0 - kappa_r,
                hop_phase=args.phi,
                atom_loss=args.gamma_e,
                cavity_loss=args.kappa_ext,
                kind=_KIND_NAMES[args.kind],
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        raise UsageError("need --config or an inline system (--N, --g, ...)")
    alpha = getattr(args, "alpha", None)
    if args.config is not None and alpha is not None:
        if alpha < 0:
            raise UsageError("--alpha must be nonnegative")
        spec = spec_at_alpha(spec, alpha)
    return spec, units


def _add_grid_flags(
    sp: argparse.ArgumentParser,
    d_default: tuple[float, float, int] | None,
    a_default: tuple[float, float, int] | None,
) -> None:
    sp.add_argument(
        "--deltas",
        nargs=3,
        type=float,
        metavar=("LO", "HI", "COUNT"),
        default=d_default,
        required=d_default is None,
        help="detuning axis in kappa units: min max count",
    )
    sp.add_argument(
        "--alphas",
        nargs=3,
        type=float,
        metavar=("LO", "HI", "COUNT"),
        default=a_default,
        required=a_default is None,
        help="chirality axis: min max count",
    )


def _axis(raw: Sequence[float], name: str, scale: float = 1.0) -> tuple[float, float, int]:
    lo, hi, count_f = raw
    count = int(round(count_f))
    if count < 2:
        raise UsageError(f"--{name} needs a count of at least 2")
    if not lo < hi:
        raise UsageError(f"--{name} must be strictly increasing")
    return (lo * scale, hi * scale, count)


def _make_grid(spec: SystemSpec, args: argparse.Namespace) -> SweepGrid:
    try:
        return SweepGrid(
            base=spec,
            delta_axis=_axis(args.deltas, "deltas", spec.kappa),
            alpha_axis=_axis(args.alphas, "alphas"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_out_flags(sp: argparse.ArgumentParser, required: bool = True) -> None:
    sp.add_argument("--out", type=Path, required=required, help="output CSV path")
    sp.add_argument("--force", action="store_true", help="overwrite existing outputs")


def _add_threads_flag(sp: argparse.ArgumentParser) -> None:
    sp.add_argument(
        "--threads",
        type=int,
        help="worker threads (default: CHIRALPB_THREADS, else machine parallelism)",
    )


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        writer.writerows(rows)


def _observable_row(
    spec: SystemSpec, delta: float, alpha: float, kappa: float
) -> list[str]:
    res = scatter_point(spec, DriveFrame.at_detuning(spec, delta))
    return [
        _fmt(delta / kappa),
        _fmt(alpha),
        _fmt(res.g2),
        _fmt(res.g3),
        _fmt(res.transmission),
        _fmt(res.reflection),
        _fmt(res.arg_p2),
        res.label.value,
        "",
    ]


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_point(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    spec, units = _resolve_spec(args)
    outputs = [args.out] if args.out is not None else []
    if outputs:
        _check_collisions(outputs + [_manifest_path(outputs[0])], args.force)
    delta = args.delta * spec.kappa
    row = _observable_row(spec, delta, spec.alpha, spec.kappa)
    if outputs:
        _write_rows(args.out, CSV_HEADER, [row])
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(list(CSV_HEADER))
        writer.writerow(row)
    _write_manifest(
        "point",
        spec,
        {"units": units, "delta_over_kappa": args.delta, "threads": args.threads},
        {},
        outputs,
        t0,
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    spec, units = _resolve_spec(args)
    quantities = {q.strip() for q in args.quantities.split(",") if q.strip()}
    known = {"g2", "g3", "T", "R", "arg_p2", "label"}
    if not quantities or quantities - known:
        raise UsageError(
            f"--quantities must be a comma list from {sorted(known)}, got {args.quantities!r}"
        )
    grid = _make_grid(spec, args)
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    table = sweep(grid, quantities=quantities, threads=args.threads)
    with args.out.open("w", newline="") as fh:
        table.write_csv(fh)
    _write_manifest(
        "sweep",
        spec,
        {
            "units": units,
            "deltas_over_kappa": list(args.deltas),
            "alphas": list(args.alphas),
            "quantities": sorted(quantities),
            "threads": args.threads,
            "backend": backend_name(),
        },
        {},
        [args.out],
        t0,
    )
    return EXIT_OK


def _cmd_zeros(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    spec, units = _resolve_spec(args)
    grid = _make_grid(spec, args)
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    zeros = find_zeros(spec, grid, threads=args.threads)
    rows = []
    for z in zeros:
        spec_z = spec_at_alpha(spec, z.chirality)
        row = _observable_row(spec_z, z.detuning, z.chirality, spec.kappa)
        row.extend([_fmt(z.residual), str(z.winding)])
        rows.append(row)
    _write_rows(args.out, list(CSV_HEADER) + ["residual", "winding"], rows)
    _write_manifest(
        "zeros",
        spec,
        {
            "units": units,
            "deltas_over_kappa": list(args.deltas),
            "alphas": list(args.alphas),
            "threads": args.threads,
            "backend": backend_name(),
            "n_zeros": len(zeros),
        },
        {},
        [args.out],
        t0,
    )
    print(f"zeros: found {len(zeros)} perfect-blockade points -> {args.out}")
    return EXIT_OK


def _cmd_alpha_opt(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    if any(n < 1 for n in args.n_cells):
        raise UsageError("--N entries must be >= 1")
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    region = None
    if args.deltas is not None or args.alphas is not None:
        if args.deltas is None or args.alphas is None:
            raise UsageError("--deltas and --alphas must be given together")
        placeholder = SystemSpec(
            n_cells=args.n_cells[0], cavity_freq=0.0, atom_freq=0.0,
            coupling_g=args.g, kappa_r=0.5, kappa_l=0.5,
        )
        region = SweepGrid(
            base=placeholder,
            delta_axis=_axis(args.deltas, "deltas"),
            alpha_axis=_axis(args.alphas, "alphas"),
        )
    rows = []
    for n in args.n_cells:
        result = alpha_opt(n, args.g, kappa=1.0, region=region, threads=args.threads)
        rows.append(
            [
                str(n),
                _fmt(result.alpha_opt),
                _fmt(result.delta_opt),
                str(result.alpha_levels),
                str(len(result.zeros)),
            ]
        )
        print(
            f"alpha-opt: N={n} alpha_opt={result.alpha_opt:.6f} "
            f"|delta_opt|/kappa={result.delta_opt:.6f} levels={result.alpha_levels}"
        )
    _write_rows(args.out, _ALPHA_OPT_HEADER, rows)
    _write_manifest(
        "alpha-opt",
        None,
        {
            "n_cells": list(args.n_cells),
            "g_over_kappa": args.g,
            "deltas_over_kappa": list(args.deltas) if args.deltas else None,
            "alphas": list(args.alphas) if args.alphas else None,
            "threads": args.threads,
            "backend": backend_name(),
        },
        {},
        [args.out],
        t0,
    )
    return EXIT_OK


def _cmd_disorder(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    spec, units = _resolve_spec(args)
    if args.W < 0:
        raise UsageError("--W must be nonnegative")
    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    grid = _make_grid(spec, args)
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    table = disorder_ensemble(
        spec, args.W, args.instances, args.seed, grid, threads=args.threads
    )
    with args.out.open("w", newline="") as fh:
        table.write_csv(fh)
    _write_manifest(
        "disorder",
        spec,
        {
            "units": units,
            "W_over_kappa": args.W,
            "n_instances": args.instances,
            "deltas_over_kappa": list(args.deltas),
            "alphas": list(args.alphas),
            "threads": args.threads,
            "backend": backend_name(),
        },
        {"ensemble_seed": args.seed},
        [args.out],
        t0,
    )
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    # Imported lazily: the scattering subcommands should not pay for the
    # master-equation stack (sparse algebra) at startup.
    from chiralpb.lindblad import (
        TrajectoryConfig,
        TruncationSpec,
        build_liouvillian,
        me_correlation,
        steady_state,
        trajectory_g2,
    )

    t0 = time.perf_counter()
    spec, units = _resolve_spec(args)
    trunc = TruncationSpec(photons_per_cavity=args.photons)
    kappa = spec.kappa
    omega0 = args.omega * kappa
    d_lo, d_hi, d_count = _axis(args.deltas, "deltas", kappa)
    deltas = np.linspace(d_lo, d_hi, d_count)

    outputs = [args.out]
    scaling_path = args.out.with_name(args.out.stem + "_scaling.csv")
    factors = [float(f) for f in args.omega_factors]
    if any(f <= 0 for f in factors):
        raise UsageError("--omega-factors must be positive")
    if len(factors) >= 2:
        outputs.append(scaling_path)
    _check_collisions(outputs + [_manifest_path(args.out)], args.force)

    def me_g2(delta: float, omega: float) -> float:
        frame = DriveFrame.at_detuning(spec, delta, drive_amp=omega)
        state = steady_state(
            build_liouvillian(spec, frame, trunc), allow_large=args.allow_large
        )
        return me_correlation(state, spec, frame, 2)

    def deviations(omega: float) -> np.ndarray:
        devs = np.empty(deltas.shape[0])
        for i, d in enumerate(deltas):
            g2_sc = correlation(spec, DriveFrame.at_detuning(spec, d), 2)
            devs[i] = abs(me_g2(d, omega) - g2_sc) / g2_sc
        return devs

    rows = []
    devs0 = np.empty(deltas.shape[0])
    for i, d in enumerate(deltas):
        g2_sc = correlation(spec, DriveFrame.at_detuning(spec, d), 2)
        g2_me = me_g2(d, omega0)
        devs0[i] = abs(g2_me - g2_sc) / g2_sc
        rows.append([_fmt(d / kappa), _fmt(g2_sc), _fmt(g2_me), _fmt(devs0[i])])
    max_dev = float(devs0.max())
    _write_rows(args.out, _VALIDATE_HEADER, rows)
    print(
        f"validate: N={spec.n_cells} {spec.kind.value}, Omega={args.omega:g} kappa, "
        f"{d_count} detunings in [{args.deltas[0]:g}, {args.deltas[1]:g}] kappa"
    )
    verdict = "PASS" if max_dev <= args.tol else "FAIL"
    print(f"  max |g2_me - g2_chain| / g2_chain = {max_dev:.3e} (tol {args.tol:g}) {verdict}")

    slope = None
    if len(factors) >= 2:
        scaled = [max_dev if f == 1.0 else float(deviations(f * omega0).max()) for f in factors]
        _write_rows(
            scaling_path,
            _SCALING_HEADER,
            [[_fmt(f * args.omega), _fmt(dev)] for f, dev in zip(factors, scaled)],
        )
        coeffs = np.polyfit(np.log(factors), np.log(scaled), 1)
        slope = float(coeffs[0])
        print(
            "  drive scaling: deviations "
            + " ".join(f"{d:.3e}" for d in scaled)
            + f" at Omega x {factors} -> slope {slope:.3f} (expect 2)"
        )

    trajectory = None
    if args.trajectories > 0:
        traj_omega = args.traj_omega * kappa
        traj_delta = args.traj_delta * kappa
        frame = DriveFrame.at_detuning(spec, traj_delta, drive_amp=traj_omega)
        tconf = TrajectoryConfig(n_traj=args.trajectories, seed=args.traj_seed)
        estimate, stderr = trajectory_g2(spec, frame, trunc, tconf)
        reference = me_correlation(
            steady_state(build_liouvillian(spec, frame, trunc), allow_large=args.allow_large),
            spec,
            frame,
            2,
        )
        n_se = abs(estimate - reference) / stderr if stderr > 0 else float("inf")
        trajectory = {
            "n_traj": args.trajectories,
            "delta_over_kappa": args.traj_delta,
            "omega_over_kappa": args.traj_omega,
            "estimate": estimate,
            "std_error": stderr,
            "steady_state": reference,
            "n_std_errors": n_se,
        }
        print(
            f"  trajectories ({args.trajectories}, seed {args.traj_seed}): "
            f"g2 = {estimate:.5f} +- {stderr:.5f}, steady state {reference:.5f} "
            f"({n_se:.2f} standard errors)"
        )

    _write_manifest(
        "validate",
        spec,
        {
            "units": units,
            "omega_over_kappa": args.omega,
            "omega_factors": factors,
            "deltas_over_kappa": list(args.deltas),
            "photons_per_cavity": args.photons,
            "tol": args.tol,
            "max_rel_dev": max_dev,
            "scaling_slope": slope,
            "trajectory": trajectory,
        },
        {"trajectory_seed": args.traj_seed} if args.trajectories > 0 else {},
        outputs,
        t0,
    )
    return EXIT_OK if max_dev <= args.tol else EXIT_NUMERICAL


_FIT_FORMS = {
    "alpha-opt": FitForm.ALPHA_OPT,
    "delta-opt": FitForm.DELTA_OPT,
    "power-law": FitForm.POWER_LAW,
    "log-linear": FitForm.LOG_LINEAR,
}


def _cmd_fit(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    try:
        with args.infile.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise UsageError(f"{args.infile}: empty CSV")
            for col in (args.x_col, args.y_col):
                if col not in reader.fieldnames:
                    raise UsageError(
                        f"{args.infile}: no column {col!r} (have {reader.fieldnames})"
                    )
            points = []
            for record in reader:
                x = float(record[args.x_col])
                y = float(record[args.y_col])
                if args.y_transform == "one-minus":
                    y = 1.0 - y
                if np.isfinite(x) and np.isfinite(y):
                    points.append((x, y))
    except OSError as exc:
        raise UsageError(f"cannot read {args.infile}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{args.infile}: non-numeric cell ({exc})") from exc
    guess = tuple(args.guess) if args.guess else None
    result = fit_scaling(points, _FIT_FORMS[args.form], initial_guess=guess)
    report = {
        "form": result.form.value,
        "params": list(result.params),
        "sse": result.sse,
        "r_squared": result.r_squared,
        "iterations": result.iterations,
        "n_points": len(points),
        "x_col": args.x_col,
        "y_col": args.y_col,
        "y_transform": args.y_transform,
    }
    args.out.write_text(json.dumps(report, indent=2) + "\n")
    print(
        f"fit: {args.form} on {len(points)} points -> params "
        + " ".join(f"{p:.6g}" for p in result.params)
        + f", R^2 = {result.r_squared:.6f}"
    )
    _write_manifest(
        "fit",
        None,
        {
            "infile": str(args.infile),
            "form": args.form,
            "x_col": args.x_col,
            "y_col": args.y_col,
            "y_transform": args.y_transform,
            "initial_guess": list(guess) if guess else None,
        },
        {},
        [args.out],
        t0,
    )
    return EXIT_OK


def _cmd_curve(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    _check_collisions([args.out, _manifest_path(args.out)], args.force)
    lo, hi, count = _axis(args.alphas, "alphas")
    if lo < 0:
        raise UsageError("--alphas must be nonnegative")
    rows = []
    for alpha in np.linspace(lo, hi, count):
        a = float(alpha)
        g_single = pb_curve_single(a) if 0.0 <= a < 1.0 else float("nan")
        # Both blockade curves exist only for alpha < 1; skipping the call
        # also dodges the removable g = 0, alpha = 1 singularity of p2.
        g_odd = odd_resonant(a, 0.0, 1.0)[2] if a < 1.0 else float("nan")
        rows.append([_fmt(a), _fmt(g_single), _fmt(g_odd), _fmt(survival_limit(a))])
    _write_rows(args.out, _CURVE_HEADER, rows)
    _write_manifest("curve", None, {"alphas": list(args.alphas)}, {}, [args.out], t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="chiralpb",
        description="Few-photon scattering and photon blockade in chiral "
        "waveguide-cavity QED arrays.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    sp = sub.add_parser("point", help="observables of one drive point")
    _add_spec_flags(sp, inline_alpha=True)
    sp.add_argument("--delta", type=float, default=0.0, help="detuning in kappa units")
    _add_threads_flag(sp)
    sp.add_argument("--out", type=Path, help="output CSV (default: stdout, no manifest)")
    sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sp.set_defaults(handler=_cmd_point)

    sp = sub.add_parser("sweep", help="grid sweep over (detuning, chirality)")
    _add_spec_flags(sp, inline_alpha=False)
    _add_grid_flags(sp, d_default=None, a_default=None)
    sp.add_argument(
        "--quantities",
        default="g2,T,R,arg_p2,label",
        help="comma list of g2,g3,T,R,arg_p2,label (g3 adds the three-photon solve)",
    )
    _add_threads_flag(sp)
    _add_out_flags(sp)
    sp.set_defaults(handler=_cmd_sweep)

    sp = sub.add_parser("zeros", help="locate perfect-blockade zeros")
    _add_spec_flags(sp, inline_alpha=False)
    _add_grid_flags(sp, d_default=(-0.8, 0.8, 240), a_default=(0.001, 0.999, 240))
    _add_threads_flag(sp)
    _add_out_flags(sp)
    sp.set_defaults(handler=_cmd_zeros)

    sp = sub.add_parser("alpha-opt", help="weakest blockade chirality per array size")
    sp.add_argument(
        "--N", dest="n_cells", type=int, nargs="+", required=True, help="array sizes"
    )
    sp.add_argument("--g", type=float, default=0.8, help="coupling g in kappa units")
    _add_grid_flags(sp, d_default=argparse.SUPPRESS, a_default=argparse.SUPPRESS)
    _add_threads_flag(sp)
    _add_out_flags(sp)
    sp.set_defaults(handler=_cmd_alpha_opt, deltas=None, alphas=None)

    sp = sub.add_parser("disorder", help="geometric-mean g2 over a disorder ensemble")
    _add_spec_flags(sp, inline_alpha=False)
    _add_grid_flags(sp, d_default=None, a_default=None)
    sp.add_argument("--W", type=float, required=True, help="disorder strength in kappa units")
    sp.add_argument("--instances", type=int, required=True, help="ensemble size")
    sp.add_argument("--seed", type=int, required=True, help="ensemble seed")
    _add_threads_flag(sp)
    _add_out_flags(sp)
    sp.set_defaults(handler=_cmd_disorder)

    sp = sub.add_parser(
        "validate", help="cross-check chain amplitudes against the master equation"
    )
    _add_spec_flags(sp, inline_alpha=True)
    sp.add_argument(
        "--omega", type=float, default=1e-3, help="drive amplitude in kappa units"
    )
    sp.add_argument(
        "--deltas",
        nargs=3,
        type=float,
        metavar=("LO", "HI", "COUNT"),
        default=(-1.0, 1.0, 21),
        help="detuning axis in kappa units: min max count",
    )
    sp.add_argument(
        "--omega-factors",
        nargs="+",
        type=float,
        default=(1.0, 2.0, 4.0, 8.0),
        help="drive multiples for the quadratic-deviation check (one value skips it)",
    )
    sp.add_argument(
        "--photons", type=int, default=3, help="photon cutoff per cavity"
    )
    sp.add_argument(
        "--tol", type=float, default=0.02, help="maximum relative g2 deviation to pass"
    )
    sp.add_argument(
        "--allow-large",
        action="store_true",
        help="lift the steady-state solver's dimension cap",
    )
    sp.add_argument(
        "--trajectories",
        type=int,
        default=0,
        help="also run this many quantum trajectories (0 skips)",
    )
    sp.add_argument("--traj-seed", type=int, default=0, help="trajectory RNG seed")
    sp.add_argument(
        "--traj-omega",
        type=float,
        default=0.2,
        help="drive for the trajectory block in kappa units",
    )
    sp.add_argument(
        "--traj-delta",
        type=float,
        default=0.3,
        help="detuning for the trajectory block in kappa units",
    )
    _add_threads_flag(sp)
    _add_out_flags(sp)
    sp.set_defaults(handler=_cmd_validate)

    sp = sub.add_parser("fit", help="fit a scaling law to CSV columns")
    sp.add_argument("--in", dest="infile", type=Path, required=True, help="input CSV")
    sp.add_argument(
        "--form", choices=sorted(_FIT_FORMS), required=True, help="model form"
    )
    sp.add_argument("--x-col", default="n_cells", help="x column name")
    sp.add_argument("--y-col", default="alpha_opt", help="y column name")
    sp.add_argument(
        "--y-transform",
        choices=("none", "one-minus"),
        default="none",
        help="apply y -> 1 - y before fitting (for blockade-chirality decays)",
    )
    sp.add_argument(
        "--guess", nargs="+", type=float, help="initial parameters (model-dependent count)"
    )
    sp.add_argument("--out", type=Path, required=True, help="output JSON path")
    sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sp.set_defaults(handler=_cmd_fit)

    sp = sub.add_parser("curve", help="closed-form blockade/survival curves")
    sp.add_argument(
        "--alphas",
        nargs=3,
        type=float,
        metavar=("LO", "HI", "COUNT"),
        default=(0.0, 0.99, 100),
        help="chirality axis: min max count",
    )
    sp.add_argument("--out", type=Path, required=True, help="output CSV path")
    sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sp.set_defaults(handler=_cmd_curve)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, dispatch, and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"chiralpb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"chiralpb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"chiralpb: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
