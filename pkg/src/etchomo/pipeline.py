"""End-to-end homogenization runs and the desk-scale experiment drivers.

Axis handling works by physically permuting the voxel data so the requested
Dirichlet direction becomes the canonical z; the discretization and the
preconditioner never change orientation. Every driver emits deterministic
artifacts (JSON reports, iteration-history CSVs); wall times are recorded but
are the only non-reproducible fields.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .grid import (
    Axis,
    BoundaryConfig,
    ConfigError,
    GridSpec,
    OrthotropicField,
    RANDOM_BALL_PRESETS,
    gen_center_ball,
    gen_channels,
    gen_random_balls,
    gen_smooth_problem,
)
from .krylov import SolveReport, pcg
from .preconditioner import (
    FctPreconditioner,
    JacobiPreconditioner,
    SsorPreconditioner,
    coefficient_stats,
    identity_apply,
    ones_reference,
    solve_reference_lp,
)
from .tpfa import (
    add_source,
    apply_operator,
    build_rhs,
    build_system,
    effective_conductivity,
    l2_error_midpoint,
    reconstruct_boundary_flux,
)

_DTYPES = {"f64": np.float64, "f32": np.float32}


@dataclass
class ExperimentPlan:
    """Declarative description of one experiment family."""

    generator: str
    params: dict = dc_field(default_factory=dict)
    axis: Axis = Axis.Z
    p_in: float = 1.0
    p_out: float = 0.0
    rtols: tuple = (1e-9,)
    preconds: tuple = ("fct",)
    ref_mode: str = "opt"
    precision: str = "f64"
    omega: float = 1.0
    max_iter: int = 1024
    out_dir: Path | None = None

    def __post_init__(self):
        if not self.rtols:
            raise ConfigError("plan needs at least one rtol")
        for rt in self.rtols:
            if not 0.0 < rt < 1.0:
                raise ConfigError(f"rtol must lie in (0, 1), got {rt}")
        if self.p_in == self.p_out:
            raise ConfigError("p_in must differ from p_out")
        if self.precision not in _DTYPES:
            raise ConfigError(f"precision must be f64 or f32, got {self.precision!r}")
        if self.ref_mode not in ("opt", "one"):
            raise ConfigError(f"ref mode must be opt or one, got {self.ref_mode!r}")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)


def axis_permute(field: OrthotropicField, axis: Axis) -> OrthotropicField:
    """Transpose the voxel data so `axis` becomes the canonical z direction.

    Convention: the requested axis and z are swapped (an involution), so a
    constant Diag(a, b, c) becomes Diag(c, b, a) under axis=x and
    Diag(a, c, b) under axis=y; the array holding the requested direction's
    conductivity always lands on kz.
    """
    axis = Axis(axis)
    if axis is Axis.Z:
        return field
    g = field.grid
    kx3, ky3, kz3 = field.cube("kx"), field.cube("ky"), field.cube("kz")
    if axis is Axis.X:
        def swap(a):
            return np.ascontiguousarray(np.swapaxes(a, 0, 2))

        new_grid = GridSpec(g.nz, g.ny, g.nx, g.lz, g.ly, g.lx)
        return OrthotropicField(new_grid, swap(kz3), swap(ky3), swap(kx3))

    def swap(a):
        return np.ascontiguousarray(np.swapaxes(a, 0, 1))

    new_grid = GridSpec(g.nx, g.nz, g.ny, g.lx, g.lz, g.ly)
    return OrthotropicField(new_grid, swap(kx3), swap(kz3), swap(ky3))


def _parse_precond(tag: str, default_omega: float) -> tuple[str, float]:
    if tag.startswith("ssor"):
        omega = default_omega
        if ":" in tag:
            omega = float(tag.split(":", 1)[1])
        return "ssor", omega
    if tag in ("fct", "jacobi", "none"):
        return tag, default_omega
    raise ConfigError(f"unknown preconditioner tag {tag!r}")


def _make_preconditioner(kind, sys, refs, omega, dtype):
    if kind == "fct":
        return FctPreconditioner(sys.grid, refs, dtype)
    if kind == "ssor":
        return SsorPreconditioner(sys, omega)
    if kind == "jacobi":
        return JacobiPreconditioner(sys)
    return identity_apply


def homogenize(
    field: OrthotropicField,
    boundary: BoundaryConfig,
    rtol: float = 1e-9,
    precond: str = "fct",
    ref_mode: str = "opt",
    precision: str = "f64",
    omega: float = 1.0,
    max_iter: int = 1024,
) -> SolveReport:
    """Full effective-conductivity run: permute, assemble, pick reference
    constants, solve, reconstruct the outflow flux, average."""
    if precision not in _DTYPES:
        raise ConfigError(f"precision must be f64 or f32, got {precision!r}")
    if ref_mode not in ("opt", "one"):
        raise ConfigError(f"ref mode must be opt or one, got {ref_mode!r}")
    kind, omega = _parse_precond(precond, omega)
    dtype = _DTYPES[precision]

    t0 = time.perf_counter()
    work = axis_permute(field, boundary.axis).astype(dtype)
    canon = BoundaryConfig(Axis.Z, boundary.p_in, boundary.p_out)
    sys = build_system(work, canon)
    stats = coefficient_stats(sys)
    refs = solve_reference_lp(stats) if ref_mode == "opt" else ones_reference(stats)
    apply_m = _make_preconditioner(kind, sys, refs, omega, dtype)
    b = build_rhs(sys)
    prep_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    solution, report = pcg(
        lambda u: apply_operator(sys, u), apply_m, b, rtol, max_iter
    )
    flux = reconstruct_boundary_flux(sys, solution)
    report.kappa_eff = effective_conductivity(sys, flux)
    report.exec_seconds = time.perf_counter() - t1
    report.prep_seconds = prep_seconds
    report.precision = precision
    report.preconditioner = f"ssor:{omega:g}" if kind == "ssor" else kind
    report.ref_params = refs
    return report


def solve_smooth(
    n: int,
    rtol: float = 1e-9,
    ref_mode: str = "opt",
    precision: str = "f64",
    max_iter: int = 1024,
) -> SolveReport:
    """Manufactured-solution run: Dirichlet data sampled from the closed-form
    solution on the z faces, volumetric source added, error measured against
    the exact samples."""
    dtype = _DTYPES[precision]
    t0 = time.perf_counter()
    field, exact, source = gen_smooth_problem(n)
    field = field.astype(dtype)
    grid = field.grid
    # boundary constants are placeholders; the actual data is sampled below
    sys = build_system(field, BoundaryConfig(Axis.Z, 1.0, 0.0))
    X, Y, _ = grid.cell_centers()
    b = build_rhs(
        sys,
        dirichlet_in=np.asarray(exact(X[0], Y[0], 0.0), dtype=dtype),
        dirichlet_out=np.asarray(exact(X[0], Y[0], grid.lz), dtype=dtype),
    )
    b = add_source(sys, b, source)
    stats = coefficient_stats(sys)
    refs = solve_reference_lp(stats) if ref_mode == "opt" else ones_reference(stats)
    apply_m = FctPreconditioner(grid, refs, dtype)
    prep_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    solution, report = pcg(
        lambda u: apply_operator(sys, u), apply_m, b, rtol, max_iter
    )
    report.l2_error = l2_error_midpoint(grid, solution.astype(np.float64), exact)
    report.exec_seconds = time.perf_counter() - t1
    report.prep_seconds = prep_seconds
    report.precision = precision
    report.ref_params = refs
    return report


def make_field(generator: str, params: dict) -> OrthotropicField:
    """Instantiate a named test-case generator from plain parameters."""
    if generator == "smooth":
        return gen_smooth_problem(params.get("n", 32))[0]
    if generator == "center-ball":
        return gen_center_ball(params.get("n", 64), params.get("kappa_inc", 10.0))
    if generator == "random-balls":
        preset = params.get("preset")
        merged = dict(RANDOM_BALL_PRESETS[preset]) if preset else {}
        merged.update({k: v for k, v in params.items() if k != "preset"})
        return gen_random_balls(
            merged.get("n", 64),
            merged["count"],
            merged["r_min"],
            merged["r_max"],
            merged.get("kappa_inc", 10.0),
            merged.get("seed", 0),
        )
    if generator == "channels":
        return gen_channels(
            params.get("cells_per_period", 8),
            params.get("periods", 8),
            params.get("psi", 1.0),
        )
    raise ConfigError(f"unknown generator {generator!r}")


# ----------------------------------------------------------------------------
# artifacts
# ----------------------------------------------------------------------------

def report_to_dict(
    report: SolveReport,
    config: dict,
    grid: GridSpec,
    boundary: BoundaryConfig,
    rtol: float,
) -> dict:
    doc = {
        "config": config,
        "grid": {
            "nx": grid.nx, "ny": grid.ny, "nz": grid.nz,
            "lx": grid.lx, "ly": grid.ly, "lz": grid.lz,
        },
        "boundary": {
            "axis": boundary.axis.value,
            "p_in": boundary.p_in,
            "p_out": boundary.p_out,
        },
        "precond": report.preconditioner,
        "ref_params": report.ref_params.as_dict() if report.ref_params else None,
        "rtol": rtol,
        "iterations": report.iterations,
        "converged": report.converged,
        "kappa_eff": report.kappa_eff,
        "prep_seconds": report.prep_seconds,
        "exec_seconds": report.exec_seconds,
        "precision": report.precision,
    }
    if report.l2_error is not None:
        doc["l2_error"] = report.l2_error
    return doc


def write_report(path, doc: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_history(path, residuals) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("iter,relres\n")
        for i, res in enumerate(residuals):
            fh.write(f"{i},{res!r}\n")


def _write_rows(path, header: list, rows: list) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = ["" if row.get(key) is None else repr(row[key]) for key in header]
            fh.write(",".join(cells) + "\n")


# ----------------------------------------------------------------------------
# experiment drivers
# ----------------------------------------------------------------------------

def run_convergence_study(plan: ExperimentPlan) -> list:
    """Mesh sweep: per-resolution error (smooth case) or effective
    conductivity (inclusion cases), with iteration counts and timings."""
    if plan.generator not in ("smooth", "center-ball"):
        raise ConfigError("convergence study supports smooth or center-ball")
    n_values = plan.params.get("n_values") or [plan.params.get("n", 32)]
    rtol = plan.rtols[0]
    rows = []
    for n in n_values:
        if plan.generator == "smooth":
            rep = solve_smooth(n, rtol, plan.ref_mode, plan.precision, plan.max_iter)
        else:
            field = gen_center_ball(n, plan.params.get("kappa_inc", 10.0))
            rep = homogenize(
                field,
                BoundaryConfig(plan.axis, plan.p_in, plan.p_out),
                rtol,
                "fct",
                plan.ref_mode,
                plan.precision,
                max_iter=plan.max_iter,
            )
        rows.append(
            {
                "n": n,
                "dof": n**3,
                "l2_error": rep.l2_error,
                "kappa_eff": rep.kappa_eff,
                "iterations": rep.iterations,
                "prep_seconds": rep.prep_seconds,
                "exec_seconds": rep.exec_seconds,
            }
        )
    if plan.out_dir is not None:
        header = ["n", "dof", "l2_error", "kappa_eff", "iterations",
                  "prep_seconds", "exec_seconds"]
        _write_rows(plan.out_dir / "convergence.csv", header, rows)
    return rows


def compare_preconditioners(plan: ExperimentPlan) -> dict:
    """Residual histories for each requested preconditioner on one
    configuration, aligned for plotting; max_iter pinned by the plan."""
    field = make_field(plan.generator, plan.params)
    boundary = BoundaryConfig(plan.axis, plan.p_in, plan.p_out)
    rtol = plan.rtols[0]
    out = {}
    for tag in plan.preconds:
        rep = homogenize(
            field, boundary, rtol, tag, plan.ref_mode, plan.precision,
            plan.omega, plan.max_iter,
        )
        out[tag] = rep
        if plan.out_dir is not None:
            stem = tag.replace(":", "_w")
            write_history(plan.out_dir / f"history_{stem}.csv", rep.relative_residuals)
    return out


def precision_study(plan: ExperimentPlan) -> list:
    """Single-vs-double comparison: a tight double-precision run anchors the
    table, the single-precision sweep and the loosest double run are reported
    as relative differences against it."""
    field = make_field(plan.generator, plan.params)
    boundary = BoundaryConfig(plan.axis, plan.p_in, plan.p_out)
    baseline_rtol = 1e-9
    base = homogenize(field, boundary, baseline_rtol, "fct", plan.ref_mode,
                      "f64", max_iter=plan.max_iter)
    rows = [
        {
            "precision": "f64",
            "rtol": baseline_rtol,
            "kappa_eff": base.kappa_eff,
            "rel_diff": 0.0,
            "iterations": base.iterations,
            "converged": base.converged,
            "exec_seconds": base.exec_seconds,
        }
    ]
    sweep = [("f32", rt) for rt in plan.rtols] + [("f64", max(plan.rtols))]
    for precision, rt in sweep:
        rep = homogenize(field, boundary, rt, "fct", plan.ref_mode, precision,
                         max_iter=plan.max_iter)
        rows.append(
            {
                "precision": precision,
                "rtol": rt,
                "kappa_eff": rep.kappa_eff,
                "rel_diff": (rep.kappa_eff - base.kappa_eff) / base.kappa_eff,
                "iterations": rep.iterations,
                "converged": rep.converged,
                "exec_seconds": rep.exec_seconds,
            }
        )
    if plan.out_dir is not None:
        header = ["precision", "rtol", "kappa_eff", "rel_diff", "iterations",
                  "converged", "exec_seconds"]
        _write_rows(plan.out_dir / "precision.csv", header, rows)
    return rows


def channels_study(
    psis,
    ref_modes=("opt", "one"),
    cells_per_period: int = 8,
    periods: int = 8,
    rtol: float = 1e-7,
    p_in: float = 1.0,
    p_out: float = 0.0,
    precision: str = "f64",
    max_iter: int = 1024,
    out_dir=None,
) -> list:
    """Anisotropy sweep over the channel tiling comparing reference-parameter
    choices; emits one history per (psi, mode) plus a summary table."""
    rows = []
    for psi in psis:
        field = gen_channels(cells_per_period, periods, psi)
        for mode in ref_modes:
            rep = homogenize(
                field,
                BoundaryConfig(Axis.Z, p_in, p_out),
                rtol,
                "fct",
                mode,
                precision,
                max_iter=max_iter,
            )
            rows.append(
                {
                    "psi": psi,
                    "ref_mode": mode,
                    "iterations": rep.iterations,
                    "converged": rep.converged,
                    "kappa_eff": rep.kappa_eff,
                    "exec_seconds": rep.exec_seconds,
                }
            )
            if out_dir is not None:
                path = Path(out_dir) / f"history_psi{psi:g}_{mode}.csv"
                write_history(path, rep.relative_residuals)
    if out_dir is not None:
        header = ["psi", "ref_mode", "iterations", "converged", "kappa_eff",
                  "exec_seconds"]
        _write_rows(Path(out_dir) / "channels.csv", header, rows)
    return rows


def bench(n: int, precision: str = "f64", rounds: int = 10) -> dict:
    """Preparation/execution timing split for the core kernels at one size."""
    dtype = _DTYPES[precision]
    field = gen_center_ball(n, 10.0).astype(dtype)
    boundary = BoundaryConfig(Axis.Z, 1.0, 0.0)

    t0 = time.perf_counter()
    sys = build_system(field, boundary)
    refs = solve_reference_lp(coefficient_stats(sys))
    apply_m = FctPreconditioner(sys.grid, refs, dtype)
    prep = time.perf_counter() - t0

    r = build_rhs(sys)
    t0 = time.perf_counter()
    for _ in range(rounds):
        apply_m(r)
    precond_time = (time.perf_counter() - t0) / rounds
    t0 = time.perf_counter()
    for _ in range(rounds):
        apply_operator(sys, r)
    operator_time = (time.perf_counter() - t0) / rounds
    return {
        "n": n,
        "precision": precision,
        "prep_seconds": prep,
        "precond_apply_seconds": precond_time,
        "operator_apply_seconds": operator_time,
    }
