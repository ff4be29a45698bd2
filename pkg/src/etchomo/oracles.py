"""Self-contained verification suites behind the `oracle` CLI command.

Each suite checks the fast path against an independent slow path: direct
cosine summation for the transforms, dense factorization for the solver,
stencil application of the reference system for the preconditioner, and a
general-purpose LP solver for the closed-form reference parameters.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import Axis, BoundaryConfig, GridSpec, OrthotropicField
from .krylov import dense_solve, pcg
from .preconditioner import (
    CoefficientStats,
    FctPreconditioner,
    coefficient_stats,
    reference_system,
    solve_reference_lp,
)
from .tpfa import apply_operator, assemble_dense, build_rhs, build_system
from .transforms import FctPlan, SlabBuffer, dct1d_ref_forward, fct_forward_batch, fct_backward_batch


def _random_field(rng, nx, ny, nz, contrast=100.0) -> OrthotropicField:
    grid = GridSpec(nx, ny, nz)
    shape = (3, grid.n_cells)
    k = np.exp(rng.uniform(np.log(1.0 / contrast), np.log(contrast), shape))
    return OrthotropicField(grid, k[0], k[1], k[2])


def _ref2d(v: np.ndarray) -> np.ndarray:
    out = np.apply_along_axis(dct1d_ref_forward, 1, v)
    return np.apply_along_axis(dct1d_ref_forward, 0, out)


def check_transforms(max_n: int, rng) -> tuple[bool, str]:
    sizes = sorted(set(list(range(1, max_n + 1)) + [8, 9]))
    worst = 0.0
    for nx in sizes:
        for ny in sizes:
            for nz in (1, 3):
                plan = FctPlan(nx, ny, nz)
                buf = SlabBuffer(plan, rng.standard_normal((nz, ny, nx)))
                original = buf.data.copy()
                fct_forward_batch(buf)
                for k in range(nz):
                    want = _ref2d(original[k])
                    scale = max(float(np.max(np.abs(want))), 1e-30)
                    worst = max(worst, float(np.max(np.abs(buf.data[k] - want))) / scale)
                fct_backward_batch(buf)
                scale = float(np.max(np.abs(original)))
                worst = max(worst, float(np.max(np.abs(buf.data - original))) / scale)
    return worst <= 1e-12, f"worst relative deviation {worst:.3e}"


def check_dense_solver(max_n: int, rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(5):
        dims = rng.integers(2, max_n + 1, 3)
        field = _random_field(rng, *map(int, dims), contrast=100.0)
        sys = build_system(field, BoundaryConfig(Axis.Z, 1.0, 0.0))
        b = build_rhs(sys)
        dense = assemble_dense(sys)
        direct = dense_solve(dense, b)
        refs = solve_reference_lp(coefficient_stats(sys))
        apply_m = FctPreconditioner(sys.grid, refs)
        iterative, _ = pcg(lambda u: apply_operator(sys, u), apply_m, b, 1e-12)
        worst = max(
            worst,
            float(np.linalg.norm(iterative - direct) / np.linalg.norm(direct)),
        )
    return worst <= 1e-8, f"worst relative deviation {worst:.3e}"


def check_precond_exactness(max_n: int, rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(8):
        dims = rng.integers(1, 2 * max_n + 1, 3)
        grid = GridSpec(*map(int, dims))
        stats = CoefficientStats(*np.sort(rng.uniform(0.1, 10.0, 10).reshape(5, 2), axis=1).ravel())
        refs = solve_reference_lp(stats)
        apply_m = FctPreconditioner(grid, refs)
        ref_sys = reference_system(grid, refs)
        r = rng.standard_normal(grid.n_cells)
        back = apply_operator(ref_sys, apply_m(r))
        worst = max(worst, float(np.linalg.norm(back - r) / np.linalg.norm(r)))
    return worst <= 1e-11, f"worst apply-back residual {worst:.3e}"


def check_reference_lp(rng) -> tuple[bool, str]:
    from scipy.optimize import linprog

    worst = 0.0
    for _ in range(5):
        vals = np.sort(np.exp(rng.uniform(-4, 4, 10)).reshape(5, 2), axis=1)
        stats = CoefficientStats(*vals.ravel())
        refs = solve_reference_lp(stats)
        got = math.log(refs.objective)
        # variables: cx, cy, cz, cin, cout, lo, hi
        groups = list(stats.groups().values())
        cost = np.array([0, 0, 0, 0, 0, -1.0, 1.0])
        rows, rhs = [], []
        for gi, (mn, mx) in enumerate(groups):
            row = np.zeros(7)
            row[gi] = 1.0
            row[5] = 1.0
            rows.append(row)
            rhs.append(math.log(mn))
            row = np.zeros(7)
            row[gi] = -1.0
            row[6] = -1.0
            rows.append(row)
            rhs.append(-math.log(mx))
        res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs),
                      bounds=[(None, None)] * 7, method="highs")
        if not res.success:
            return False, "reference LP solver failed"
        worst = max(worst, abs(got - res.fun))
    return worst <= 1e-9, f"worst objective gap {worst:.3e}"


def run_all(max_n: int = 5, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [
        ("transform-vs-direct-sum", *check_transforms(max_n, rng)),
        ("pcg-vs-dense-solve", *check_dense_solver(max_n, rng)),
        ("preconditioner-exactness", *check_precond_exactness(max_n, rng)),
        ("reference-parameters-lp", *check_reference_lp(rng)),
    ]
