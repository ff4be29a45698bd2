"""Reference-medium preconditioner and classical baselines.

The reference operator replaces the heterogeneous transmissibilities with
five homogeneous constants (one per interior axis plus the two Dirichlet
layers). Under the plane-wise cosine transform it block-diagonalizes into
independent tridiagonal systems along z, one per transformed (x, y) mode,
each solved by non-pivoting elimination; diagonal dominance makes that safe.

Reference constants come either from a closed-form solution of the
log-domain min-max program over the coefficient statistics ("opt") or are
all ones ("one"). SSOR, Jacobi, and the identity round out the baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import BoundaryConfig, ConfigError, GridSpec, Axis
from .tpfa import DiscreteSystem, operator_diagonal, assemble_sparse
from .transforms import FctPlan, SlabBuffer, fct_backward_batch, fct_forward_batch


@dataclass(frozen=True)
class CoefficientStats:
    """Extremes of the scaled face transmissibilities (interior, per axis) and
    of the scaled boundary-layer coefficients (without the stencil's factor 2,
    which the reference operator carries explicitly)."""

    kx_min: float
    kx_max: float
    ky_min: float
    ky_max: float
    kz_min: float
    kz_max: float
    kin_min: float
    kin_max: float
    kout_min: float
    kout_max: float

    def __post_init__(self):
        for lo, hi in self.groups().values():
            if not (0.0 < lo <= hi) or not math.isfinite(hi):
                raise ConfigError("stats must satisfy 0 < min <= max < inf")

    def groups(self) -> dict:
        return {
            "x": (self.kx_min, self.kx_max),
            "y": (self.ky_min, self.ky_max),
            "z": (self.kz_min, self.kz_max),
            "in": (self.kin_min, self.kin_max),
            "out": (self.kout_min, self.kout_max),
        }


@dataclass(frozen=True)
class ReferenceParams:
    """The five homogeneous reference constants plus the spectral-equivalence
    bounds they induce on the heterogeneous operator."""

    kx_ref: float
    ky_ref: float
    kz_ref: float
    kin_ref: float
    kout_ref: float
    lambda_lo: float = 1.0
    lambda_hi: float = 1.0

    def __post_init__(self):
        for name in ("kx_ref", "ky_ref", "kz_ref", "kin_ref", "kout_ref"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 < self.lambda_lo <= self.lambda_hi):
            raise ConfigError("need 0 < lambda_lo <= lambda_hi")

    @property
    def objective(self) -> float:
        return self.lambda_hi / self.lambda_lo

    def as_dict(self) -> dict:
        return {
            "kx": self.kx_ref,
            "ky": self.ky_ref,
            "kz": self.kz_ref,
            "kin": self.kin_ref,
            "kout": self.kout_ref,
            "lambda_lo": self.lambda_lo,
            "lambda_hi": self.lambda_hi,
        }


def _minmax(arr: np.ndarray) -> tuple[float, float]:
    # degenerate axes (no faces) contribute a neutral group
    if arr.size == 0:
        return 1.0, 1.0
    return float(arr.min()), float(arr.max())


def coefficient_stats(sys: DiscreteSystem) -> CoefficientStats:
    """Exact extremes over the stored transmissibility arrays."""
    kx = _minmax(sys.tx)
    ky = _minmax(sys.ty)
    kz = _minmax(sys.tz)
    kin = _minmax(sys.t_in / 2.0)
    kout = _minmax(sys.t_out / 2.0)
    return CoefficientStats(*kx, *ky, *kz, *kin, *kout)


def _bounds(stats: CoefficientStats, refs: dict) -> tuple[float, float]:
    lo = min(mn / refs[d] for d, (mn, mx) in stats.groups().items())
    hi = max(mx / refs[d] for d, (mn, mx) in stats.groups().items())
    return lo, hi


def solve_reference_lp(stats: CoefficientStats) -> ReferenceParams:
    """Optimal reference constants for the log-domain program

        min (hi - lo)  s.t.  c_d + lo <= log(min_d),  c_d + hi >= log(max_d)

    over the five direction groups d. Any feasible point has
    hi - lo >= log(max_d/min_d) for every d, and the per-group geometric mean
    c_d = log(sqrt(min_d*max_d)) with lo/hi = -/+ (max log-ratio)/2 attains the
    bound, so the optimum is available in closed form. A general-purpose LP
    solver in the tests guards this claim.
    """
    refs = {d: math.sqrt(mn * mx) for d, (mn, mx) in stats.groups().items()}
    lo, hi = _bounds(stats, refs)
    return ReferenceParams(refs["x"], refs["y"], refs["z"], refs["in"], refs["out"], lo, hi)


def ones_reference(stats: CoefficientStats | None = None) -> ReferenceParams:
    """All-ones reference constants; bounds are derived from the statistics
    when available."""
    refs = {d: 1.0 for d in ("x", "y", "z", "in", "out")}
    if stats is None:
        return ReferenceParams(1.0, 1.0, 1.0, 1.0, 1.0)
    lo, hi = _bounds(stats, refs)
    return ReferenceParams(1.0, 1.0, 1.0, 1.0, 1.0, lo, hi)


def reference_system(
    grid: GridSpec,
    refs: ReferenceParams,
    boundary: BoundaryConfig | None = None,
    dtype=np.float64,
) -> DiscreteSystem:
    """The reference operator realized as a stencil system: constant interior
    transmissibilities and 2*k_ref Dirichlet terms. Lets every stencil oracle
    apply to the preconditioner."""
    if boundary is None:
        boundary = BoundaryConfig(Axis.Z, 1.0, 0.0)
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    dt = np.dtype(dtype)
    return DiscreteSystem(
        grid,
        np.full((nx - 1) * ny * nz, refs.kx_ref, dtype=dt),
        np.full(nx * (ny - 1) * nz, refs.ky_ref, dtype=dt),
        np.full(nx * ny * (nz - 1), refs.kz_ref, dtype=dt),
        np.full(nx * ny, 2.0 * refs.kin_ref, dtype=dt),
        np.full(nx * ny, 2.0 * refs.kout_ref, dtype=dt),
        boundary,
    )


class TridiagFactors:
    """Shared data for the per-mode tridiagonal solves.

    Stores the two eigen-weight tables 2*(1-cos(q*pi/N)) and the z-chain
    diagonal (O(nx+ny+nz) persistent data); the elimination coefficients are
    produced on the fly during each batched solve.
    """

    __slots__ = ("grid", "refs", "dtype", "weights_x", "weights_y",
                 "plane_shift", "z_diag", "off")

    def __init__(self, grid: GridSpec, refs: ReferenceParams, dtype=np.float64):
        self.grid = grid
        self.refs = refs
        self.dtype = np.dtype(dtype)
        nx, ny, nz = grid.nx, grid.ny, grid.nz
        self.weights_x = 2.0 * (1.0 - np.cos(np.arange(nx) * np.pi / nx))
        self.weights_y = 2.0 * (1.0 - np.cos(np.arange(ny) * np.pi / ny))
        shift = (
            self.weights_x[None, :] * refs.kx_ref
            + self.weights_y[:, None] * refs.ky_ref
        )
        self.plane_shift = shift.astype(self.dtype)
        zd = np.full(nz, 2.0 * refs.kz_ref)
        if nz == 1:
            zd[0] = 0.0
        else:
            zd[0] = refs.kz_ref
            zd[-1] = refs.kz_ref
        zd[0] += 2.0 * refs.kin_ref
        zd[-1] += 2.0 * refs.kout_ref
        self.z_diag = zd.astype(self.dtype)
        self.off = self.dtype.type(-refs.kz_ref)

    def dense_block(self, i: int, j: int) -> np.ndarray:
        """Explicit (nz, nz) matrix of one transformed mode; test helper."""
        nz = self.grid.nz
        t = np.diag(self.z_diag.astype(np.float64).copy())
        t += np.diag(np.full(nz - 1, float(self.off)), 1)
        t += np.diag(np.full(nz - 1, float(self.off)), -1)
        t += float(self.plane_shift[j, i]) * np.eye(nz)
        return t


def build_tridiag(grid: GridSpec, refs: ReferenceParams, dtype=np.float64) -> TridiagFactors:
    return TridiagFactors(grid, refs, dtype)


def thomas_solve_batch(
    factors: TridiagFactors, rhs: np.ndarray, overwrite: bool = False
) -> np.ndarray:
    """Solve every (i', j') z-column against its tridiagonal block.

    Vectorized non-pivoting elimination over the whole (ny, nx) plane at once;
    every pivot is checked positive, which diagonal dominance guarantees.
    """
    g = factors.grid
    nz = g.nz
    x = rhs.reshape(g.shape)
    if not overwrite:
        x = x.copy()
    shift = factors.plane_shift
    off = factors.off
    diag0 = factors.z_diag[0] + shift
    if np.any(diag0 <= 0):
        raise FloatingPointError("non-positive pivot in tridiagonal solve")
    if nz == 1:
        x[0] /= diag0
        return x.reshape(rhs.shape)
    upper = np.empty((nz - 1,) + shift.shape, dtype=x.dtype)
    upper[0] = off / diag0
    x[0] = x[0] / diag0
    for k in range(1, nz):
        denom = (factors.z_diag[k] + shift) - off * upper[k - 1]
        if np.any(denom <= 0):
            raise FloatingPointError(
                f"non-positive pivot in tridiagonal solve at layer {k}"
            )
        if k < nz - 1:
            upper[k] = off / denom
        x[k] = (x[k] - off * x[k - 1]) / denom
    for k in range(nz - 2, -1, -1):
        x[k] -= upper[k] * x[k + 1]
    return x.reshape(rhs.shape)


def fct_precond_apply(
    factors: TridiagFactors,
    r: np.ndarray,
    plan: FctPlan | None = None,
    buf: SlabBuffer | None = None,
) -> np.ndarray:
    """Apply the inverse reference operator: forward cosine transform of each
    k-slice, one tridiagonal solve per transformed column, backward transform."""
    g = factors.grid
    if buf is None:
        if plan is None:
            plan = FctPlan(g.nx, g.ny, g.nz, dtype=factors.dtype)
        buf = SlabBuffer(plan)
    buf.data[...] = np.asarray(r).reshape(g.shape)
    fct_forward_batch(buf)
    thomas_solve_batch(factors, buf.data, overwrite=True)
    fct_backward_batch(buf)
    return buf.data.reshape(-1).copy()


class FctPreconditioner:
    """Plan + factors + workspace bundle with a callable apply."""

    def __init__(self, grid: GridSpec, refs: ReferenceParams, dtype=np.float64):
        self.factors = build_tridiag(grid, refs, dtype)
        self.plan = FctPlan(grid.nx, grid.ny, grid.nz, dtype=dtype)
        self.buf = SlabBuffer(self.plan)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return fct_precond_apply(self.factors, r, plan=self.plan, buf=self.buf)


class SsorPreconditioner:
    """Symmetric over-relaxation sweeps on the assembled sparse operator.

    The triangular factors are LU-factorized once with natural ordering (no
    fill for triangular input), so each apply is two substitution passes plus
    a diagonal scaling.
    """

    def __init__(self, sys: DiscreteSystem, omega: float = 1.0):
        import scipy.sparse as sp
        import scipy.sparse.linalg as spla

        if not 0.0 < omega < 2.0:
            raise ConfigError(f"omega must lie in (0, 2), got {omega}")
        self.omega = float(omega)
        mat = assemble_sparse(sys).astype(np.float64)
        diag = mat.diagonal()
        lower = sp.tril(mat, k=-1, format="csc") + sp.diags(diag / omega).tocsc()
        upper = sp.triu(mat, k=1, format="csc") + sp.diags(diag / omega).tocsc()
        self._diag = diag
        self._fwd = spla.splu(lower, permc_spec="NATURAL")
        self._bwd = spla.splu(upper, permc_spec="NATURAL")
        self._dtype = sys.dtype

    def __call__(self, r: np.ndarray) -> np.ndarray:
        w = self.omega
        y = self._fwd.solve(np.asarray(r, dtype=np.float64))
        y *= self._diag
        y = self._bwd.solve(y)
        y *= (2.0 - w) / w
        return y.astype(self._dtype, copy=False)


def ssor_apply(sys: DiscreteSystem, omega: float, r: np.ndarray) -> np.ndarray:
    """One-shot SSOR application (builds the sweep factors; prefer the class
    inside iterative loops)."""
    return SsorPreconditioner(sys, omega)(r)


class JacobiPreconditioner:
    def __init__(self, sys: DiscreteSystem):
        self._inv_diag = 1.0 / operator_diagonal(sys)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return r * self._inv_diag


def jacobi_apply(sys: DiscreteSystem, r: np.ndarray) -> np.ndarray:
    return r * (1.0 / operator_diagonal(sys))


def identity_apply(r: np.ndarray) -> np.ndarray:
    return r.copy()
