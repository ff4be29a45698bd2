"""Preconditioned conjugate-gradient driver and dense verification oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .preconditioner import ReferenceParams


class PcgBreakdownError(RuntimeError):
    """Loss of positive definiteness detected mid-iteration."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolveReport:
    """Outcome of one solve: iteration history plus pipeline metadata."""

    iterations: int
    converged: bool
    relative_residuals: list[float] = field(default_factory=list)
    kappa_eff: float | None = None
    prep_seconds: float = 0.0
    exec_seconds: float = 0.0
    precision: str = "f64"
    preconditioner: str = "fct"
    ref_params: ReferenceParams | None = None
    l2_error: float | None = None


def pcg(
    apply_A,
    apply_M_inv,
    b: np.ndarray,
    rtol: float,
    max_iter: int = 1024,
) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients on A p = b with a fixed SPD preconditioner.

    One operator and one preconditioner application per iteration; exits when
    the 2-norm of the running residual drops below rtol relative to |b|, or at
    max_iter. The history records the relative residual at every step starting
    from the initial one, so iterations == len(history) - 1. Starts from the
    zero vector.
    """
    if rtol <= 0.0:
        raise ValueError("rtol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    b = np.asarray(b)
    eps = float(np.finfo(b.dtype).eps)
    norm_b = float(np.linalg.norm(b))
    p = np.zeros_like(b)
    if norm_b == 0.0:
        return p, SolveReport(0, True, [0.0])

    r = b.copy()
    z = apply_M_inv(r)
    w = z.copy()
    rho = float(np.dot(r, z))
    if rho <= 0.0:
        raise PcgBreakdownError("preconditioned inner product not positive", 0)
    history = [float(np.linalg.norm(r)) / norm_b]
    iteration = 0
    while history[-1] > rtol and iteration < max_iter:
        z = apply_A(w)
        zw = float(np.dot(z, w))
        if zw <= 100.0 * eps * float(np.linalg.norm(z)) * float(np.linalg.norm(w)):
            raise PcgBreakdownError("operator inner product lost positivity", iteration + 1)
        alpha = rho / zw
        p += b.dtype.type(alpha) * w
        r -= b.dtype.type(alpha) * z
        relres = float(np.linalg.norm(r)) / norm_b
        if not np.isfinite(relres):
            raise PcgBreakdownError("residual is not finite", iteration + 1)
        history.append(relres)
        iteration += 1
        if relres <= rtol:
            break
        z = apply_M_inv(r)
        rho_next = float(np.dot(r, z))
        if rho_next <= 0.0:
            raise PcgBreakdownError("preconditioned inner product not positive", iteration)
        w = z + b.dtype.type(rho_next / rho) * w
        rho = rho_next
    return p, SolveReport(iteration, history[-1] <= rtol, history)


def dense_solve(mat: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct Cholesky solve of a dense SPD system (oracle path)."""
    import scipy.linalg as sla

    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[0] > 4096:
        raise ValueError("dense solves capped at 4096 unknowns")
    try:
        factor = sla.cho_factor(mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"matrix is not positive definite: {exc}") from exc
    return sla.cho_solve(factor, np.asarray(b, dtype=np.float64))


def condition_estimate(
    mat: np.ndarray, mat_ref: np.ndarray | None = None
) -> tuple[float, float, float]:
    """Extreme eigenvalues and condition number of a dense SPD matrix, or of
    the pencil (mat, mat_ref) when a reference matrix is supplied."""
    import scipy.linalg as sla

    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[0] > 4096:
        raise ValueError("eigen estimates capped at 4096 unknowns")
    if mat_ref is None:
        vals = sla.eigh(mat, eigvals_only=True)
    else:
        try:
            vals = sla.eigh(mat, np.asarray(mat_ref, dtype=np.float64), eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"reference matrix is singular or indefinite: {exc}") from exc
    lam_min, lam_max = float(vals[0]), float(vals[-1])
    return lam_min, lam_max, lam_max / lam_min
