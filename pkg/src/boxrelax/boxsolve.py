"""Box-constrained least squares, sign detection, BER, and small-n oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidArgument

LIPSCHITZ_SAFETY = 1.01
ORACLE_KKT_TOL = 1e-10
MIN_DEFAULT_ITER = 10_000


@dataclass(frozen=True, eq=False)
class BoxSolution:
    x_hat: np.ndarray
    iterations: int
    kkt_residual: float
    objective: float

    def error_vector(self, x0) -> np.ndarray:
        """w = x_hat - x0; lies in [-2, 0]^n when x0 is all ones."""
        return self.x_hat - np.asarray(x0, dtype=float)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    x_star: np.ndarray
    ber: float
    error_mask: np.ndarray


def operator_norm_sq(A, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of A^T A by power iteration from the normalized all-ones vector.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative.
    Returns 0 for the zero matrix.
    """
    A = np.asarray(A, dtype=float)
    v = np.ones(A.shape[1]) / math.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        u = A.T @ (A @ v)
        lam_new = float(v @ u)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            # all-ones start can land in the null space; retry from a fixed
            # alternating vector before declaring the matrix zero
            if not np.any(A):
                return 0.0
            alt = np.cos(np.arange(A.shape[1]) + 0.5)
            v = alt / np.linalg.norm(alt)
            continue
        v = u / norm
        if abs(lam_new - lam) <= tol * lam_new:
            return lam_new
        lam = lam_new
    return lam


def kkt_residual(A, y, x) -> float:
    """Projected-gradient fixed-point residual ||x - clip(x - A^T(Ax - y))||_inf."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    g = A.T @ (A @ x - y)
    return _kkt_from_grad(x, g)


def _kkt_from_grad(x, g) -> float:
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - np.clip(x - g, -1.0, 1.0))))


def solve_box_ls(A, y, tol: float = 1e-8, max_iter: int | None = None) -> BoxSolution:
    """Minimize 0.5 ||y - A x||^2 over the box [-1, 1]^n.

    Accelerated projected gradient with step 1/L and function-value restart:
    a step that would raise the objective is rejected and momentum reset, so
    the accepted objective sequence never increases. Starts from x = 0.

    Raises ConvergenceError if the KKT residual is still above ``tol`` after
    ``max_iter`` iterations (default max(50 n, 10000); small random systems
    are often badly conditioned).
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    if y.shape != (m,):
        raise InvalidArgument(f"y has shape {y.shape}, expected ({m},)")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    if max_iter is None:
        max_iter = max(50 * n, MIN_DEFAULT_ITER)

    x = np.zeros(n)
    L = operator_norm_sq(A, tol=1e-3) * LIPSCHITZ_SAFETY
    if L == 0.0:
        return BoxSolution(x, 0, 0.0, float(np.linalg.norm(y)))
    step = 1.0 / L

    Ax = np.zeros(m)
    f = 0.5 * float(y @ y)
    v, Av = x, Ax
    t = 1.0
    res = math.inf
    accepted = 0
    for it in range(max_iter + 1):
        r = Ax - y
        grad_x = A.T @ r
        res = _kkt_from_grad(x, grad_x)
        if res <= tol:
            return BoxSolution(x, it, res, math.sqrt(max(2.0 * f, 0.0)))
        if it == max_iter:
            break
        grad_v = grad_x if v is x else A.T @ (Av - y)
        x_new = np.clip(v - step * grad_v, -1.0, 1.0)
        dx = x_new - x
        dAx = A @ dx
        # objective change from the increment; f itself is too large to
        # resolve differences near the optimum
        df = float(dAx @ (r + 0.5 * dAx))
        if df > 0.0:
            v, Av, t = x, Ax, 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        accepted += 1
        if accepted % 100 == 0:
            Ax_new = A @ x_new
            f_new = min(f, 0.5 * float((Ax_new - y) @ (Ax_new - y)))
        else:
            Ax_new = Ax + dAx
            f_new = f + df
        v = x_new + beta * dx
        Av = Ax_new + beta * dAx
        x, Ax, f, t = x_new, Ax_new, f_new, t_new
    raise ConvergenceError(
        f"box LS did not reach kkt_residual <= {tol:g} in {max_iter} iterations "
        f"(last residual {res:.3e})",
        x=x,
        residual=res,
        iterations=max_iter,
    )


def detect_signs(x_hat) -> np.ndarray:
    """Elementwise sign with sign(0) = +1 (also for -0.0)."""
    x_hat = np.asarray(x_hat, dtype=float)
    return np.where(x_hat >= 0.0, 1.0, -1.0)


def bit_error_rate(x_star, x0):
    """Return (ber, error_mask) for two +-1 vectors of equal length."""
    x_star = np.asarray(x_star)
    x0 = np.asarray(x0)
    if x_star.shape != x0.shape or x_star.ndim != 1:
        raise InvalidArgument(
            f"length mismatch: x_star {x_star.shape} vs x0 {x0.shape}"
        )
    mask = x_star != x0
    n = mask.size
    return (int(mask.sum()) / n if n else 0.0), mask


def detect(x_hat, x0) -> DetectionResult:
    x_star = detect_signs(x_hat)
    ber, mask = bit_error_rate(x_star, x0)
    return DetectionResult(x_star=x_star, ber=ber, error_mask=mask)


def oracle_box_ls_active_set(A, y) -> np.ndarray:
    """Exact box LS minimizer by enumerating all 3^n active sets (n <= 10).

    Each coordinate is pinned at -1, pinned at +1, or free; the free block is
    solved by least squares. Candidates that are feasible and satisfy the sign
    conditions on the gradient are kept and the lowest objective wins.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n = A.shape[1]
    if n > 10:
        raise InvalidArgument(f"active-set oracle refuses n={n} > 10")
    best, best_obj = None, math.inf
    for labels in itertools.product((-1, 0, 1), repeat=n):
        lab = np.array(labels)
        free = lab == 0
        x = lab.astype(float)
        if free.any():
            rhs = y - A[:, ~free] @ x[~free]
            x[free] = np.linalg.lstsq(A[:, free], rhs, rcond=None)[0]
            if np.any(np.abs(x[free]) > 1.0 + ORACLE_KKT_TOL):
                continue
            x[free] = np.clip(x[free], -1.0, 1.0)
        r = A @ x - y
        g = A.T @ r
        if np.any(g[lab == -1] < -ORACLE_KKT_TOL) or np.any(g[lab == 1] > ORACLE_KKT_TOL):
            continue
        obj = float(r @ r)
        if obj < best_obj:
            best, best_obj = x, obj
    if best is None:
        raise ConvergenceError("active-set oracle found no KKT-consistent candidate")
    return best


def oracle_ml_exhaustive(A, y):
    """Exhaustive ML detection over {+-1}^n (n <= 16).

    Candidates are scanned in lexicographic order with -1 < +1 and the first
    minimizer is kept. Returns (x, objective) with objective = ||y - A x||.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n = A.shape[1]
    if n > 16:
        raise InvalidArgument(f"exhaustive ML refuses n={n} > 16")
    cands = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    resid = A @ cands.T - y[:, None]
    obj = np.einsum("ij,ij->j", resid, resid)
    k = int(np.argmin(obj))
    return cands[k], math.sqrt(float(obj[k]))
