"""Minimization of the negative log-posterior F for mixture initialization.

Targets exposing least-squares structure (a `residuals` method) are minimized
with damped Gauss-Newton (Levenberg-Marquardt); everything else falls back to
BFGS with finite-difference gradients.  Accepted steps strictly decrease F.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EvaluationFailed
from .targets import TargetDensity, is_failure


class OptStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    FAILED = "failed"


@dataclass(frozen=True)
class OptSettings:
    rel_step: float = 1e-6
    f_tol: float = 1e-10
    grad_tol: float = 1e-6
    max_iter: int = 200
    # step for the mode-curvature Hessian that becomes a Laplace covariance:
    # probed at ~0.5% of the parameter scale, not at gradient resolution,
    # so exactly-flat (quartic) ridge directions get a finite width
    hessian_rel_step: float = 5e-3


@dataclass(frozen=True)
class OptimizationResult:
    minimizer: np.ndarray
    f_min: float
    hessian_approx: np.ndarray
    status: OptStatus
    n_iter: int
    f_history: tuple = field(repr=False, default=())


def repair_spd_eig(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalue-clipping SPD repair; always yields a positive definite
    matrix (used for Hessian approximations serving as covariance inverses)."""
    a = 0.5 * (matrix + matrix.T)
    vals, vecs = np.linalg.eigh(a)
    floor = 1e-8 * max(float(np.abs(vals).max()), 1.0)
    vals = np.maximum(vals, floor)
    repaired = (vecs * vals) @ vecs.T
    return 0.5 * (repaired + repaired.T)


def finite_diff_gradient(f, theta, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with step h_j = rel_step * (1 + |theta_j|);
    coordinates whose stencil hits a failed evaluation fall back to one-sided
    differences.  Raises EvaluationFailed if both sides fail."""
    theta = np.asarray(theta, dtype=float)
    f0 = None
    grad = np.empty(theta.size)
    for j in range(theta.size):
        h = rel_step * (1.0 + abs(theta[j]))
        up = theta.copy()
        up[j] += h
        dn = theta.copy()
        dn[j] -= h
        f_up = float(f(up))
        f_dn = float(f(dn))
        if math.isfinite(f_up) and math.isfinite(f_dn):
            grad[j] = (f_up - f_dn) / (2.0 * h)
            continue
        if f0 is None:
            f0 = float(f(theta))
            if not math.isfinite(f0):
                raise EvaluationFailed("f is not finite at the expansion point")
        if math.isfinite(f_up):
            grad[j] = (f_up - f0) / h
        elif math.isfinite(f_dn):
            grad[j] = (f0 - f_dn) / h
        else:
            raise EvaluationFailed(f"both one-sided stencils failed for coordinate {j}")
    return grad


def fd_hessian(f, theta, rel_step: float = 1e-5) -> np.ndarray:
    """Symmetrized central second differences, SPD-repaired so the result can
    serve as a covariance inverse."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    h = rel_step * (1.0 + np.abs(theta))

    def ev(point):
        val = float(f(point))
        if not math.isfinite(val):
            raise EvaluationFailed("stencil point evaluation failed")
        return val

    f0 = ev(theta)
    hess = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        hess[i, i] = (ev(theta + ei) - 2.0 * f0 + ev(theta - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                ev(theta + ei + ej)
                - ev(theta + ei - ej)
                - ev(theta - ei + ej)
                + ev(theta - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return repair_spd_eig(hess)


def gauss_newton_hessian(
    residual_jacobian: np.ndarray,
    prior_precision: np.ndarray,
    noise_precision: np.ndarray | None = None,
) -> np.ndarray:
    """H = J^T W J + prior_precision, SPD-repaired.  With whitened residuals
    W is the identity; F carries the 1/2 convention, so no extra factor 2."""
    j = np.asarray(residual_jacobian, dtype=float)
    if not np.all(np.isfinite(j)):
        raise DomainError("residual Jacobian must be finite")
    jtw = j.T if noise_precision is None else j.T @ noise_precision
    return repair_spd_eig(jtw @ j + np.asarray(prior_precision, dtype=float))


def _fd_jacobian(residuals, theta, rel_step):
    """Finite-difference Jacobian of a residual vector; stencil failures fall
    back to one-sided differences around the (feasible) expansion point."""
    theta = np.asarray(theta, dtype=float)
    r0 = None
    cols = []
    for j in range(theta.size):
        h = rel_step * (1.0 + abs(theta[j]))
        up = theta.copy()
        up[j] += h
        dn = theta.copy()
        dn[j] -= h
        r_up = residuals(up)
        r_dn = residuals(dn)
        if not is_failure(r_up) and not is_failure(r_dn):
            cols.append((np.asarray(r_up) - np.asarray(r_dn)) / (2.0 * h))
            continue
        if r0 is None:
            r0 = residuals(theta)
            if is_failure(r0):
                raise EvaluationFailed("residuals failed at the expansion point")
            r0 = np.asarray(r0)
        if not is_failure(r_up):
            cols.append((np.asarray(r_up) - r0) / h)
        elif not is_failure(r_dn):
            cols.append((r0 - np.asarray(r_dn)) / h)
        else:
            raise EvaluationFailed(f"both one-sided stencils failed for coordinate {j}")
    return np.column_stack(cols)


def _minimize_lm(target, start, settings):
    theta = np.asarray(start, dtype=float)
    r = target.residuals(theta)
    if is_failure(r):
        return _failed(theta, settings)
    r = np.asarray(r)
    fval = 0.5 * float(r @ r)
    history = [fval]
    lam = 1e-3
    status = OptStatus.MAX_ITERATIONS
    it = 0
    for it in range(1, settings.max_iter + 1):
        try:
            jac = _fd_jacobian(target.residuals, theta, settings.rel_step)
        except EvaluationFailed:
            status = OptStatus.FAILED
            break
        grad = jac.T @ r
        if np.linalg.norm(grad) <= settings.grad_tol:
            status = OptStatus.CONVERGED
            break
        jtj = jac.T @ jac
        accepted = False
        while lam <= 1e12:
            step = np.linalg.solve(jtj + lam * np.eye(theta.size), -grad)
            trial = theta + step
            r_trial = target.residuals(trial)
            if not is_failure(r_trial):
                r_trial = np.asarray(r_trial)
                f_trial = 0.5 * float(r_trial @ r_trial)
                if f_trial < fval:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            status = OptStatus.FAILED
            break
        lam = max(lam / 10.0, 1e-12)
        df = fval - f_trial
        theta, r, fval = trial, r_trial, f_trial
        history.append(fval)
        if df < settings.f_tol * (1.0 + abs(fval)):
            status = OptStatus.CONVERGED
            break
    try:
        jac = _fd_jacobian(target.residuals, theta, settings.rel_step)
        hessian = repair_spd_eig(jac.T @ jac)
    except EvaluationFailed:
        hessian = repair_spd_eig(np.eye(theta.size))
    return OptimizationResult(theta, fval, hessian, status, it, tuple(history))


def _minimize_bfgs(target, start, settings):
    def func(point):
        return target.neg_log_posterior(point)

    theta = np.asarray(start, dtype=float)
    fval = func(theta)
    if not math.isfinite(fval):
        return _failed(theta, settings)
    try:
        grad = finite_diff_gradient(func, theta, settings.rel_step)
    except EvaluationFailed:
        return _failed(theta, settings)
    hinv = np.eye(theta.size)
    history = [fval]
    status = OptStatus.MAX_ITERATIONS
    it = 0
    for it in range(1, settings.max_iter + 1):
        if np.linalg.norm(grad) <= settings.grad_tol:
            status = OptStatus.CONVERGED
            break
        direction = -hinv @ grad
        slope = float(grad @ direction)
        if slope >= 0.0:
            hinv = np.eye(theta.size)
            direction = -grad
            slope = -float(grad @ grad)
        alpha = 1.0
        accepted = False
        for _ in range(60):
            trial = theta + alpha * direction
            f_trial = func(trial)
            if math.isfinite(f_trial) and f_trial <= fval + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = OptStatus.FAILED
            break
        try:
            grad_trial = finite_diff_gradient(func, trial, settings.rel_step)
        except EvaluationFailed:
            status = OptStatus.FAILED
            break
        s = alpha * direction
        y = grad_trial - grad
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            eye = np.eye(theta.size)
            left = eye - rho * np.outer(s, y)
            hinv = left @ hinv @ left.T + rho * np.outer(s, s)
        df = fval - f_trial
        theta, fval, grad = trial, f_trial, grad_trial
        history.append(fval)
        # the |dF| test alone does not certify a minimum; require the
        # gradient criterion as well so CONVERGED implies a small gradient
        if df < settings.f_tol * (1.0 + abs(fval)) and (
            np.linalg.norm(grad) <= settings.grad_tol
        ):
            status = OptStatus.CONVERGED
            break
    try:
        hessian = fd_hessian(func, theta, settings.hessian_rel_step)
    except EvaluationFailed:
        hessian = repair_spd_eig(np.linalg.pinv(hinv))
    return OptimizationResult(theta, fval, hessian, status, it, tuple(history))


def _failed(theta, settings):
    return OptimizationResult(
        np.asarray(theta, dtype=float),
        math.inf,
        np.eye(np.asarray(theta).size),
        OptStatus.FAILED,
        0,
        (),
    )


def minimize(
    target: TargetDensity, start, settings: OptSettings | None = None
) -> OptimizationResult:
    """Minimize F = -log posterior from `start`.

    Infeasible starts (Failure density) return a FAILED result immediately.
    Stops when |dF| < f_tol*(1+|F|), the gradient norm drops below grad_tol,
    or max_iter is reached.
    """
    settings = settings or OptSettings()
    if hasattr(target, "residuals"):
        return _minimize_lm(target, start, settings)
    return _minimize_bfgs(target, start, settings)
