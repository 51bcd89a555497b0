"""Damped (Levenberg-Marquardt) weighted least squares with a numerical Jacobian.

Minimises ``sum(w * (model(p) - data)**2)``.  The damping term is scaled by
the diagonal of the normal matrix and follows a fixed schedule: halved after
an accepted step, doubled after a rejected one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = np.finfo(float).eps


class FitError(RuntimeError):
    """Fitting aborted; ``diagnostics`` says where."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularFitError(FitError):
    """Normal equations are singular (some parameter does not affect the model)."""


@dataclass
class LeastSquaresResult:
    params: np.ndarray
    covariance: np.ndarray
    cost: float
    chi2_reduced: float
    iterations: int
    converged: bool
    message: str
    grad_norm: float
    n_eval: int = 0
    history: list = field(default_factory=list, repr=False)


def _jacobian(fun, p, f0, lower, x_scale):
    n = len(p)
    J = np.empty((f0.size, n))
    for j in range(n):
        h = _EPS ** (1 / 3) * max(abs(p[j]), x_scale[j])
        if p[j] - h < lower[j]:
            pp = p.copy()
            pp[j] += h
            J[:, j] = (fun(pp) - f0) / h
        else:
            pp, pm = p.copy(), p.copy()
            pp[j] += h
            pm[j] -= h
            J[:, j] = (fun(pp) - fun(pm)) / (2 * h)
    return J


def least_squares(
    model,
    p0,
    data,
    weights=None,
    *,
    lower=None,
    max_iter: int = 200,
    xtol: float = 1e-8,
    gtol: float = 1e-10,
    ftol: float = 1e-15,
    damping0: float = 1e-3,
    x_scale=None,
    jac=None,
) -> LeastSquaresResult:
    """Fit ``model(p)`` to ``data`` with per-point ``weights`` (inverse variances).

    Parameters
    ----------
    model : callable
        ``model(p) -> array`` broadcastable to ``data``; must be continuous in ``p``.
    p0 : array_like
        Starting parameters.
    weights : array_like, optional
        Positive weights; default 1.
    lower : array_like, optional
        Lower bounds enforced by projection (``-inf`` for none).
    jac : callable, optional
        ``jac(p) -> (n_data, n_params)`` derivative of the model.  Central
        differences are used when omitted.

    Returns
    -------
    LeastSquaresResult
        ``covariance`` is ``(J^T W J)^-1`` at the solution, not rescaled by
        the reduced chi-square.  Stops when an accepted step changes the
        parameters by less than ``xtol`` (relative), the projected gradient
        norm falls below ``gtol``, the cost stops decreasing, or
        ``max_iter`` trial steps have been taken.
    """
    data = np.asarray(data, dtype=float).ravel()
    w = np.ones_like(data) if weights is None else np.broadcast_to(np.asarray(weights, float).ravel(), data.shape)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    sw = np.sqrt(w)
    p = np.array(p0, dtype=float)
    n = p.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    p = np.maximum(p, lower)
    x_scale = np.where(np.asarray(p0, float) != 0, np.abs(p0), 1.0) if x_scale is None else np.asarray(x_scale, float)
    n_eval = 0

    def resid(q):
        nonlocal n_eval
        n_eval += 1
        m = np.asarray(model(q), dtype=float).ravel()
        if m.shape != data.shape:
            m = np.broadcast_to(m, data.shape)
        if not np.all(np.isfinite(m)):
            raise FitError("model returned non-finite values", {"params": q.tolist(), "n_eval": n_eval})
        return sw * (m - data)

    if jac is None:
        jacobian = lambda q, rq: _jacobian(resid, q, rq, lower, x_scale)  # noqa: E731
    else:
        def jacobian(q, rq):
            Jm = np.asarray(jac(q), dtype=float).reshape(data.size, n)
            if not np.all(np.isfinite(Jm)):
                raise FitError("Jacobian returned non-finite values", {"params": q.tolist()})
            return sw[:, None] * Jm

    r = resid(p)
    cost = float(r @ r)
    J = jacobian(p, r)
    if np.any(np.all(J == 0, axis=0)) or np.linalg.matrix_rank(J) < n:
        raise SingularFitError("Jacobian is rank deficient at the starting point", {"params": p.tolist()})

    lam = damping0
    converged = False
    message = "iteration cap reached"
    history = [(p.copy(), cost)]
    it = 0
    while it < max_iter:
        A = J.T @ J
        grad = J.T @ r
        free = ~((p <= lower) & (grad > 0))
        gnorm = float(np.max(np.abs(grad[free]))) if free.any() else 0.0
        if gnorm < gtol:
            converged, message = True, "gradient below tolerance"
            break
        it += 1
        diag = np.diag(A).copy()
        diag[diag <= 0] = max(diag.max(), 1.0) * 1e-15
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), -grad)
        except np.linalg.LinAlgError as exc:
            raise SingularFitError("normal equations are singular", {"params": p.tolist(), "iteration": it}) from exc
        p_new = np.maximum(p + step, lower)
        r_new = resid(p_new)
        cost_new = float(r_new @ r_new)
        if cost_new < cost:
            dp = np.linalg.norm(p_new - p)
            decrease = cost - cost_new
            p, r, cost = p_new, r_new, cost_new
            history.append((p.copy(), cost))
            lam *= 0.5
            if dp <= xtol * (np.linalg.norm(p) + xtol):
                converged, message = True, "relative parameter change below tolerance"
                break
            if decrease <= ftol * cost_new:
                converged, message = True, "cost no longer decreasing"
                break
            J = jacobian(p, r)
        else:
            lam = 2.0 * lam if lam > 0 else 1e-3
            if lam > 1e20:
                converged, message = True, "no further decrease possible"
                break

    J = jacobian(p, r)
    grad = J.T @ r
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((n, n), np.nan)
    dof = max(data.size - n, 1)
    return LeastSquaresResult(
        params=p,
        covariance=cov,
        cost=cost,
        chi2_reduced=cost / dof,
        iterations=it,
        converged=converged,
        message=message,
        grad_norm=float(np.max(np.abs(grad))),
        n_eval=n_eval,
        history=history,
    )
