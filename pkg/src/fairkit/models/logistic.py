"""Weighted L2-regularised logistic regression fitted by damped Newton steps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from ..errors import DegenerateLabels, DidNotConverge, LengthMismatch


@dataclass(frozen=True)
class LogisticConfig:
    l2_strength: float = 1e-3
    max_iterations: int = 100
    tolerance: float = 1e-8
    standardize: bool = True

    def __post_init__(self):
        if not self.l2_strength >= 0:
            raise ValueError("l2_strength must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")


def weighted_moments(X, w):
    """Weighted per-column mean and population standard deviation."""
    W = w.sum()
    mean = (w @ X) / W
    var = (w @ (X - mean) ** 2) / W
    return mean, np.sqrt(var)


def logistic_objective(params, Z, y, w, l2, need_hessian=True):
    """Loss, gradient and Hessian of the normalised objective.

    ``params`` is ``[intercept, coef...]`` and ``Z`` the (already scaled)
    design matrix without an intercept column. The loss is the weighted mean
    negative log-likelihood plus ``l2/2 * ||coef||^2``.
    """
    W = w.sum()
    b0, beta = params[0], params[1:]
    eta = b0 + Z @ beta
    nll = -(w @ (y * log_expit(eta) + (1 - y) * log_expit(-eta))) / W
    loss = nll + 0.5 * l2 * (beta @ beta)
    r = w * (expit(eta) - y) / W
    grad = np.empty_like(params)
    grad[0] = r.sum()
    grad[1:] = Z.T @ r + l2 * beta
    if not need_hessian:
        return loss, grad, None
    mu = expit(eta)
    s = w * mu * (1 - mu) / W
    p = len(params)
    hess = np.empty((p, p))
    hess[0, 0] = s.sum()
    hess[0, 1:] = hess[1:, 0] = Z.T @ s
    hess[1:, 1:] = (Z.T * s) @ Z + l2 * np.eye(p - 1)
    return loss, grad, hess


def _check_inputs(X, y, w):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=np.float64)
    if not (X.shape[0] == len(y) == len(w)):
        raise LengthMismatch("X, y and w must have the same number of rows")
    active = w > 0
    if not (np.any(y[active] == 1) and np.any(y[active] == 0)):
        raise DegenerateLabels("need a positive and a negative sample with positive weight")
    return X, y, w


def fit_logistic(X, y, w, cfg: LogisticConfig):
    """Return ``(intercept, coef, mean, scale, converged, losses)`` in scaled space."""
    X, y, w = _check_inputs(X, y, w)
    mean, std = weighted_moments(X, w)
    if cfg.standardize:
        scale = np.where(std > 0, std, 1.0)
        Z = (X - mean) / scale
    else:
        mean = np.zeros(X.shape[1])
        scale = np.ones(X.shape[1])
        Z = X
    params = np.zeros(X.shape[1] + 1)
    loss, grad, hess = logistic_objective(params, Z, y, w, cfg.l2_strength)
    losses = [loss]
    converged = False
    for _ in range(cfg.max_iterations):
        if np.max(np.abs(grad)) <= cfg.tolerance:
            converged = True
            break
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)) or grad @ step >= 0:
            step = -grad
        t = 1.0
        slope = grad @ step
        while True:
            cand = params + t * step
            new_loss, _, _ = logistic_objective(cand, Z, y, w, cfg.l2_strength, need_hessian=False)
            if np.isfinite(new_loss) and new_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                cand, new_loss = params, loss
                break
        if cand is params:
            break
        params = cand
        loss, grad, hess = logistic_objective(params, Z, y, w, cfg.l2_strength)
        losses.append(loss)
    else:
        converged = np.max(np.abs(grad)) <= cfg.tolerance
    if not converged:
        warnings.warn(f"logistic fit stopped with |grad|max={np.max(np.abs(grad)):.3g} "
                      f"> tolerance {cfg.tolerance:g}", DidNotConverge, stacklevel=3)
    return params[0], params[1:], mean, scale, std, bool(converged), losses
