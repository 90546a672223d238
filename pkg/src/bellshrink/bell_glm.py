"""Bell regression with a log link.

For responses y_i ~ Bell(theta_i) and covariate rows x_i, the model sets

    mu_i = exp(x_i' beta),    theta_i = W(mu_i),

with W the Lambert function.  Writing the log-likelihood kernel as
sum_i [ y_i log theta_i - exp(theta_i) + 1 ], the score and expected
information are

    S(beta) = sum_i x_i (y_i - mu_i) / (1 + theta_i),
    F(beta) = X' V X,   V = diag( mu_i / (1 + theta_i) ),

and fitting is iteratively reweighted least squares on the working
response eta_i + (y_i - mu_i) / mu_i.  F is the total (not per-row)
information, so Wald statistics downstream need no extra sample-size
factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .linalg import SingularMatrixError, spd_solve
from .special_fn import lambert_w0, log_bell

__all__ = ["Dataset", "FittedModel", "aic", "fisher_information", "fit", "loglik", "score"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Design matrix with a leading intercept column, and count responses."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-d, got ndim={X.ndim}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y must be 1-d with one entry per row of X, got {y.shape}")
        if X.shape[0] <= X.shape[1]:
            raise ValueError(
                f"need more rows than parameters, got n={X.shape[0]} for {X.shape[1]} columns"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("X must carry a leading intercept column of ones")
        if y.size and (np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0))):
            raise ValueError("responses must be nonnegative integers")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_params(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FittedModel:
    """IRLS output: coefficients, total Fisher information at the optimum,
    the full log-likelihood there, and iteration diagnostics."""

    beta: np.ndarray
    fisher_info: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    n_clamped: int


def _linear_predictor(beta: np.ndarray, data: Dataset) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.n_params,):
        raise ValueError(f"beta must have shape ({data.n_params},), got {beta.shape}")
    eta = data.X @ beta
    if not np.all(np.isfinite(eta)):
        raise ValueError("non-finite linear predictor")
    return eta


def _kernel(eta: np.ndarray, y: np.ndarray) -> float:
    """sum_i [ y_i log theta_i - exp(theta_i) + 1 ] at theta = W(exp(eta))."""
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    if not np.all(np.isfinite(mu)):
        return float("-inf")
    theta = lambert_w0(mu)
    with np.errstate(divide="ignore"):
        log_theta = np.log(theta)
    contrib = np.where(y > 0, y * log_theta, 0.0)
    return float(np.sum(contrib) - np.sum(np.exp(theta)) + y.size)


def _bell_constant(y: np.ndarray) -> float:
    vals, counts = np.unique(y, return_counts=True)
    lb = np.array([log_bell(int(v)) for v in vals])
    return float(np.sum(counts * (lb - gammaln(vals + 1.0))))


def loglik(beta, data: Dataset) -> float:
    """Full Bell log-likelihood at beta (Bell-number constants included)."""
    eta = _linear_predictor(beta, data)
    return _kernel(eta, data.y) + _bell_constant(data.y)


def score(beta, data: Dataset) -> np.ndarray:
    eta = _linear_predictor(beta, data)
    mu = np.exp(eta)
    theta = lambert_w0(mu)
    return data.X.T @ ((data.y - mu) / (1.0 + theta))


def fisher_information(beta, data: Dataset) -> np.ndarray:
    """Total expected information X' diag(mu/(1+theta)) X at beta."""
    eta = _linear_predictor(beta, data)
    mu = np.exp(eta)
    theta = lambert_w0(mu)
    v = mu / (1.0 + theta)
    return data.X.T @ (data.X * v[:, None])


def fit(
    data: Dataset,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
    eta_bound: float = 30.0,
    max_halvings: int = 10,
) -> FittedModel:
    """Fit by IRLS from an OLS start on log(y + 0.5).

    The linear predictor is clamped to [-eta_bound, eta_bound] inside
    iterations (clamp events are counted and logged); steps that lower the
    clamped kernel are halved up to max_halvings times.  Convergence takes
    max|step| < tol; hitting max_iter returns converged=False rather than
    raising.  A singular weighted design does raise.
    """
    X, y = data.X, data.y
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularMatrixError("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(X, np.log(y + 0.5), rcond=None)
    n_clamped = 0
    converged = False
    n_iter = 0

    def clamped_kernel(b: np.ndarray) -> float:
        return _kernel(np.clip(X @ b, -eta_bound, eta_bound), y)

    kern = clamped_kernel(beta)
    for n_iter in range(1, max_iter + 1):
        eta_raw = X @ beta
        clipped = int(np.sum(np.abs(eta_raw) > eta_bound))
        if clipped:
            n_clamped += clipped
            logger.debug("clamped %d linear predictors at |eta| = %g", clipped, eta_bound)
        eta = np.clip(eta_raw, -eta_bound, eta_bound)
        mu = np.exp(eta)
        theta = lambert_w0(mu)
        one_plus = 1.0 + theta
        v = mu / one_plus
        info = X.T @ (X * v[:, None])
        # X'V (eta + (y-mu)/mu) assembled as X'(v*eta + (y-mu)/(1+theta))
        # to keep zero-weight rows finite.
        rhs = X.T @ (v * eta + (y - mu) / one_plus)
        step = spd_solve(info, rhs) - beta
        kern_new = clamped_kernel(beta + step)
        halvings = 0
        while kern_new < kern and halvings < max_halvings:
            step = step / 2.0
            halvings += 1
            kern_new = clamped_kernel(beta + step)
        beta = beta + step
        kern = kern_new
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    ll = loglik(beta, data)
    if converged:
        grad = score(beta, data)
        if not np.isfinite(ll) or np.linalg.norm(grad) > 1e-6 * (1.0 + abs(ll)):
            converged = False
    fisher = fisher_information(beta, data)
    return FittedModel(
        beta=beta,
        fisher_info=fisher,
        loglik=ll,
        converged=converged,
        n_iter=n_iter,
        n_clamped=n_clamped,
    )


def aic(model: FittedModel) -> float:
    """2k - 2 loglik with k = len(beta)."""
    return 2.0 * model.beta.size - 2.0 * model.loglik
