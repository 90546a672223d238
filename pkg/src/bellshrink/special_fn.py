"""Deterministic special functions used throughout the package.

Three families live here:

* the principal branch of the Lambert W function, which maps a Bell mean
  back to its canonical parameter,
* logarithms of the Bell numbers, which enter the count log-likelihood as
  observation constants,
* the noncentral chi-square distribution function together with the plain
  and truncated inverse moments ``E[X**-1]``, ``E[X**-2]``,
  ``E[X**-k 1{X < c}]`` that drive the analytic risk formulas.

The noncentral chi-square quantities are all evaluated through the Poisson
mixture representation

    X ~ chi2(dof + 2 J),  J ~ Poisson(noncentrality / 2),

summing mixture terms outward from the modal Poisson index until the
remaining tail mass drops below 1e-12.  Each central-component integral
reduces to a regularized incomplete gamma function.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

__all__ = [
    "NoncentralChiSq",
    "inv_moment",
    "lambert_w0",
    "log_bell",
    "noncentral_chisq_cdf",
    "truncated_inv_moment",
]

_POISSON_TAIL = 1e-12
_HALLEY_TOL = 1e-14
_HALLEY_MAX_ITER = 50


def lambert_w0(x):
    """Principal Lambert W branch on [0, inf): the w >= 0 solving w*e**w = x.

    Halley's iteration on f(w) = w e**w - x, seeded with log1p(x) for
    x <= e and log(x) - log(log(x)) beyond, converges to full double
    precision in a handful of steps; the residual |w e**w - x| stays
    below 1e-12 * max(1, x).

    Parameters
    ----------
    x : float or ndarray
        Nonnegative, finite.

    Returns
    -------
    float or ndarray, matching the input kind.
    """
    scalar = np.isscalar(x)
    z = np.asarray(x, dtype=float)
    if z.size and (np.any(z < 0.0) or not np.all(np.isfinite(z))):
        raise ValueError("lambert_w0 requires finite input >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(z <= math.e, np.log1p(z), np.log(z) - np.log(np.log(np.maximum(z, math.e))))
    for _ in range(_HALLEY_MAX_ITER):
        ew = np.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w = w - dw
        if np.all(np.abs(dw) <= _HALLEY_TOL):
            break
    if scalar:
        return float(w)
    return w


# --- Bell numbers ---------------------------------------------------------
#
# Exact integer arithmetic (the Bell triangle) up to _EXACT_LIMIT, then a
# saddle-point window of the series  B_n = e**-1 * sum_l l**n / l!  summed
# in log space.  The triangle is quadratic in n, so the exact path is kept
# for the range where it is both cheap and bit-reproducible; the series
# window covers the long counts that large-mean regressions generate.

_EXACT_LIMIT = 512

_bell_lock = threading.Lock()
_bell_logs: list[float] = [0.0]  # log B_0
_bell_row: list[int] = [1]  # latest Bell-triangle row
_bell_large: dict[int, float] = {}


def _extend_exact(n: int) -> None:
    global _bell_row
    while len(_bell_logs) <= n:
        prev = _bell_row
        row = [prev[-1]]
        for a in prev:
            row.append(row[-1] + a)
        _bell_row = row
        _bell_logs.append(math.log(row[0]))


def _log_bell_series(n: int) -> float:
    # Series maximizer solves l*log(l) = n, i.e. l* = n / W(n).
    u = lambert_w0(float(n))
    center = n / u
    sigma = math.sqrt(center / (u + 1.0))
    lo = max(1, int(center - 14.0 * sigma) - 20)
    hi = int(center + 14.0 * sigma) + 20
    ls = np.arange(lo, hi + 1, dtype=float)
    t = n * np.log(ls) - gammaln(ls + 1.0)
    m = float(t.max())
    return m + math.log(float(np.sum(np.exp(t - m)))) - 1.0


def log_bell(n) -> float:
    """log of the n-th Bell number, exact-integer below 512, series above.

    Values are cached; the cache may be read concurrently while a single
    writer extends it.
    """
    if not float(n).is_integer() or n < 0:
        raise ValueError(f"Bell numbers need integer n >= 0, got {n!r}")
    n = int(n)
    if n <= _EXACT_LIMIT:
        if n < len(_bell_logs):
            return _bell_logs[n]
        with _bell_lock:
            _extend_exact(n)
            return _bell_logs[n]
    cached = _bell_large.get(n)
    if cached is not None:
        return cached
    with _bell_lock:
        cached = _bell_large.get(n)
        if cached is None:
            cached = _log_bell_series(n)
            _bell_large[n] = cached
        return cached


# --- noncentral chi-square -------------------------------------------------


@dataclass(frozen=True)
class NoncentralChiSq:
    """Noncentral chi-square law with integer dof and noncentrality >= 0."""

    dof: int
    noncentrality: float

    def __post_init__(self):
        if not float(self.dof).is_integer() or self.dof < 1:
            raise ValueError(f"dof must be an integer >= 1, got {self.dof!r}")
        if not np.isfinite(self.noncentrality) or self.noncentrality < 0.0:
            raise ValueError(f"noncentrality must be finite and >= 0, got {self.noncentrality!r}")
        object.__setattr__(self, "dof", int(self.dof))
        object.__setattr__(self, "noncentrality", float(self.noncentrality))


def _poisson_weights(lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Poisson(lam) pmf terms covering all but < 1e-12 of the mass.

    Starts at the modal index and expands outward so the dominant terms
    come first and the truncation error is bounded by the stopping rule.
    """
    if lam <= 0.0:
        return np.array([0]), np.array([1.0])

    def w(j: int) -> float:
        return math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1))

    j0 = int(lam)
    js = [j0]
    ws = [w(j0)]
    total = ws[0]
    lo = hi = j0
    while total < 1.0 - _POISSON_TAIL:
        hi += 1
        js.append(hi)
        ws.append(w(hi))
        total += ws[-1]
        if lo > 0:
            lo -= 1
            js.append(lo)
            ws.append(w(lo))
            total += ws[-1]
        if hi - j0 > 10_000_000:
            raise RuntimeError("Poisson mixture failed to accumulate mass")
    order = np.argsort(js)
    return np.asarray(js)[order], np.asarray(ws)[order]


def noncentral_chisq_cdf(x: float, dist: NoncentralChiSq) -> float:
    """P(X <= x) for X ~ NoncentralChiSq, via the Poisson mixture of
    regularized incomplete gamma terms.  Monotone in x and in -noncentrality.
    """
    if x <= 0.0:
        return 0.0
    js, ws = _poisson_weights(dist.noncentrality / 2.0)
    val = float(np.sum(ws * gammainc((dist.dof + 2 * js) / 2.0, x / 2.0)))
    return min(max(val, 0.0), 1.0)


def inv_moment(dist: NoncentralChiSq, order: int = 1) -> float:
    """E[X**-order] for X ~ NoncentralChiSq and order in {1, 2}.

    Per mixture component with m = dof + 2j degrees of freedom,
    E[X**-1] = 1/(m-2) and E[X**-2] = 1/((m-2)(m-4)); the orders need
    dof >= 3 and dof >= 5 respectively for the moment to exist.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    least = 3 if order == 1 else 5
    if dist.dof < least:
        raise ValueError(f"inv_moment of order {order} needs dof >= {least}, got {dist.dof}")
    js, ws = _poisson_weights(dist.noncentrality / 2.0)
    m = dist.dof + 2.0 * js
    if order == 1:
        return float(np.sum(ws / (m - 2.0)))
    return float(np.sum(ws / ((m - 2.0) * (m - 4.0))))


def truncated_inv_moment(dist: NoncentralChiSq, cutoff: float, order: int = 1) -> float:
    """E[X**-order * 1{X < cutoff}] for X ~ NoncentralChiSq.

    The indicator is on the chi-square variate itself.  Integrating the
    central-component density against x**-order shifts the dof down by
    2*order, so each term is a scaled incomplete gamma:

        E[X**-1 1{X<c}]  per component = P(chi2_{m-2} <= c) / (m - 2),
        E[X**-2 1{X<c}]  per component = P(chi2_{m-4} <= c) / ((m-2)(m-4)).

    Monotone nondecreasing in cutoff with limits 0 (cutoff -> 0) and the
    corresponding untruncated inverse moment (cutoff -> inf).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    least = 3 if order == 1 else 5
    if dist.dof < least:
        raise ValueError(
            f"truncated_inv_moment of order {order} needs dof >= {least}, got {dist.dof}"
        )
    if cutoff <= 0.0:
        return 0.0
    js, ws = _poisson_weights(dist.noncentrality / 2.0)
    m = dist.dof + 2.0 * js
    if order == 1:
        return float(np.sum(ws * gammainc((m - 2.0) / 2.0, cutoff / 2.0) / (m - 2.0)))
    return float(np.sum(ws * gammainc((m - 4.0) / 2.0, cutoff / 2.0) / ((m - 2.0) * (m - 4.0))))
