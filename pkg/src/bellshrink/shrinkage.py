"""Restricted, pretest, and James-Stein estimation on top of a fitted model.

Given an unrestricted fit with coefficients b and total information F, and
a linear restriction H beta = h with H of full row rank r, the restricted
estimator is the information-metric projection

    b_RE = b - F**-1 H' (H F**-1 H')**-1 (H b - h),

and the Wald statistic for the restriction is

    f = (H b - h)' (H F**-1 H')**-1 (H b - h).

The pretest estimator keeps b_RE when f falls below the chi-square(r)
critical value and b otherwise.  The James-Stein estimator moves from
b_RE toward b by the data-driven factor 1 - (r-2)/f (requiring r >= 3),
and its positive part clamps that factor at zero so the combination never
overshoots past b_RE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import bell_glm
from .bell_glm import Dataset, FittedModel
from .linalg import SingularMatrixError, spd_solve

__all__ = [
    "EstimatorSet",
    "LinearRestriction",
    "compute_all",
    "james_stein",
    "load_restriction",
    "lr_statistic",
    "positive_james_stein",
    "pretest",
    "restricted",
    "test_statistic",
]

_MIN_JS_RESTRICTIONS = 3


@dataclass(frozen=True)
class LinearRestriction:
    """Linear constraint H beta = h with H full row rank, r <= k."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.ascontiguousarray(self.H, dtype=float)
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if H.ndim != 2:
            raise ValueError(f"H must be 2-d, got ndim={H.ndim}")
        r, k = H.shape
        if not (1 <= r <= k):
            raise ValueError(f"need 1 <= rows <= columns, got H shape {H.shape}")
        if h.shape != (r,):
            raise ValueError(f"h must have one entry per row of H, got shape {h.shape}")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
            raise ValueError("restriction contains non-finite entries")
        if np.linalg.matrix_rank(H) != r:
            raise ValueError(f"H must have full row rank {r}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def n_restrictions(self) -> int:
        return self.H.shape[0]


def load_restriction(path) -> LinearRestriction:
    """Parse a plain-text restriction file.

    One row per line: the entries of that row of H, whitespace-separated,
    then a '|', then the corresponding entry of h.  Blank lines and lines
    starting with '#' are skipped.
    """
    rows = []
    rhs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.count("|") != 1:
                raise ValueError(f"{path}:{lineno}: expected exactly one '|' separator")
            left, right = line.split("|")
            try:
                row = [float(tok) for tok in left.split()]
                val = float(right)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from exc
            if not row:
                raise ValueError(f"{path}:{lineno}: empty restriction row")
            if rows and len(row) != len(rows[0]):
                raise ValueError(
                    f"{path}:{lineno}: row has {len(row)} entries, expected {len(rows[0])}"
                )
            rows.append(row)
            rhs.append(val)
    if not rows:
        raise ValueError(f"{path}: no restriction rows found")
    return LinearRestriction(np.array(rows), np.array(rhs))


@dataclass(frozen=True)
class EstimatorSet:
    """The five estimators for one fit; jse/pjse are None when r < 3."""

    un: np.ndarray
    re: np.ndarray
    pte: np.ndarray
    jse: np.ndarray | None
    pjse: np.ndarray | None
    f_stat: float


def _projection_pieces(model: FittedModel, rest: LinearRestriction):
    H, h = rest.H, rest.h
    if H.shape[1] != model.beta.size:
        raise ValueError(
            f"restriction has {H.shape[1]} columns but the model has {model.beta.size} parameters"
        )
    try:
        finv_ht = spd_solve(model.fisher_info, H.T)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"information matrix is singular: {exc}") from exc
    m = H @ finv_ht
    gap = H @ model.beta - h
    try:
        m_inv_gap = spd_solve(m, gap)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"H F^-1 H' is singular; restriction may be rank-deficient under this fit: {exc}"
        ) from exc
    return finv_ht, gap, m_inv_gap


def restricted(model: FittedModel, rest: LinearRestriction) -> np.ndarray:
    """Project the unrestricted fit onto the restriction in the F metric."""
    finv_ht, _, m_inv_gap = _projection_pieces(model, rest)
    return model.beta - finv_ht @ m_inv_gap


def test_statistic(model: FittedModel, rest: LinearRestriction) -> float:
    """Wald statistic for H beta = h; asymptotically chi-square(r) under it."""
    _, gap, m_inv_gap = _projection_pieces(model, rest)
    return max(0.0, float(gap @ m_inv_gap))


def lr_statistic(model: FittedModel, data: Dataset, rest: LinearRestriction) -> float:
    """Likelihood-ratio form 2*[loglik(un) - loglik(re)], diagnostic only.

    The restricted point is the information-metric projection rather than
    a constrained maximizer, so this tracks (and under the restriction,
    asymptotically matches) the Wald statistic without replacing it.
    """
    re = restricted(model, rest)
    return 2.0 * (model.loglik - bell_glm.loglik(re, data))


def pretest(
    un: np.ndarray, re: np.ndarray, f_stat: float, r: int, alpha: float
) -> np.ndarray:
    """re when f_stat < chi-square(r) upper-alpha critical value, else un.

    Ties at the critical value keep the unrestricted estimator."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    crit = float(chi2.ppf(1.0 - alpha, r))
    return re.copy() if f_stat < crit else un.copy()


def _check_js_args(f_stat: float, r: int) -> None:
    if not float(r).is_integer() or r < _MIN_JS_RESTRICTIONS:
        raise ValueError(f"James-Stein estimation needs r >= 3 restrictions, got {r!r}")
    if not np.isfinite(f_stat) and f_stat != float("inf"):
        raise ValueError(f"f_stat must be a nonnegative number, got {f_stat!r}")
    if f_stat < 0.0:
        raise ValueError(f"f_stat must be nonnegative, got {f_stat!r}")
    if f_stat == 0.0:
        raise ValueError(
            "f_stat is zero: shrinkage factor undefined (the restriction holds "
            "exactly; use the restricted estimator)"
        )


def james_stein(un: np.ndarray, re: np.ndarray, f_stat: float, r: int) -> np.ndarray:
    """re + (1 - (r-2)/f_stat) * (un - re); unbounded below for small f_stat."""
    _check_js_args(f_stat, r)
    factor = 1.0 - (r - 2.0) / f_stat
    return re + factor * (un - re)


def positive_james_stein(un: np.ndarray, re: np.ndarray, f_stat: float, r: int) -> np.ndarray:
    """James-Stein with the shrinkage factor clamped at zero.

    Equals re exactly whenever f_stat <= r - 2, and always lies on the
    segment between re and un."""
    _check_js_args(f_stat, r)
    factor = 1.0 - (r - 2.0) / f_stat
    if factor <= 0.0:
        return re.copy()
    return re + factor * (un - re)


def compute_all(model: FittedModel, rest: LinearRestriction, alpha: float = 0.05) -> EstimatorSet:
    """All five estimators in one pass; jse/pjse are None when r < 3,
    and an exactly-satisfied restriction (f_stat = 0) short-circuits both
    to the restricted estimator."""
    finv_ht, gap, m_inv_gap = _projection_pieces(model, rest)
    un = model.beta.copy()
    re = model.beta - finv_ht @ m_inv_gap
    f_stat = max(0.0, float(gap @ m_inv_gap))
    r = rest.n_restrictions
    pte = pretest(un, re, f_stat, r, alpha)
    if r >= _MIN_JS_RESTRICTIONS:
        if f_stat == 0.0:
            jse = re.copy()
            pjse = re.copy()
        else:
            jse = james_stein(un, re, f_stat, r)
            pjse = positive_james_stein(un, re, f_stat, r)
    else:
        jse = None
        pjse = None
    return EstimatorSet(un=un, re=re, pte=pte, jse=jse, pjse=pjse, f_stat=f_stat)
