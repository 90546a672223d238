"""Thin SPD solve helpers shared by the fitting and shrinkage code.

All solves go through a Cholesky factorization.  A failed factorization
gets one retry with a jitter of 1e-10 * trace/dim added to the diagonal;
a second failure raises SingularMatrixError carrying the indefinite
leading minor reported by the factorization.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["SingularMatrixError", "quad_form", "spd_inverse", "spd_solve"]

_JITTER_SCALE = 1e-10
_SYM_RTOL = 1e-8


class SingularMatrixError(ValueError):
    """A matrix required to be symmetric positive definite is not."""


def _factor(a: np.ndarray):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SingularMatrixError("matrix contains non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > _SYM_RTOL * max(1.0, scale):
        raise SingularMatrixError("matrix is not symmetric")
    try:
        return cho_factor(a, lower=True)
    except np.linalg.LinAlgError as first:
        jitter = _JITTER_SCALE * np.trace(a) / a.shape[0]
        try:
            return cho_factor(a + jitter * np.eye(a.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            raise SingularMatrixError(f"not positive definite: {first}") from first


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a."""
    return cho_solve(_factor(a), np.asarray(b, dtype=float))


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Explicit inverse of an SPD matrix, symmetrized against roundoff."""
    a = np.asarray(a, dtype=float)
    inv = cho_solve(_factor(a), np.eye(a.shape[0]))
    return (inv + inv.T) / 2.0


def quad_form(v: np.ndarray, a: np.ndarray) -> float:
    """v' a**-1 v for SPD a; nonnegative up to roundoff."""
    v = np.asarray(v, dtype=float)
    return float(v @ spd_solve(a, v))
