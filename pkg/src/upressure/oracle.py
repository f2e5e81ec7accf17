"""Exact reference values: Perron eigenpairs and transfer-matrix pressure."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

MAX_SYMBOLS = 64
POWER_ITERATION_CAP = 100_000


class ReducibleMatrixError(ValueError):
    pass


class PerronConvergenceError(RuntimeError):
    pass


def is_irreducible(matrix) -> bool:
    m = np.asarray(matrix)
    ncomp, _ = connected_components(m > 0, directed=True, connection="strong")
    return ncomp == 1


def perron(matrix, tol: float = 1e-12, max_iter: int = POWER_ITERATION_CAP):
    """Dominant eigenvalue and positive unit eigenvector of a nonnegative irreducible matrix.

    Power iteration runs on ``M + I``, which is primitive whenever ``M`` is
    irreducible, so periodic matrices converge too.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if not is_irreducible(m):
        raise ReducibleMatrixError("matrix is reducible")
    k = m.shape[0]
    shifted = m + np.eye(k)
    v = np.full(k, 1.0 / math.sqrt(k))
    lam = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        lam_new = float(np.linalg.norm(w))
        w /= lam_new
        if abs(lam_new - lam) <= tol * lam_new and np.max(np.abs(w - v)) <= tol:
            v = w
            break
        v, lam = w, lam_new
    else:
        raise PerronConvergenceError(f"power iteration did not converge in {max_iter} steps")
    rho = float(v @ (m @ v) / (v @ v))
    return rho, v / np.linalg.norm(v)


@dataclass(frozen=True)
class SftSpec:
    """Subshift of finite type with a potential depending on the current symbol."""

    transition: tuple
    site_potential: tuple

    def __post_init__(self):
        t = np.asarray(self.transition)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("transition matrix must be square")
        if t.shape[0] > MAX_SYMBOLS:
            raise ValueError(f"at most {MAX_SYMBOLS} symbols are supported")
        if not np.all(np.isin(t, (0, 1))):
            raise ValueError("transition matrix must be 0/1")
        if len(self.site_potential) != t.shape[0]:
            raise ValueError("one potential value per symbol is required")
        if not is_irreducible(t):
            raise ReducibleMatrixError("transition matrix is reducible")
        object.__setattr__(self, "transition", tuple(tuple(int(v) for v in row) for row in t))
        object.__setattr__(self, "site_potential", tuple(float(v) for v in self.site_potential))

    def weighted_matrix(self) -> np.ndarray:
        t = np.array(self.transition, dtype=float)
        return t * np.exp(np.array(self.site_potential))[:, None]


def sft_pressure(sft: SftSpec) -> float:
    """Classical pressure ``log rho(T_ij exp(phi_i))``."""
    rho, _ = perron(sft.weighted_matrix())
    return math.log(rho)


def convexity_slack(p, a) -> float:
    """``s (log sum e^{a_i} - log s) - sum p_i (a_i - log p_i)`` with ``s = sum p_i``.

    Nonnegative for ``p_i`` in [0, 1]; zero exactly when ``p`` is
    proportional to ``e^{a_i}``.  Terms with ``p_i = 0`` contribute nothing.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError("p and a must be vectors of equal length")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("p_i must lie in [0, 1]")
    s = float(p.sum())
    if s <= 0:
        raise ValueError("sum of p must be > 0")
    pos = p > 0
    lhs = float(np.sum(p[pos] * (a[pos] - np.log(p[pos]))))
    rhs = s * (float(logsumexp(a)) - math.log(s))
    return rhs - lhs
