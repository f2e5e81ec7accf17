"""Unstable pressure from (n, eps) u-separated and u-spanning sets.

On a one-dimensional leaf whose dynamics expands at every step, the Bowen
leaf metric between two parameters is the length of the image arc at the
last iterate, ``L_{n-1}(s2) - L_{n-1}(s1)``, with ``L_j`` the cumulative image
length.  Greedy sweeps are therefore arithmetic progressions in ``L_{n-1}``:

* separated: targets ``offset + k * eps``, ``k = 0, 1, ...``;
* spanning: centers at ``(2k + 1) * eps``, the last one clipped to the end.

All potentials passed to :func:`estimate_pressure_many` are evaluated on the
same leaves, base points and point sets, so identities that hold
algebraically for Birkhoff sums hold to rounding error between estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from upressure import leaf as leaflib
from upressure import systems
from upressure.potentials import Potential
from upressure.systems import SystemSpec

CHUNK = 1 << 17
_TOL = 1e-9


def default_base_points(system: SystemSpec, count: int = 5, seed: int = 0) -> tuple:
    """``count`` scrambled-Halton points, fully determined by ``seed``."""
    pts = qmc.Halton(d=system.dim, scramble=True, seed=seed).random(count)
    return tuple(tuple(float(c) for c in p) for p in systems.wrap(pts))


@dataclass(frozen=True)
class SeparationParams:
    """Estimator configuration.

    ``offsets`` greedy sweeps are started at ``i * eps / offsets`` (in the
    Bowen metric) from the left end of each leaf.  ``refinement`` is the
    number of geometry-grid cells per ``eps_min`` at the top level, used for
    non-linear leaves only.
    """

    delta: float = 0.2
    eps_list: tuple = (0.1, 0.05, 0.025)
    n_min: int = 4
    n_max: int = 14
    offsets: int = 8
    base_points: tuple = ()
    plateau_tol: float = 0.03
    resolution: float = leaflib.DEFAULT_RESOLUTION
    refinement: int = 4

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        object.__setattr__(self, "eps_list", eps)
        object.__setattr__(self, "base_points", tuple(tuple(float(c) for c in p) for p in self.base_points))
        if not 0 < self.delta < leaflib.MAX_RADIUS:
            raise ValueError(f"delta must lie in (0, {leaflib.MAX_RADIUS})")
        if not eps:
            raise ValueError("eps_list is empty")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        if eps[-1] <= 0 or eps[0] >= 2 * self.delta:
            raise ValueError("every eps must lie in (0, 2 * delta)")
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.n_max < self.n_min + 4:
            raise ValueError("n_max must be >= n_min + 4 for the slope fit")
        if self.offsets < 1:
            raise ValueError("offsets must be >= 1")
        if not self.base_points:
            raise ValueError("at least one base point is required")
        if self.plateau_tol <= 0:
            raise ValueError("plateau_tol must be > 0")

    @property
    def n_values(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def fit_values(self) -> np.ndarray:
        return np.arange(math.ceil((self.n_min + self.n_max) / 2), self.n_max + 1)


def make_params(system: SystemSpec, base_point_count: int = 5, seed: int = 0, **kwargs) -> SeparationParams:
    return SeparationParams(base_points=default_base_points(system, base_point_count, seed), **kwargs)


# ----------------------------------------------------------------------
# geometry of the greedy sweeps


class BowenGeometry:
    """Cumulative image lengths ``L_{n-1}`` along one leaf for several ``n``."""

    def __init__(self, system: SystemSpec, leaf: leaflib.LeafSegment, levels, eps_min: float, refinement: int = 4):
        self.system = system
        self.leaf = leaf
        self.levels = sorted(set(int(n) for n in levels))
        self._lengths = {}
        if system.is_linear:
            self.grid = None
            return
        top = self.levels[-1]
        probe = np.linspace(-leaf.radius, leaf.radius, 4097)
        jmax = float(np.exp(leaflib.log_expansions(system, leaf, probe, top - 1)[-1].max()))
        h = eps_min / (refinement * 1.5 * jmax)
        count = int(math.ceil(2 * leaf.radius / h)) + 1
        grid = np.linspace(-leaf.radius, leaf.radius, count)
        logs = leaflib.log_expansions(system, leaf, grid, top - 1)
        self.grid = grid
        dx = np.diff(grid)
        for n in self.levels:
            jac = np.exp(logs[n - 1])
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (jac[1:] + jac[:-1]) * dx)])
            self._lengths[n] = cum

    def total(self, n: int) -> float:
        if self.grid is None:
            return 2 * self.leaf.radius * self.system.lambda_u ** (n - 1)
        return float(self._lengths[n][-1])

    def params(self, n: int, targets) -> np.ndarray:
        """Leaf parameters whose cumulative image length equals ``targets``."""
        targets = np.asarray(targets, dtype=float)
        if self.grid is None:
            s = -self.leaf.radius + targets / self.system.lambda_u ** (n - 1)
        else:
            s = np.interp(targets, self._lengths[n], self.grid)
        return np.clip(s, -self.leaf.radius, self.leaf.radius)


def separated_count(total: float, eps: float, offset: float = 0.0) -> int:
    if not 0 <= offset < eps:
        raise ValueError("offset must lie in [0, eps)")
    if offset > total * (1 + _TOL):
        return 0
    return int(math.floor((total - offset) / eps + _TOL)) + 1


def separated_targets(total: float, eps: float, offset: float = 0.0) -> np.ndarray:
    return offset + eps * np.arange(separated_count(total, eps, offset))


def spanning_count(total: float, eps: float) -> int:
    return max(1, int(math.ceil(total / (2 * eps) - _TOL)))


def spanning_targets(total: float, eps: float) -> np.ndarray:
    return np.minimum(eps * (2 * np.arange(spanning_count(total, eps)) + 1), total)


def _geometry_for(system, leaf, n, eps):
    return BowenGeometry(system, leaf, [n], eps)


def separated_set(system: SystemSpec, leaf: leaflib.LeafSegment, n: int, eps: float, offset: float = 0.0):
    """Greedy left-to-right ``(n, eps)`` u-separated set, as leaf parameters."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    geo = _geometry_for(system, leaf, n, eps)
    return geo.params(n, separated_targets(geo.total(n), eps, offset))


def spanning_set(system: SystemSpec, leaf: leaflib.LeafSegment, n: int, eps: float):
    """Greedy ``(n, eps)`` u-spanning set, as leaf parameters."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    geo = _geometry_for(system, leaf, n, eps)
    return geo.params(n, spanning_targets(geo.total(n), eps))


# ----------------------------------------------------------------------
# weighted sums


def _lse_combine(parts):
    """Combine ``(max, sum exp(v - max))`` pairs in their given order."""
    m = max(p[0] for p in parts)
    if m == -np.inf:
        return -np.inf
    return m + math.log(math.fsum(s * math.exp(mc - m) for mc, s in parts))


def birkhoff_log_sums(system: SystemSpec, potentials, leaf: leaflib.LeafSegment, s, n: int) -> np.ndarray:
    """``log sum_y exp(S_n phi(y))`` over the points ``y(s)``, for each potential.

    Accumulation is max-shifted and runs over fixed-size chunks in parameter
    order, so results are reproducible bit for bit.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty(len(potentials))
    if s.size == 0:
        out[:] = -np.inf
        return out
    consts = [p.constant_value(system) for p in potentials]
    varying = [i for i, c in enumerate(consts) if c is None]
    for i, c in enumerate(consts):
        if c is not None:
            out[i] = math.log(s.size) + n * c
    if not varying:
        return out
    pots = [potentials[i] for i in varying]
    need_tangent = any(p.needs_tangent for p in pots) and not system.is_linear
    parts = [[] for _ in pots]
    for a in range(0, s.size, CHUNK):
        chunk = s[a : a + CHUNK]
        rows = np.ascontiguousarray(leaf.point_at(chunk).T)
        pts = rows.T
        tau = leaf.tangent_at(chunk) if need_tangent else None
        sums = np.zeros((len(pots), chunk.size))
        for i in range(n):
            cache = {}
            for k, p in enumerate(pots):
                sums[k] += p.evaluate(system, pts, tau, cache)
            if i < n - 1:
                if need_tangent:
                    w = systems.push_vectors(system, pts, tau)
                    tau = w / np.linalg.norm(w, axis=-1, keepdims=True)
                systems.advance_inplace(system, rows)
        for k in range(len(pots)):
            m = float(sums[k].max())
            parts[k].append((m, float(np.sum(np.exp(sums[k] - m)))))
    for k, i in enumerate(varying):
        out[i] = _lse_combine(parts[k])
    return out


def weighted_sum(system: SystemSpec, potential: Potential, leaf: leaflib.LeafSegment, points, n: int) -> float:
    """Log of ``sum exp(S_n phi(y))`` over the leaf points with parameters ``points``."""
    return float(birkhoff_log_sums(system, [potential], leaf, np.sort(np.asarray(points, dtype=float)), n)[0])


# ----------------------------------------------------------------------
# estimation


def fit_slope(n_values, y) -> tuple:
    """Least-squares slope of ``y`` against ``n`` and the RMS residual."""
    x = np.asarray(n_values, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    resid = y - (y.mean() + slope * xc)
    return slope, float(np.sqrt(np.mean(resid**2)))


@dataclass
class PressureEstimate:
    """Result of :func:`estimate_pressure`.

    ``log_sep[b, e, k, o]`` and ``log_span[b, e, k]`` hold the log weighted
    sums for base point ``b``, ``eps_list[e]``, ``n_values[k]`` and offset
    ``o``.  Rates are fitted to the offset-wise maximum.
    """

    potential: Potential
    params: SeparationParams
    log_sep: np.ndarray
    log_span: np.ndarray
    rates_sep: np.ndarray = field(init=False)
    rates_span: np.ndarray = field(init=False)
    residuals: np.ndarray = field(init=False)
    eps_rates: np.ndarray = field(init=False)
    value: float = field(init=False)
    spread: float = field(init=False)
    bracket: tuple = field(init=False)
    converged: bool = field(init=False)

    def __post_init__(self):
        p = self.params
        fit = np.isin(p.n_values, p.fit_values)
        best = self.log_sep.max(axis=3)
        nb, ne = best.shape[:2]
        self.rates_sep = np.empty((nb, ne))
        self.rates_span = np.empty((nb, ne))
        self.residuals = np.empty((nb, ne))
        for b in range(nb):
            for e in range(ne):
                self.rates_sep[b, e], self.residuals[b, e] = fit_slope(p.fit_values, best[b, e, fit])
                self.rates_span[b, e] = fit_slope(p.fit_values, self.log_span[b, e, fit])[0]
        self.eps_rates = self.rates_sep.max(axis=0)
        self.value = float(self.eps_rates[-1])
        self.spread = float(self.rates_sep[:, -1].max() - self.rates_sep[:, -1].min())
        self.bracket = (float(self.rates_span[:, -1].max()), self.value)
        if ne >= 2:
            self.converged = bool(abs(self.eps_rates[-1] - self.eps_rates[-2]) <= p.plateau_tol)
        else:
            self.converged = True

    def rows(self):
        """Grid rows ``(base_index, eps, n, offset, log_sum_sep, log_sum_span)`` in key order."""
        p = self.params
        for b in range(self.log_sep.shape[0]):
            for e, eps in enumerate(p.eps_list):
                for k, n in enumerate(p.n_values):
                    for o in range(p.offsets):
                        yield b, eps, int(n), o, float(self.log_sep[b, e, k, o]), float(self.log_span[b, e, k])

    def summary(self) -> dict:
        return {
            "value": self.value,
            "bracket": list(self.bracket),
            "spread": self.spread,
            "converged": self.converged,
            "eps_rates": [float(r) for r in self.eps_rates],
        }


def _base_grid(system, potentials, params, b):
    p = params
    x = np.array(p.base_points[b], dtype=float)
    leaf = leaflib.trace_leaf(system, x, p.delta, p.resolution)
    geo = BowenGeometry(system, leaf, p.n_values, p.eps_list[-1], p.refinement)
    ne, nn = len(p.eps_list), len(p.n_values)
    sep = np.empty((len(potentials), ne, nn, p.offsets))
    span = np.empty((len(potentials), ne, nn))
    consts = [pot.constant_value(system) for pot in potentials]
    constant = all(c is not None for c in consts)

    def log_sums(n, count, targets):
        if constant:
            return np.array([math.log(count) + n * c for c in consts])
        return birkhoff_log_sums(system, potentials, leaf, geo.params(n, targets()), n)

    for e, eps in enumerate(p.eps_list):
        for k, n in enumerate(p.n_values):
            total = geo.total(n)
            span[:, e, k] = log_sums(n, spanning_count(total, eps), lambda: spanning_targets(total, eps))
            for o in range(p.offsets):
                off = o * eps / p.offsets
                sep[:, e, k, o] = log_sums(
                    n, separated_count(total, eps, off), lambda: separated_targets(total, eps, off)
                )
    return sep, span


def estimate_pressure_many(system: SystemSpec, potentials, params: SeparationParams, threads: int = 1):
    """Estimate ``P^u`` for several potentials on shared leaves and point sets."""
    potentials = list(potentials)
    for x in params.base_points:
        systems.check_points(system, x)
    nb = len(params.base_points)
    if threads > 1 and nb > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _base_grid(system, potentials, params, b), range(nb)))
    else:
        results = [_base_grid(system, potentials, params, b) for b in range(nb)]
    out = []
    for i, pot in enumerate(potentials):
        sep = np.stack([r[0][i] for r in results])
        span = np.stack([r[1][i] for r in results])
        out.append(PressureEstimate(pot, params, sep, span))
    return out


def estimate_pressure(system: SystemSpec, potential: Potential, params: SeparationParams, threads: int = 1):
    return estimate_pressure_many(system, [potential], params, threads)[0]


def volume_growth_rate(system: SystemSpec, params: SeparationParams) -> float:
    """Growth rate of leaf length, ``max_x lim (1/n) log |f^n W^u(x, delta)|``.

    An independent route to the unstable topological entropy.
    """
    rates = []
    for x in params.base_points:
        leaf = leaflib.trace_leaf(system, np.array(x), params.delta, params.resolution)
        geo = BowenGeometry(system, leaf, params.fit_values, params.eps_list[-1], params.refinement)
        y = [math.log(geo.total(n)) for n in params.fit_values]
        rates.append(fit_slope(params.fit_values, y)[0])
    return max(rates)
