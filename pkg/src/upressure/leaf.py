"""Local unstable leaves and the leaf / Bowen metrics along them.

A leaf segment ``W^u(x, delta)`` is stored as a polyline in one lift chart,
parameterized by arclength ``s`` in ``[-delta, delta]`` with ``s = 0`` at the
base point.  Linear families have straight leaves.  For the perturbed family
a tiny segment at ``f^{-m}(x)`` along ``E^u`` is pushed forward ``m`` times;
each step is re-anchored on the computed backward orbit so that the image
passes through ``x`` exactly.

Distances between iterates are image-arc lengths: for points ``y(s1), y(s2)``
on the leaf,

    d^u(f^j y(s1), f^j y(s2)) = integral_{s1}^{s2} ||Df^j(y(s)) tau(s)|| ds

with ``tau`` the unit tangent, which is exact for one-dimensional leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from upressure import systems
from upressure.systems import SystemSpec

DEFAULT_RESOLUTION = 2e-3
DEFAULT_CONSTRUCTION_DEPTH = 20
MAX_RADIUS = 0.5


class LeafError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LeafSegment:
    base: np.ndarray
    radius: float
    s: np.ndarray
    lift: np.ndarray
    construction_depth: int
    resolution: float

    @property
    def points(self) -> np.ndarray:
        return systems.wrap(self.lift)

    @property
    def straight(self) -> bool:
        return self.construction_depth == 0

    def _check_range(self, s):
        s = np.asarray(s, dtype=float)
        tol = 1e-12 * max(1.0, self.radius)
        if np.any(s < -self.radius - tol) or np.any(s > self.radius + tol):
            raise ValueError(f"leaf parameter outside [-{self.radius}, {self.radius}]")
        return np.clip(s, -self.radius, self.radius)

    def lift_at(self, s) -> np.ndarray:
        s = self._check_range(s)
        if self.straight:
            direction = self.lift[-1] - self.lift[0]
            direction = direction / np.linalg.norm(direction)
            return self.base + s[..., None] * direction
        return np.stack([np.interp(s, self.s, self.lift[:, k]) for k in range(self.lift.shape[1])], axis=-1)

    def point_at(self, s) -> np.ndarray:
        return systems.wrap(self.lift_at(s))

    def tangent_at(self, s) -> np.ndarray:
        """Unit tangent; central differences at the vertices, interpolated."""
        s = self._check_range(s)
        if self.straight:
            direction = self.lift[-1] - self.lift[0]
            return np.broadcast_to(direction / np.linalg.norm(direction), s.shape + (self.lift.shape[1],)).copy()
        vt = np.gradient(self.lift, self.s, axis=0, edge_order=2)
        t = np.stack([np.interp(s, self.s, vt[:, k]) for k in range(vt.shape[1])], axis=-1)
        return t / np.linalg.norm(t, axis=-1, keepdims=True)


def trace_leaf(
    system: SystemSpec,
    x,
    delta: float,
    resolution: float = DEFAULT_RESOLUTION,
    depth: int = DEFAULT_CONSTRUCTION_DEPTH,
) -> LeafSegment:
    """Trace ``W^u(x, delta)`` as an arclength-parameterized polyline."""
    x = systems.wrap(systems.check_points(system, x))
    if x.ndim != 1:
        raise ValueError("trace_leaf takes a single base point")
    if not 0.0 < delta < MAX_RADIUS:
        raise ValueError(f"leaf radius must lie in (0, {MAX_RADIUS}), got {delta}")
    if resolution <= 0:
        raise ValueError("resolution must be > 0")

    if system.is_linear:
        count = int(math.ceil(2 * delta / resolution)) + 1
        if count % 2 == 0:
            count += 1
        s = np.linspace(-delta, delta, count)
        s[count // 2] = 0.0
        lift = x + s[:, None] * system.unstable_eigendirection
        return LeafSegment(x, float(delta), s, lift, 0, float(resolution))

    return _trace_perturbed(system, x, float(delta), float(resolution), int(depth))


def _trace_perturbed(system, x, delta, resolution, depth):
    # backward pseudo-orbit; each forward step is re-anchored on it
    orbit = [x]
    for _ in range(depth):
        orbit.append(systems.inverse(system, orbit[-1]))
    orbit = np.array(orbit)
    shifts = []
    for k in range(depth, 0, -1):
        image = systems.lift_apply(system, orbit[k])
        shifts.append(orbit[k - 1] + np.round(image - orbit[k - 1]) - image)
    shifts = np.array(shifts)

    def push(u, seed, direction):
        p = seed + u[:, None] * direction
        for c in shifts:
            p = systems.lift_apply(system, p) + c
        return p

    seed = orbit[depth]
    direction = systems.unstable_direction(system, seed)
    growth = 1.0
    for y in orbit[1:]:
        growth *= float(systems.expansion_factor(system, y))
    half = 1.25 * delta / growth

    for _ in range(8):
        u = np.linspace(-half, half, 17)
        p = push(u, seed, direction)
        for _ in range(60):
            gaps = np.linalg.norm(np.diff(p, axis=0), axis=1)
            bad = np.nonzero(gaps > resolution)[0]
            if bad.size == 0:
                break
            mids = 0.5 * (u[bad] + u[bad + 1])
            u = np.insert(u, bad + 1, mids)
            p = np.insert(p, bad + 1, push(mids, seed, direction), axis=0)
        else:
            raise LeafError("adaptive resampling did not reach the requested resolution")
        i0 = int(np.searchsorted(u, 0.0))
        if u[i0] != 0.0:
            u = np.insert(u, i0, 0.0)
            p = np.insert(p, i0, push(np.zeros(1), seed, direction), axis=0)
        # exact anchoring on the base point
        p = p - p[i0] + x
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
        s = arc - arc[i0]
        if s[0] <= -delta and s[-1] >= delta:
            break
        half *= 2.0
    else:
        raise LeafError("could not grow the leaf to the requested radius")

    keep = (s > -delta) & (s < delta)
    lo = np.stack([np.interp(-delta, s, p[:, k]) for k in range(p.shape[1])])
    hi = np.stack([np.interp(delta, s, p[:, k]) for k in range(p.shape[1])])
    s_out = np.concatenate([[-delta], s[keep], [delta]])
    lift = np.vstack([lo, p[keep], hi])
    return LeafSegment(x, delta, s_out, lift, depth, resolution)


def du_distance(leaf: LeafSegment, s1: float, s2: float) -> float:
    """Leaf distance between two parameters (arclength along the polyline)."""
    leaf._check_range(np.array([s1, s2]))
    return abs(float(s2) - float(s1))


def log_expansions(system: SystemSpec, leaf: LeafSegment, s, steps: int, chunk: int = 1 << 18):
    """``log ||Df^j(y(s)) tau(s)||`` for ``j = 0..steps`` as an array ``(steps + 1, len(s))``.

    Raises:
        LeafError: if some one-step expansion is not > 1, in which case the
            Bowen metric is no longer the image length at the last iterate.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros((steps + 1, s.size))
    if system.is_linear:
        out[:] = np.arange(steps + 1)[:, None] * math.log(system.lambda_u)
        return out
    for a in range(0, s.size, chunk):
        b = min(a + chunk, s.size)
        pts = leaf.point_at(s[a:b])
        tau = leaf.tangent_at(s[a:b])
        acc = np.zeros(b - a)
        for j in range(1, steps + 1):
            w = systems.push_vectors(system, pts, tau)
            norm = np.linalg.norm(w, axis=-1)
            if np.any(norm <= 1.0):
                raise LeafError("non-expanding step along the leaf")
            acc = acc + np.log(norm)
            out[j, a:b] = acc
            tau = w / norm[:, None]
            pts = systems.apply(system, pts)
    return out


def image_lengths(system: SystemSpec, leaf: LeafSegment, s1: float, s2: float, n: int, samples: int | None = None):
    """Lengths of the image arcs ``f^j([s1, s2])`` for ``j = 0..n-1``."""
    lo, hi = sorted((float(s1), float(s2)))
    if lo == hi:
        return np.zeros(n)
    if system.is_linear:
        return (hi - lo) * system.lambda_u ** np.arange(n)
    if samples is None:
        grow = (system.lambda_u + 1.0) ** (n - 1)
        samples = int(min(max(64, math.ceil((hi - lo) * grow / (0.05 * leaf.resolution))), 1 << 22))
    grid = np.linspace(lo, hi, samples + 1)
    jac = np.exp(log_expansions(system, leaf, grid, n - 1))
    return np.trapezoid(jac, grid, axis=1)


def dun_distance(system: SystemSpec, leaf: LeafSegment, s1: float, s2: float, n: int) -> float:
    """Bowen leaf metric ``max_{0 <= j < n} d^u(f^j y(s1), f^j y(s2))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    leaf._check_range(np.array([s1, s2]))
    return float(np.max(image_lengths(system, leaf, s1, s2, n)))


def ambient_ratio(leaf: LeafSegment, pairs: int = 2000, seed: int = 0):
    """Ratios ``d^u / d`` over random sample pairs of the leaf.

    Returns the array of ``(d, d^u)`` pairs; the comparison constant ``C``
    is ``max(d^u / d)``.
    """
    rng = np.random.default_rng(seed)
    s = np.sort(rng.uniform(-leaf.radius, leaf.radius, size=(pairs, 2)), axis=1)
    s = s[s[:, 1] > s[:, 0]]
    du = s[:, 1] - s[:, 0]
    d = systems.torus_distance(leaf.point_at(s[:, 0]), leaf.point_at(s[:, 1]))
    return d, du


def backward_residuals(system: SystemSpec, leaf: LeafSegment, s, k_max: int = 10) -> np.ndarray:
    """``d(f^{-k} y(s), f^{-k} x)`` for ``k = 0..k_max``, shape ``(k_max + 1, len(s))``."""
    y = leaf.point_at(np.asarray(s, dtype=float))
    x = np.broadcast_to(leaf.base, y.shape).copy()
    out = [systems.torus_distance(x, y)]
    for _ in range(k_max):
        x, y = systems.inverse(system, x), systems.inverse(system, y)
        out.append(systems.torus_distance(x, y))
    return np.array(out)
