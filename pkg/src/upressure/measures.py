"""Empirical invariant measures and the entropy/pressure comparisons built on them.

Two kinds of measure are supported:

* ``EmpiricalSRB``: the Birkhoff orbit of a random point.  Its unstable
  entropy is the integral of ``log ||Df|E^u||``, which is exact for Gibbs
  u-states.
* ``PointMass``: a periodic orbit of the fiber map (times the rotation orbit
  of the circle coordinate for the 3-torus families).  Only the upper bound
  ``integral of -phi^u`` is available for its unstable entropy; such
  measures carry ``bound_only = True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from upressure import systems
from upressure.potentials import Geometric, Potential
from upressure.systems import SystemSpec

DEFAULT_ORBIT_LENGTH = 100_000
DEFAULT_BURN_IN = 1_000
MIN_ORBIT_LENGTH = 10_000


@dataclass(eq=False)
class MeasureEstimate:
    kind: str
    system: SystemSpec
    orbit: np.ndarray
    tangents: np.ndarray
    hu: float = float("nan")
    hu_method: str = ""
    bound_only: bool = False
    meta: dict = field(default_factory=dict)

    def integrate(self, potential: Potential) -> float:
        """Birkhoff average of ``potential`` over the stored orbit."""
        c = potential.constant_value(self.system)
        if c is not None:
            return float(c)
        return float(np.mean(potential.evaluate(self.system, self.orbit, self.tangents)))

    def report(self, potentials: dict | None = None) -> dict:
        out = {
            "kind": self.kind,
            "hu": self.hu,
            "hu_method": self.hu_method,
            "bound_only": self.bound_only,
        }
        out.update({k: v for k, v in self.meta.items() if k != "point"})
        if "point" in self.meta:
            out["point"] = [float(c) for c in self.meta["point"]]
        if potentials:
            out["integrals"] = {name: self.integrate(p) for name, p in potentials.items()}
        return out


def _scalar_orbit(system: SystemSpec, x0, v0, count: int, skip: int):
    """Orbit and pushed unit tangents, one step at a time in plain floats."""
    (a, b), (c, d) = system.matrix
    eps = system.perturbation_amplitude
    s1, s2 = system.perturbation_shape
    k1, k2 = eps * s1, eps * s2
    j1, j2 = 2 * math.pi * k1, 2 * math.pi * k2
    alpha = system.rotation_angle
    three = system.dim == 3
    tp = 2 * math.pi
    x, y = float(x0[0]), float(x0[1])
    th = float(x0[2]) if three else 0.0
    u, w = float(v0[0]), float(v0[1])
    pts = np.empty((count, system.dim))
    tans = np.zeros((count, system.dim))
    floor = math.floor
    for i in range(skip + count):
        if i >= skip:
            k = i - skip
            pts[k, 0] = x
            pts[k, 1] = y
            tans[k, 0] = u
            tans[k, 1] = w
            if three:
                pts[k, 2] = th
        if eps:
            sx, sy = math.sin(tp * x), math.sin(tp * y)
            cx, cy = math.cos(tp * x), math.cos(tp * y)
            nu = (a + j1 * cx) * u + b * w
            nw = c * u + (d + j2 * cy) * w
            nx = a * x + b * y + k1 * sx
            ny = c * x + d * y + k2 * sy
        else:
            nu = a * u + b * w
            nw = c * u + d * w
            nx = a * x + b * y
            ny = c * x + d * y
        norm = math.hypot(nu, nw)
        u, w = nu / norm, nw / norm
        x, y = nx - floor(nx), ny - floor(ny)
        if three:
            th += alpha
            th -= floor(th)
    return systems.wrap(pts), tans


def unstable_entropy(system: SystemSpec, mu: MeasureEstimate) -> float:
    """Unstable entropy via ``h^u = integral of log ||Df|E^u||``.

    For linear families this is ``log lambda_u`` exactly.  For point masses
    the value is only an upper bound (their unstable entropy is 0); callers
    must look at ``mu.bound_only``.
    """
    if mu.system != system:
        raise ValueError("measure was built for a different system")
    if system.is_linear:
        return math.log(system.lambda_u)
    return -mu.integrate(Geometric())


def _finish(mu: MeasureEstimate, bound_only: bool) -> MeasureEstimate:
    mu.hu = unstable_entropy(mu.system, mu)
    mu.hu_method = "ExactLinear" if mu.system.is_linear else "LyapunovIntegral"
    mu.bound_only = bound_only
    return mu


def empirical_srb(
    system: SystemSpec,
    orbit_length: int = DEFAULT_ORBIT_LENGTH,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
) -> MeasureEstimate:
    """Empirical SRB measure from the orbit of a seeded random point."""
    if orbit_length < MIN_ORBIT_LENGTH:
        raise ValueError(f"orbit_length must be >= {MIN_ORBIT_LENGTH}")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    rng = np.random.default_rng(seed)
    x0 = rng.random(system.dim)
    pts, tans = _scalar_orbit(system, x0, system.fiber_unstable, orbit_length, burn_in)
    meta = {"orbit_length": int(orbit_length), "burn_in": int(burn_in), "seed": int(seed)}
    return _finish(MeasureEstimate("EmpiricalSRB", system, pts, tans, meta=meta), bound_only=False)


def cocycle_exponent(system: SystemSpec, x0, n: int) -> float:
    """``(1/n) log ||Df^n(x0)|E^u||``, seeded with the backward-orbit direction at ``x0``."""
    x = systems.check_points(system, x0).copy()
    v = systems.unstable_direction(system, x)
    total = 0.0
    for _ in range(n):
        w = systems.derivative(system, x) @ v
        norm = float(np.linalg.norm(w))
        total += math.log(norm)
        v = w / norm
        x = systems.apply(system, x)
    return total / n


# ----------------------------------------------------------------------
# periodic orbits


def _fiber_power(system, z, p):
    """``F^p`` on the fiber lift and its Jacobian."""
    jac = np.eye(2)
    pt = np.concatenate([z, [0.0]]) if system.dim == 3 else z.copy()
    for _ in range(p):
        jac = systems.derivative(system, pt)[:2, :2] @ jac
        pt = systems.lift_apply(system, pt)
    return pt[:2], jac


def periodic_orbits(system: SystemSpec, max_period: int = 6, seeds: int = 8, max_orbits: int = 12):
    """Periodic orbits of the fiber map found by Newton's method on lifts.

    Returns a list of arrays of shape ``(p, 2)``, one per orbit of minimal
    period ``p <= max_period``, ordered by period and then lexicographically.
    """
    if not 1 <= max_period <= 6:
        raise ValueError("max_period must lie in [1, 6]")
    found = []
    keys = set()
    grid = (np.arange(seeds) + 0.5) / seeds
    for p in range(1, max_period + 1):
        for gx in grid:
            for gy in grid:
                z = np.array([gx, gy])
                for _ in range(50):
                    img, jac = _fiber_power(system, z, p)
                    r = img - z
                    r -= np.round(r)
                    if np.max(np.abs(r)) < 1e-13:
                        break
                    z = z - np.linalg.solve(jac - np.eye(2), r)
                else:
                    continue
                z = systems.wrap(z)
                orbit = [z]
                for _ in range(p - 1):
                    nxt = systems.wrap(_fiber_power(system, orbit[-1], 1)[0])
                    orbit.append(nxt)
                orbit = np.array(orbit)
                # minimal period check
                if any(np.max(np.abs(systems.torus_delta(orbit[0], orbit[q]))) < 1e-9 for q in range(1, p)):
                    continue
                key = tuple(sorted(tuple(np.round(pt, 9) % 1.0) for pt in orbit))
                if key in keys:
                    continue
                keys.add(key)
                found.append(orbit)
    found.sort(key=lambda o: (len(o), tuple(sorted(map(tuple, np.round(o, 9))))))
    return found[:max_orbits]


def point_mass(system: SystemSpec, orbit, theta: float = 0.0, orbit_length: int = DEFAULT_ORBIT_LENGTH):
    """Invariant measure on a periodic fiber orbit.

    On the 3-torus families the circle coordinate keeps rotating, so the
    measure is the Birkhoff average over ``orbit_length`` steps starting at
    ``(orbit[0], theta)``.
    """
    orbit = np.asarray(orbit, dtype=float)
    p = len(orbit)
    if system.dim == 2:
        pts = systems.wrap(orbit)
    else:
        reps = max(1, orbit_length // p)
        fiber = np.tile(orbit, (reps, 1))
        th = systems.wrap(theta + system.rotation_angle * np.arange(reps * p))
        pts = np.column_stack([fiber, th])
    tans = systems.unstable_direction(system, pts) if not system.is_linear else np.broadcast_to(
        system.unstable_eigendirection, pts.shape
    ).copy()
    meta = {"period": int(p), "point": orbit[0]}
    return _finish(MeasureEstimate("PointMass", system, pts, tans, meta=meta), bound_only=True)


# ----------------------------------------------------------------------
# comparisons with pressure


def _pvalue(P) -> float:
    return float(P.value) if hasattr(P, "value") else float(P)


def variational_gap(system: SystemSpec, potential: Potential, mu: MeasureEstimate, P, allow_bound: bool = False):
    """``P^u(phi) - (h^u_mu + integral of phi dmu)``.

    The gap is nonnegative for every invariant measure and vanishes for
    u-equilibrium states.  With ``bound_only`` measures the entropy term is
    an upper bound, so the gap is only a lower bound; pass
    ``allow_bound=True`` to accept that.
    """
    if mu.bound_only and not allow_bound:
        raise ValueError("measure only carries an upper bound on h^u; pass allow_bound=True")
    return _pvalue(P) - (mu.hu + mu.integrate(potential))


def pressure_dominates(system: SystemSpec, mu: MeasureEstimate, potentials, P_values, tolerance: float = 0.06):
    """Slack ``P^u(phi) - integral of phi dmu`` for each potential."""
    potentials = list(potentials)
    P_values = list(P_values)
    if len(potentials) != len(P_values):
        raise ValueError("one pressure value per potential is required")
    slacks = [_pvalue(P) - mu.integrate(phi) for phi, P in zip(potentials, P_values)]
    return {
        "kind": mu.kind,
        "slack": slacks,
        "min_slack": min(slacks) if slacks else float("nan"),
        "tolerance": tolerance,
        "passed": all(s >= -tolerance for s in slacks),
    }


def geometric_scale_probe(system: SystemSpec, mu: MeasureEstimate, t_grid, P_values, tolerance: float = 0.06):
    """Minimize ``P^u(t phi^u) - integral of t phi^u dmu`` over ``t_grid``.

    For a Gibbs u-state the minimum is attained at ``t = 1`` and equals
    ``h^u_mu``.  Ties within ``tolerance`` are reported as a set.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    integral = mu.integrate(Geometric())
    values = np.array([_pvalue(P) for P in P_values]) - t_grid * integral
    best = float(values.min())
    near = t_grid[values <= best + tolerance]
    step = float(np.min(np.diff(np.sort(t_grid)))) if t_grid.size > 1 else 0.0
    return {
        "t": t_grid.tolist(),
        "values": values.tolist(),
        "min_value": best,
        "argmin": float(t_grid[int(np.argmin(values))]),
        "argmin_set": near.tolist(),
        "attained_near_one": bool(np.any(np.abs(near - 1.0) <= step + 1e-12)),
        "matches_entropy": bool(abs(best - mu.hu) <= tolerance),
    }
