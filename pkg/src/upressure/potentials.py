"""Continuous potentials on the torus.

Potentials are small frozen dataclasses so they can be hashed, compared and
used as cache keys: when several potentials are evaluated on the same batch
of orbit points, shared sub-expressions are computed once.

Evaluation takes an optional array of unit tangent vectors in ``E^u``; the
geometric potential uses them instead of rebuilding the unstable direction
from backward orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from upressure import systems
from upressure.systems import SystemSpec


class Potential:
    needs_tangent = False

    def evaluate(self, system: SystemSpec, points, tangents=None, cache=None):
        points = np.asarray(points, dtype=float)
        if cache is None:
            cache = {}
        hit = cache.get(self)
        if hit is not None:
            return hit
        value = self._compute(system, points, tangents, cache)
        cache[self] = value
        return value

    __call__ = evaluate

    def constant_value(self, system: SystemSpec):
        """The value of the potential if it is constant on the phase space, else None."""
        return None

    def lipschitz(self, system: SystemSpec) -> float:
        """Upper bound on the Lipschitz constant in the flat metric."""
        raise NotImplementedError

    def modulus(self, system: SystemSpec, r: float) -> float:
        """Upper bound on ``sup {|phi(a) - phi(b)| : d(a, b) <= r}``."""
        return self.lipschitz(system) * r

    def to_dict(self) -> dict:
        raise NotImplementedError

    # sugar used by the property harness
    def __add__(self, other):
        return Affine(self, _as_potential(other), 1.0)

    def __mul__(self, c):
        return Affine(Constant(0.0), self, float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Affine(Constant(0.0), self, -1.0)


def _as_potential(p):
    return p if isinstance(p, Potential) else Constant(float(p))


@dataclass(frozen=True)
class Constant(Potential):
    value: float = 0.0

    def _compute(self, system, points, tangents, cache):
        return np.full(points.shape[:-1], self.value)

    def constant_value(self, system):
        return self.value

    def lipschitz(self, system):
        return 0.0

    def to_dict(self):
        return {"kind": "Constant", "value": self.value}


@dataclass(frozen=True)
class TrigTerm:
    coef: float
    freq: tuple
    fn: str = "cos"

    def __post_init__(self):
        if self.fn not in ("cos", "sin"):
            raise ValueError(f"trig term function must be 'cos' or 'sin', got {self.fn!r}")
        object.__setattr__(self, "freq", tuple(int(k) for k in self.freq))
        object.__setattr__(self, "coef", float(self.coef))


@dataclass(frozen=True)
class TrigPoly(Potential):
    """``sum_k coef_k * fn_k(2 pi <freq_k, x>)`` with ``fn_k`` cos or sin."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(t if isinstance(t, TrigTerm) else TrigTerm(**t) for t in self.terms)
        object.__setattr__(self, "terms", terms)

    def _compute(self, system, points, tangents, cache):
        out = np.zeros(points.shape[:-1])
        for t in self.terms:
            if len(t.freq) > system.dim:
                raise ValueError(f"frequency {t.freq} has more entries than the system dimension")
            arg = None
            for k, m in enumerate(t.freq):
                if m:
                    term = (2.0 * np.pi * m) * points[..., k]
                    arg = term if arg is None else arg + term
            if arg is None:
                if t.fn == "cos":
                    out += t.coef
                continue
            out += t.coef * (np.cos(arg) if t.fn == "cos" else np.sin(arg))
        return out

    def constant_value(self, system):
        if all(not any(t.freq) for t in self.terms):
            return float(sum(t.coef for t in self.terms if t.fn == "cos"))
        return None

    def lipschitz(self, system):
        return sum(abs(t.coef) * 2 * math.pi * math.hypot(*t.freq) for t in self.terms if any(t.freq))

    def sup_norm_bound(self):
        return sum(abs(t.coef) for t in self.terms)

    def to_dict(self):
        return {
            "kind": "TrigPoly",
            "terms": [{"coef": t.coef, "freq": list(t.freq), "fn": t.fn} for t in self.terms],
        }


@dataclass(frozen=True)
class Geometric(Potential):
    """``-log ||Df|E^u(x)||``."""

    needs_tangent = True

    def _compute(self, system, points, tangents, cache):
        if system.is_linear:
            return np.full(points.shape[:-1], -math.log(system.lambda_u))
        if tangents is None:
            tangents = systems.unstable_direction(system, points)
        return -np.log(np.linalg.norm(systems.push_vectors(system, points, tangents), axis=-1))

    def constant_value(self, system):
        return -math.log(system.lambda_u) if system.is_linear else None

    def lipschitz(self, system):
        if system.is_linear:
            return 0.0
        # d/dx log||(A + eps D(x)) v|| is bounded by eps * |D'| / min expansion,
        # plus the variation of v, which the cone contraction keeps comparable.
        eps = system.perturbation_amplitude
        d2 = (2 * math.pi) ** 2 * max(abs(s) for s in system.perturbation_shape)
        lo = system.lambda_u - eps * 2 * math.pi * max(abs(s) for s in system.perturbation_shape)
        return 4.0 * eps * d2 / lo

    def to_dict(self):
        return {"kind": "Geometric"}


@dataclass(frozen=True)
class Affine(Potential):
    """``base + t * direction``."""

    base: Potential = field(default_factory=Constant)
    direction: Potential = field(default_factory=Constant)
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))

    @property
    def needs_tangent(self):
        return self.base.needs_tangent or self.direction.needs_tangent

    def _compute(self, system, points, tangents, cache):
        b = self.base.evaluate(system, points, tangents, cache)
        d = self.direction.evaluate(system, points, tangents, cache)
        return b + self.t * d

    def constant_value(self, system):
        b, d = self.base.constant_value(system), self.direction.constant_value(system)
        if b is None or d is None:
            return None
        return b + self.t * d

    def lipschitz(self, system):
        return self.base.lipschitz(system) + abs(self.t) * self.direction.lipschitz(system)

    def to_dict(self):
        return {"kind": "Affine", "base": self.base.to_dict(), "direction": self.direction.to_dict(), "t": self.t}


@dataclass(frozen=True)
class Abs(Potential):
    base: Potential = field(default_factory=Constant)

    @property
    def needs_tangent(self):
        return self.base.needs_tangent

    def _compute(self, system, points, tangents, cache):
        return np.abs(self.base.evaluate(system, points, tangents, cache))

    def constant_value(self, system):
        c = self.base.constant_value(system)
        return None if c is None else abs(c)

    def lipschitz(self, system):
        return self.base.lipschitz(system)

    def to_dict(self):
        return {"kind": "Abs", "base": self.base.to_dict()}


@dataclass(frozen=True)
class Coboundary(Potential):
    """``base + transfer o f - transfer``."""

    base: Potential = field(default_factory=Constant)
    transfer: Potential = field(default_factory=Constant)

    @property
    def needs_tangent(self):
        return self.base.needs_tangent or self.transfer.needs_tangent

    def _compute(self, system, points, tangents, cache):
        b = self.base.evaluate(system, points, tangents, cache)
        here = self.transfer.evaluate(system, points, tangents, cache)
        image = systems.apply(system, points)
        image_tangents = None
        if tangents is not None:
            w = systems.push_vectors(system, points, tangents)
            image_tangents = w / np.linalg.norm(w, axis=-1, keepdims=True)
        there = self.transfer.evaluate(system, image, image_tangents, {})
        return b + (there - here)

    def constant_value(self, system):
        b = self.base.constant_value(system)
        if b is not None and self.transfer.constant_value(system) is not None:
            return b
        return None

    def lipschitz(self, system):
        lam = system.lambda_u + 2 * math.pi * system.perturbation_amplitude * max(
            abs(s) for s in system.perturbation_shape
        )
        return self.base.lipschitz(system) + (1.0 + lam) * self.transfer.lipschitz(system)

    def to_dict(self):
        return {"kind": "Coboundary", "base": self.base.to_dict(), "transfer": self.transfer.to_dict()}


def from_dict(d: dict) -> Potential:
    """Build a potential from its JSON form (see ``to_dict``)."""
    kind = d.get("kind")
    if kind == "Constant":
        return Constant(float(d.get("value", 0.0)))
    if kind == "TrigPoly":
        return TrigPoly(tuple(TrigTerm(t["coef"], tuple(t["freq"]), t.get("fn", "cos")) for t in d["terms"]))
    if kind == "Geometric":
        return Geometric()
    if kind == "Affine":
        return Affine(from_dict(d["base"]), from_dict(d["direction"]), float(d.get("t", 1.0)))
    if kind == "Abs":
        return Abs(from_dict(d["base"]))
    if kind == "Coboundary":
        return Coboundary(from_dict(d["base"]), from_dict(d["transfer"]))
    raise ValueError(f"unknown potential kind {kind!r}")


def trig(*terms) -> TrigPoly:
    """Shorthand: ``trig((0.5, (1, 0), "cos"), ...)``."""
    return TrigPoly(tuple(TrigTerm(c, tuple(f), fn) for c, f, fn in terms))


def sampled_sup(potential: Potential, system: SystemSpec, count: int = 1000, seed: int = 0) -> float:
    """Sup norm of ``potential`` estimated on ``count`` uniform random points."""
    rng = np.random.default_rng(seed)
    pts = systems.sample_points(system, count, rng)
    return float(np.max(np.abs(potential.evaluate(system, pts))))
