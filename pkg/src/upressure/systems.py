"""Partially hyperbolic map families on the 2- and 3-torus.

Three analytic families are supported:

* ``LinearToral``: a hyperbolic integer matrix ``A`` acting on T^2.
* ``LinearTimesRotation``: ``A x R_alpha`` on T^3, where the circle factor
  carries the (neutral) center direction.
* ``PerturbedTimesRotation``: ``(A(x, y) + eps * g(x, y), theta + alpha)`` with
  ``g(x, y) = (s1 sin 2 pi x, s2 sin 2 pi y)``.

All functions are vectorized: a point is an array whose last axis has length
``system.dim``; leading axes are broadcast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

CONE_BOUND = 0.15
DEFAULT_SHAPE = (1.0 / (2.0 * math.pi), 1.0 / (2.0 * math.pi))
DEFAULT_DEPTH = 30


class Family(str, enum.Enum):
    LINEAR_TORAL = "LinearToral"
    LINEAR_TIMES_ROTATION = "LinearTimesRotation"
    PERTURBED_TIMES_ROTATION = "PerturbedTimesRotation"


class InverseError(RuntimeError):
    """Fixed-point inversion of the perturbed map did not converge."""


def wrap(x):
    """Reduce coordinates to representatives in [0, 1)."""
    r = np.mod(x, 1.0)
    # np.mod(-1e-18, 1.0) == 1.0 in floating point
    return np.where(r >= 1.0, 0.0, r)


def torus_delta(a, b):
    """Shortest lift displacement from ``a`` to ``b`` on the flat torus."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.round(d)


def torus_distance(a, b):
    return np.linalg.norm(torus_delta(a, b), axis=-1)


@dataclass(frozen=True)
class SystemSpec:
    """Immutable description of one map from the supported families.

    Args:
        family: which analytic family.
        matrix: 2x2 integer hyperbolic matrix acting on the fiber T^2.
        rotation_angle: rotation ``alpha`` of the circle factor.
        perturbation_amplitude: ``eps`` of the perturbed family; at most
            ``CONE_BOUND``.
        perturbation_shape: amplitudes ``(s1, s2)`` of the displacement field.
        inverse_tol, inverse_max_iter: stopping rule for the fixed-point
            inverse of the perturbed map.
    """

    family: Family = Family.LINEAR_TORAL
    matrix: tuple = ((2, 1), (1, 1))
    rotation_angle: float = 0.0
    perturbation_amplitude: float = 0.0
    perturbation_shape: tuple = DEFAULT_SHAPE
    inverse_tol: float = 1e-13
    inverse_max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        m = np.asarray(self.matrix)
        if m.shape != (2, 2):
            raise ValueError(f"matrix must be 2x2, got shape {m.shape}")
        if not np.all(np.equal(np.mod(m, 1), 0)):
            raise ValueError("matrix entries must be integers")
        mi = tuple(tuple(int(v) for v in row) for row in m)
        object.__setattr__(self, "matrix", mi)
        (a, b), (c, d) = mi
        det = a * d - b * c
        if abs(det) != 1:
            raise ValueError(f"matrix must have |det| = 1, got det = {det}")
        disc = (a + d) ** 2 - 4 * det
        if disc <= 0:
            raise ValueError("matrix eigenvalues must be real and distinct")
        eig = np.abs(np.linalg.eigvals(np.array(mi, dtype=float)))
        if np.any(np.isclose(eig, 1.0)) or eig.max() <= 1.0:
            raise ValueError("matrix must be hyperbolic (no eigenvalue on the unit circle)")

        eps = float(self.perturbation_amplitude)
        object.__setattr__(self, "perturbation_amplitude", eps)
        object.__setattr__(self, "rotation_angle", float(self.rotation_angle))
        shape = tuple(float(v) for v in self.perturbation_shape)
        if len(shape) != 2:
            raise ValueError("perturbation_shape must have two amplitudes")
        object.__setattr__(self, "perturbation_shape", shape)
        if eps < 0:
            raise ValueError("perturbation_amplitude must be >= 0")
        if self.family is not Family.PERTURBED_TIMES_ROTATION and eps != 0.0:
            raise ValueError(f"{self.family.value} does not take a perturbation")
        if eps > CONE_BOUND:
            raise ValueError(
                f"perturbation_amplitude {eps} exceeds the cone-preservation bound {CONE_BOUND}"
            )
        if self.family is Family.LINEAR_TORAL and self.rotation_angle != 0.0:
            raise ValueError("LinearToral has no rotation factor")
        lip = 2.0 * math.pi * max(abs(s) for s in shape)
        if eps * lip * np.linalg.norm(self.A_inv, 2) >= 1.0:
            raise ValueError("perturbation too large for the fixed-point inverse to contract")

    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return 2 if self.family is Family.LINEAR_TORAL else 3

    @property
    def is_linear(self) -> bool:
        return self.family is not Family.PERTURBED_TIMES_ROTATION or self.perturbation_amplitude == 0.0

    @cached_property
    def A(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @cached_property
    def A_inv(self) -> np.ndarray:
        (a, b), (c, d) = self.matrix
        det = a * d - b * c
        return np.array([[d, -b], [-c, a]], dtype=float) * det

    @cached_property
    def lambda_u(self) -> float:
        """Modulus of the expanding eigenvalue of the fiber matrix."""
        (a, b), (c, d) = self.matrix
        tr, det = a + d, a * d - b * c
        root = math.sqrt(tr * tr - 4 * det)
        return max(abs((tr + root) / 2), abs((tr - root) / 2))

    @cached_property
    def fiber_unstable(self) -> np.ndarray:
        """Unit expanding eigenvector of ``A`` with nonnegative first entry."""
        w, v = np.linalg.eig(self.A)
        k = int(np.argmax(np.abs(w)))
        e = np.real(v[:, k])
        e = e / np.linalg.norm(e)
        return -e if e[0] < 0 else e

    @cached_property
    def unstable_eigendirection(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[:2] = self.fiber_unstable
        return e

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "matrix": [list(r) for r in self.matrix],
            "rotation_angle": self.rotation_angle,
            "perturbation_amplitude": self.perturbation_amplitude,
            "perturbation_shape": list(self.perturbation_shape),
        }


def check_points(system: SystemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (system.dim,):
        raise ValueError(
            f"point dimension {x.shape[-1] if x.ndim else 0} does not match system dimension {system.dim}"
        )
    return x


def _shape_field(system, xy):
    s1, s2 = system.perturbation_shape
    g = np.empty_like(xy)
    g[..., 0] = s1 * np.sin(2 * np.pi * xy[..., 0])
    g[..., 1] = s2 * np.sin(2 * np.pi * xy[..., 1])
    return g


def _shape_jacobian_diag(system, xy):
    s1, s2 = system.perturbation_shape
    return np.stack(
        [
            2 * np.pi * s1 * np.cos(2 * np.pi * xy[..., 0]),
            2 * np.pi * s2 * np.cos(2 * np.pi * xy[..., 1]),
        ],
        axis=-1,
    )


def lift_apply(system: SystemSpec, p) -> np.ndarray:
    """The lifted map on R^dim (no reduction mod 1)."""
    p = check_points(system, p)
    out = np.empty_like(p)
    xy = p[..., :2]
    out[..., :2] = xy @ system.A.T
    if system.perturbation_amplitude:
        out[..., :2] += system.perturbation_amplitude * _shape_field(system, xy)
    if system.dim == 3:
        out[..., 2] = p[..., 2] + system.rotation_angle
    return out


def apply(system: SystemSpec, x) -> np.ndarray:
    """Evaluate ``f(x)`` with coordinates reduced to [0, 1)."""
    return wrap(lift_apply(system, x))


def lift_inverse(system: SystemSpec, q) -> np.ndarray:
    """A lift preimage of ``q`` under :func:`lift_apply`."""
    q = check_points(system, q)
    out = np.empty_like(q)
    y = q[..., :2]
    x = y @ system.A_inv.T
    eps = system.perturbation_amplitude
    if eps:
        for _ in range(system.inverse_max_iter):
            x_new = (y - eps * _shape_field(system, x)) @ system.A_inv.T
            step = np.max(np.abs(x_new - x)) if x.size else 0.0
            x = x_new
            if step < system.inverse_tol:
                break
        else:
            raise InverseError(
                f"inverse did not converge in {system.inverse_max_iter} iterations (last step {step:.3e})"
            )
    out[..., :2] = x
    if system.dim == 3:
        out[..., 2] = q[..., 2] - system.rotation_angle
    return out


def inverse(system: SystemSpec, y) -> np.ndarray:
    """Evaluate ``f^{-1}(y)`` with coordinates reduced to [0, 1)."""
    return wrap(lift_inverse(system, y))


def derivative(system: SystemSpec, x) -> np.ndarray:
    """Jacobian of the lifted map, shape ``x.shape + (dim,)``."""
    x = check_points(system, x)
    dim = system.dim
    jac = np.zeros(x.shape[:-1] + (dim, dim))
    jac[..., :2, :2] = system.A
    if system.perturbation_amplitude:
        dg = system.perturbation_amplitude * _shape_jacobian_diag(system, x[..., :2])
        jac[..., 0, 0] += dg[..., 0]
        jac[..., 1, 1] += dg[..., 1]
    if dim == 3:
        jac[..., 2, 2] = 1.0
    return jac


def push_vectors(system: SystemSpec, x, v) -> np.ndarray:
    """``Df(x) v`` for stacked points and vectors (unnormalized)."""
    return np.einsum("...ij,...j->...i", derivative(system, x), v)


def unstable_direction(system: SystemSpec, x, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    """Unit vector spanning ``E^u(x)``.

    For the perturbed family the seed eigendirection of ``A`` is pushed
    forward along the backward orbit ``f^{-depth}(x), ..., f^{-1}(x)``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = check_points(system, x)
    e = system.unstable_eigendirection
    if system.is_linear:
        return np.broadcast_to(e, x.shape).copy()
    orbit = [x]
    for _ in range(depth):
        orbit.append(inverse(system, orbit[-1]))
    v = np.broadcast_to(e, x.shape).copy()
    for y in reversed(orbit[1:]):
        v = push_vectors(system, y, v)
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v


def expansion_factor(system: SystemSpec, x, direction=None) -> np.ndarray:
    """``||Df(x) v||`` for the unit unstable vector ``v`` at ``x``."""
    x = check_points(system, x)
    if system.is_linear:
        return np.full(x.shape[:-1], system.lambda_u) if x.ndim > 1 else np.float64(system.lambda_u)
    v = unstable_direction(system, x) if direction is None else direction
    return np.linalg.norm(push_vectors(system, x, v), axis=-1)


def advance_inplace(system: SystemSpec, rows: np.ndarray) -> None:
    """Apply ``f`` in place to coordinates stored row-wise, shape ``(dim, N)``.

    Coordinates are reduced with ``x - floor(x)``, which may leave an exact
    1.0; every consumer here is periodic, so that is harmless.
    """
    (a, b), (c, d) = system.matrix
    x, y = rows[0], rows[1]
    nx = a * x + b * y
    ny = c * x + d * y
    eps = system.perturbation_amplitude
    if eps:
        s1, s2 = system.perturbation_shape
        nx += (eps * s1) * np.sin(2 * np.pi * x)
        ny += (eps * s2) * np.sin(2 * np.pi * y)
    rows[0] = nx
    rows[1] = ny
    if system.dim == 3:
        rows[2] += system.rotation_angle
    rows -= np.floor(rows)


def sample_points(system: SystemSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((count, system.dim))
