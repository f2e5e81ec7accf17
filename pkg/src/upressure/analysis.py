"""Property checks for the pressure functional and finite-difference derivative probes.

Every comparison evaluates all potentials in one batch, so they share leaves,
base points and point sets.  Identities that are algebraic at the level of
Birkhoff sums (constant shifts, coboundaries, sign flips of the direction)
then hold to rounding error, while the inequalities are checked against a
tolerance of twice the reported base-point spread.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from upressure import pressure as pr
from upressure.potentials import Abs, Affine, Coboundary, Constant, Geometric, Potential, sampled_sup, trig
from upressure.systems import SystemSpec

ROUNDING_FLOOR = 1e-9
EXACT_TOL = 1e-12


def default_battery() -> dict:
    """Six potentials used when no battery is configured."""
    return {
        "zero": Constant(0.0),
        "const_0.3": Constant(0.3),
        "cos_x": trig((0.5, (1, 0), "cos")),
        "mixed": trig((0.2, (0, 1), "sin"), (0.1, (1, 1), "cos")),
        "geometric": Geometric(),
        "cos_x2y": trig((0.25, (1, 2), "cos"), (-0.15, (1, 0), "sin")),
    }


def _scaled(phi, c):
    return Affine(Constant(0.0), phi, c)


def _tolerance(*ests) -> float:
    return 2.0 * max(e.spread for e in ests) + ROUNDING_FLOOR


def _sample(system, potential, count=1000, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.random((count, system.dim))
    return potential.evaluate(system, pts)


@dataclass
class Check:
    name: str
    item: int
    slack: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tolerance)

    def to_dict(self):
        return {
            "name": self.name,
            "item": self.item,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.detail,
        }


def property_suite(
    system: SystemSpec,
    potentials=None,
    params: pr.SeparationParams | None = None,
    shift: float = 0.3,
    transfer: Potential | None = None,
    alt_seed: int = 1,
    threads: int = 1,
    reference_entropy: float | None = None,
) -> dict:
    """Check the nine basic properties of ``P^u`` on a battery of potentials.

    Returns a report with one entry per property item (1..9), each holding
    its individual checks and an overall ``passed`` flag.
    """
    if potentials is None:
        potentials = default_battery()
    if not isinstance(potentials, dict):
        potentials = {f"phi{i}": p for i, p in enumerate(potentials)}
    if params is None:
        params = pr.make_params(system, n_max=10)
    if transfer is None:
        transfer = trig((0.2, (1, 0), "sin"))
    names = list(potentials)
    battery = [potentials[k] for k in names]

    jobs: dict = {}

    def want(p):
        jobs.setdefault(p, None)
        return p

    zero = want(Constant(0.0))
    for phi in battery:
        want(phi)
        want(phi + shift)
        want(Abs(phi))
        want(_scaled(phi, 2.0))
        want(_scaled(phi, 0.5))
    for phi, psi in itertools.combinations(battery, 2):
        want(Affine(_scaled(phi, 0.5), psi, 0.5))
        want(phi + psi)
    bump = Abs(trig((0.5, (1, 0), "cos")))
    for phi in battery:
        want(Affine(phi, bump, 1.0))
    cob_bases = [zero] + [p for p in battery if p.constant_value(system) is None][:1]
    for phi in cob_bases:
        want(Coboundary(phi, transfer))

    keys = list(jobs)
    ests = dict(zip(keys, pr.estimate_pressure_many(system, keys, params, threads)))
    P = {k: e.value for k, e in ests.items()}

    report = {i: [] for i in range(1, 10)}
    sup = lambda p: sampled_sup(p, system, 10_000, seed=0)  # noqa: E731

    # (1) zero potential against an independent entropy value
    if reference_entropy is None:
        if system.is_linear:
            reference_entropy = math.log(system.lambda_u)
        else:
            reference_entropy = pr.volume_growth_rate(system, params)
    tol1 = max(_tolerance(ests[zero]), 0.05 * reference_entropy)
    report[1].append(
        Check("P(0) = h_top^u", 1, -abs(P[zero] - reference_entropy), tol1,
              {"estimate": P[zero], "reference": reference_entropy})
    )

    # (2) constant shift: exact on shared sets, statistical across seeds
    alt = replace(params, base_points=pr.default_base_points(system, len(params.base_points), alt_seed))
    alt_keys = [zero, zero + shift] + [Coboundary(phi, transfer) for phi in cob_bases] + cob_bases
    alt_keys = list(dict.fromkeys(alt_keys))
    alt_ests = dict(zip(alt_keys, pr.estimate_pressure_many(system, alt_keys, alt, threads)))
    for name, phi in zip(names, battery):
        a, b = ests[phi], ests[phi + shift]
        diff = b.value - a.value
        grid = np.max(np.abs((b.log_sep - a.log_sep) - shift * params.n_values[None, None, :, None]))
        report[2].append(
            Check(f"shift[{name}]", 2, -abs(diff - shift), EXACT_TOL, {"difference": diff, "grid_max_error": float(grid)})
        )
    diff = alt_ests[zero + shift].value - ests[zero].value
    tol = _tolerance(alt_ests[zero + shift], ests[zero])
    report[2].append(Check("shift[independent seed]", 2, -abs(diff - shift), tol, {"difference": diff}))

    # (3) monotonicity and the sup/inf bracket
    h = P[zero]
    ordered = []
    for (na, a), (nb, b) in itertools.permutations(zip(names, battery), 2):
        if np.all(_sample(system, a) <= _sample(system, b)):
            ordered.append((f"{na}<={nb}", a, b))
    for name, phi in zip(names, battery):
        ordered.append((f"{name}<={name}+|bump|", phi, Affine(phi, bump, 1.0)))
    for label, a, b in ordered:
        report[3].append(Check(f"monotone[{label}]", 3, P[b] - P[a], _tolerance(ests[a], ests[b])))
    for name, phi in zip(names, battery):
        vals = _sample(system, phi, 10_000)
        tol = _tolerance(ests[phi], ests[zero])
        lo, hi = h + float(vals.min()), h + float(vals.max())
        report[3].append(Check(f"bracket[{name}]", 3, min(P[phi] - lo, hi - P[phi]), tol))

    # (4) Lipschitz, (5) convexity, (7) subadditivity over all pairs
    for (na, a), (nb, b) in itertools.combinations(zip(names, battery), 2):
        norm = sup(Affine(a, b, -1.0))
        tol = _tolerance(ests[a], ests[b])
        report[4].append(Check(f"lipschitz[{na},{nb}]", 4, norm - abs(P[a] - P[b]), tol, {"sup_norm": norm}))
        mid = Affine(_scaled(a, 0.5), b, 0.5)
        report[5].append(
            Check(f"convex[{na},{nb}]", 5, 0.5 * (P[a] + P[b]) - P[mid], _tolerance(ests[a], ests[b], ests[mid]))
        )
        s = a + b
        report[7].append(
            Check(f"subadditive[{na},{nb}]", 7, P[a] + P[b] - P[s], _tolerance(ests[a], ests[b], ests[s]))
        )

    # (6) coboundary invariance
    # an exact sup-norm bound where one is available; sampling underestimates it
    bound = 2.0 * (transfer.sup_norm_bound() if hasattr(transfer, "sup_norm_bound") else sup(transfer))
    for phi in cob_bases:
        cob = Coboundary(phi, transfer)
        a, b = ests[phi], ests[cob]
        grid = float(np.max(np.abs(b.log_sep - a.log_sep)))
        report[6].append(Check(f"coboundary-grid[{_label(names, battery, phi)}]", 6, bound - grid, ROUNDING_FLOOR,
                               {"max_log_sum_change": grid, "bound": bound}))
        allowed = bound / params.n_max + max(a.spread, b.spread)
        report[6].append(Check(f"coboundary[{_label(names, battery, phi)}]", 6,
                               allowed - abs(b.value - a.value), ROUNDING_FLOOR,
                               {"difference": b.value - a.value, "allowed": allowed}))
        a2, b2 = alt_ests[phi], alt_ests[cob]
        allowed2 = bound / params.n_max + max(a.spread, b2.spread)
        report[6].append(Check(f"coboundary[independent seed,{_label(names, battery, phi)}]", 6,
                               allowed2 - abs(b2.value - a.value), ROUNDING_FLOOR,
                               {"difference": b2.value - a.value, "allowed": allowed2}))

    # (8) scaling, (9) absolute value
    for name, phi in zip(names, battery):
        two, half = _scaled(phi, 2.0), _scaled(phi, 0.5)
        report[8].append(Check(f"scale2[{name}]", 8, 2 * P[phi] - P[two], _tolerance(ests[phi], ests[two])))
        report[8].append(Check(f"scale0.5[{name}]", 8, P[half] - 0.5 * P[phi], _tolerance(ests[phi], ests[half])))
        absphi = Abs(phi)
        report[9].append(Check(f"abs[{name}]", 9, P[absphi] - abs(P[phi]), _tolerance(ests[phi], ests[absphi])))

    items = {}
    for i, checks in report.items():
        items[i] = {"passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}
    return {
        "passed": all(v["passed"] for v in items.values()),
        "items": items,
        "estimates": {_label(names, battery, k): v.summary() for k, v in ests.items() if k in battery},
    }


def _label(names, battery, phi):
    for n, p in zip(names, battery):
        if p == phi:
            return n
    return repr(phi)


# ----------------------------------------------------------------------
# derivative probes


@dataclass
class DerivativeProbe:
    base: Potential
    direction: Potential
    t_grid: np.ndarray
    values: np.ndarray
    spreads: np.ndarray
    d_plus: float
    d_minus: float
    tolerance: float
    gateaux_flag: bool
    convex_ok: bool
    equilibrium_match: float | None = None

    def rows(self):
        for t, v, s in zip(self.t_grid, self.values, self.spreads):
            yield float(t), float(v), float(s)

    def summary(self) -> dict:
        return {
            "d_plus": self.d_plus,
            "d_minus": self.d_minus,
            "tolerance": self.tolerance,
            "gateaux_flag": self.gateaux_flag,
            "convex": self.convex_ok,
            "equilibrium_match": self.equilibrium_match,
        }


def derivative_probe(
    system: SystemSpec,
    phi: Potential,
    psi: Potential,
    t_grid,
    params: pr.SeparationParams,
    equilibrium=None,
    threads: int = 1,
) -> DerivativeProbe:
    """One-sided difference quotients of ``t -> P^u(phi + t psi)`` at 0.

    ``equilibrium``, if given, is a measure whose integral of ``psi`` is
    compared with ``d_plus``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ValueError("t_grid needs at least three values")
    if np.any(np.abs(t) > 1):
        raise ValueError("t_grid must lie in [-1, 1]")
    t = np.sort(t)
    if not np.any(t == 0.0) or not np.array_equal(np.sort(-t), t):
        raise ValueError("t_grid must be symmetric and contain 0")
    pots = [Affine(phi, psi, float(ti)) for ti in t]
    ests = pr.estimate_pressure_many(system, pots, params, threads)
    values = np.array([e.value for e in ests])
    spreads = np.array([e.spread for e in ests])
    i0 = int(np.nonzero(t == 0.0)[0][0])
    h = t[i0 + 1]
    d_plus = (values[i0 + 1] - values[i0]) / h
    d_minus = (values[i0] - values[i0 - 1]) / h
    tol = 2.0 * float(spreads.max()) + ROUNDING_FLOOR
    convex = True
    for i in range(1, t.size - 1):
        w = (t[i] - t[i - 1]) / (t[i + 1] - t[i - 1])
        chord = (1 - w) * values[i - 1] + w * values[i + 1]
        if values[i] > chord + tol:
            convex = False
    match = None
    if equilibrium is not None:
        match = float(abs(d_plus - equilibrium.integrate(psi)))
    return DerivativeProbe(
        phi, psi, t, values, spreads, float(d_plus), float(d_minus), tol,
        bool(abs(d_plus - d_minus) <= 2 * tol), convex, match,
    )
