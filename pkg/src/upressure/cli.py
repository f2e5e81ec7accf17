"""Command-line entry point.

Usage: ``upressure COMMAND CONFIG [--threads N]``.  Each command writes its
artifacts to the configured output directory (overridden by the
``UPRESSURE_OUTPUT_DIR`` environment variable) and prints a JSON summary to
standard output.

Exit codes: 0 on success, 1 for an invalid or unreadable config, 2 when a
convergence flag is raised or a check fails (artifacts are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from upressure import __version__, analysis, measures, oracle, report
from upressure import leaf as leaflib
from upressure import pressure as pr
from upressure.config import ConfigError, RunConfig, load_config, zero_battery
from upressure.potentials import Affine, Constant, Geometric
from upressure.systems import InverseError

COMMANDS = ("estimate", "properties", "varcheck", "derivative", "oracle", "leafdump")
DEFAULT_SCALE_GRID = tuple(np.round(np.arange(0, 2.0001, 0.25), 2))


class Run:
    """Output bookkeeping shared by the commands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.meta = {"config_hash": cfg.hash, "version": __version__}
        self.artifacts = []
        cfg.output_dir.mkdir(parents=True, exist_ok=True)

    def wants(self, fmt):
        return fmt in self.cfg.formats

    def path(self, name):
        p = self.cfg.output_dir / name
        self.artifacts.append(str(p))
        return p

    def csv(self, name, header, rows):
        if self.wants("csv"):
            report.write_csv(self.path(name), header, rows, self.meta)

    def json(self, name, payload):
        if self.wants("json"):
            report.write_json(self.path(name), {**self.meta, **payload})

    def summary(self, command, payload):
        return {"command": command, **self.meta, **payload, "artifacts": self.artifacts}


def _safe(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_estimate(cfg: RunConfig, run: Run, threads: int):
    pots = cfg.potentials_or(zero_battery())
    ests = dict(zip(pots, pr.estimate_pressure_many(cfg.system, pots.values(), cfg.params, threads)))
    results = {}
    for name, est in ests.items():
        run.csv(f"estimate_{_safe(name)}.csv", report.GRID_HEADER, est.rows())
        results[name] = est.summary()
    run.json("estimate.json", {"results": results})
    if run.wants("png"):
        report.growth_figure(ests, run.path("growth.png"), run.meta)
    ok = all(e.converged for e in ests.values())
    return ok, {"results": results}


def cmd_properties(cfg: RunConfig, run: Run, threads: int):
    pots = cfg.potentials_or(analysis.default_battery())
    props = cfg.properties
    res = analysis.property_suite(
        cfg.system,
        pots,
        cfg.params,
        shift=props.get("shift", 0.3),
        transfer=props.get("transfer"),
        alt_seed=props.get("alt_seed", cfg.seed + 1),
        threads=threads,
    )
    run.json("properties.json", res)
    rows = []
    for item, v in res["items"].items():
        for c in v["checks"]:
            rows.append((c["name"], item, c["slack"], c["tolerance"], int(c["passed"])))
    run.csv("properties.csv", ("check", "item", "slack", "tolerance", "passed"), rows)
    converged = all(e["converged"] for e in res["estimates"].values())
    items = {str(i): v["passed"] for i, v in res["items"].items()}
    return res["passed"] and converged, {"passed": res["passed"], "items": items, "converged": converged}


def cmd_varcheck(cfg: RunConfig, run: Run, threads: int):
    m = cfg.measure
    tol = m.get("tolerance", 0.06)
    pots = cfg.potentials_or(analysis.default_battery())
    grid = tuple(m.get("t_grid", DEFAULT_SCALE_GRID))
    scaled = [Affine(Constant(0.0), Geometric(), t) for t in grid]
    keys = list(dict.fromkeys(list(pots.values()) + scaled))
    ests = dict(zip(keys, pr.estimate_pressure_many(cfg.system, keys, cfg.params, threads)))

    srb = measures.empirical_srb(cfg.system, m.get("orbit_length", measures.DEFAULT_ORBIT_LENGTH),
                                 m.get("burn_in", measures.DEFAULT_BURN_IN), cfg.seed)
    orbits = measures.periodic_orbits(cfg.system, m.get("max_period", 6))
    masses = [measures.point_mass(cfg.system, o, orbit_length=measures.MIN_ORBIT_LENGTH) for o in orbits]

    rows, gaps = [], {}
    for name, phi in pots.items():
        est = ests[phi]
        gap = measures.variational_gap(cfg.system, phi, srb, est)
        gaps[name] = gap
        rows.append((name, est.value, est.spread, srb.integrate(phi), gap))
    # u-equilibrium is forced for constants and phi^u: the SRB measure must attain the pressure
    forced = {n: g for n, g in gaps.items() if pots[n].constant_value(cfg.system) is not None or pots[n] == Geometric()}
    dominates = [measures.pressure_dominates(cfg.system, mu, pots.values(), [ests[p] for p in pots.values()], tol)
                 for mu in [srb] + masses]
    scale = measures.geometric_scale_probe(cfg.system, srb, grid, [ests[p] for p in scaled], tol)
    checks = {
        "gap_nonnegative": all(g >= -tol for g in gaps.values()),
        "gap_zero_when_forced": all(abs(g) <= tol for g in forced.values()),
        "dominates": all(d["passed"] for d in dominates),
        "scale_minimum_at_one": scale["attained_near_one"] and scale["matches_entropy"],
    }
    payload = {
        "gaps": gaps,
        "forced": sorted(forced),
        "srb": srb.report(pots),
        "point_masses": [mu.report() for mu in masses],
        "dominates": dominates,
        "scale_probe": scale,
        "checks": checks,
        "tolerance": tol,
    }
    run.json("varcheck.json", payload)
    run.csv("varcheck.csv", ("potential", "P_value", "spread", "srb_integral", "gap"), rows)
    if run.wants("png"):
        report.scale_figure(scale, run.path("scale.png"), run.meta)
    converged = all(e.converged for e in ests.values())
    summary = {"gaps": gaps, "checks": checks, "converged": converged, "hu": srb.hu}
    return all(checks.values()) and converged, summary


def cmd_derivative(cfg: RunConfig, run: Run, threads: int):
    d = cfg.derivative
    if d is None:
        raise ConfigError(cfg.source, None, "the derivative command needs a 'derivative' block")
    mu = None
    if d["equilibrium"]:
        m = cfg.measure
        mu = measures.empirical_srb(cfg.system, m.get("orbit_length", measures.DEFAULT_ORBIT_LENGTH),
                                    m.get("burn_in", measures.DEFAULT_BURN_IN), cfg.seed)
    probe = analysis.derivative_probe(cfg.system, d["base"], d["direction"], d["t_grid"], cfg.params, mu, threads)
    run.csv("derivative.csv", ("t", "P_value", "spread"), probe.rows())
    summary = probe.summary()
    run.json("derivative.json", summary)
    if run.wants("png"):
        report.derivative_figure(probe, run.path("derivative.png"), run.meta)
    ok = probe.convex_ok and probe.d_minus <= probe.d_plus + 2 * probe.tolerance
    return ok, summary


def cmd_oracle(cfg: RunConfig, run: Run, threads: int):
    if cfg.sft is None:
        raise ConfigError(cfg.source, None, "the oracle command needs an 'oracle' block")
    value = oracle.sft_pressure(cfg.sft)
    payload = {
        "matrix": [list(r) for r in cfg.sft.transition],
        "potential": list(cfg.sft.site_potential),
        "pressure": value,
    }
    run.json("oracle.json", payload)
    return True, payload


def cmd_leafdump(cfg: RunConfig, run: Run, threads: int):
    opts = cfg.leafdump
    x = np.array(opts.get("point", cfg.params.base_points[0]), dtype=float)
    delta = opts.get("delta", cfg.params.delta)
    leaf = leaflib.trace_leaf(cfg.system, x, delta, cfg.params.resolution)
    d, du = leaflib.ambient_ratio(leaf, opts.get("pairs", 2000), cfg.seed)
    ratio = du / d
    n = opts.get("n", 5)
    s1, s2 = -0.5 * delta, 0.5 * delta
    dun = leaflib.dun_distance(cfg.system, leaf, s1, s2, n)
    payload = {
        "base": x.tolist(),
        "delta": delta,
        "samples": int(len(leaf.s)),
        "straight": leaf.straight,
        "ratio_min": float(ratio.min()),
        "ratio_max": float(ratio.max()),
        "dun": {"n": n, "sigma": s2 - s1, "value": dun},
    }
    if cfg.system.is_linear:
        payload["dun"]["expected"] = (s2 - s1) * cfg.system.lambda_u ** (n - 1)
    cols = ("s", "x", "y", "theta")[: 1 + cfg.system.dim]
    run.csv("leaf.csv", cols, ((s, *p) for s, p in zip(leaf.s, leaf.points)))
    run.json("leafdump.json", payload)
    if run.wants("svg"):
        report.leaf_figure(leaf, run.path("leaf.svg"), run.meta)
    return bool(ratio.min() >= 1 - 1e-9), payload


HANDLERS = {
    "estimate": cmd_estimate,
    "properties": cmd_properties,
    "varcheck": cmd_varcheck,
    "derivative": cmd_derivative,
    "oracle": cmd_oracle,
    "leafdump": cmd_leafdump,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_parser():
    ap = argparse.ArgumentParser(prog="upressure", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="path to a JSON run configuration")
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads (default 1)")
    ap.add_argument("--version", action="version", version=f"upressure {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, env=dict(os.environ))
        run = Run(cfg)
        ok, payload = HANDLERS[args.command](cfg, run, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InverseError, leaflib.LeafError, oracle.PerronConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_jsonable(run.summary(args.command, payload)), indent=2, sort_keys=True))
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
