"""JSON run configuration: schema validation, object construction and hashing.

Every module-level precondition is checked while the config is loaded, so a
bad value is reported against its line in the file before any computation
starts.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from upressure import oracle
from upressure import pressure as pr
from upressure.potentials import Constant, Potential, from_dict
from upressure.systems import SystemSpec

OUTPUT_ENV = "UPRESSURE_OUTPUT_DIR"
DEFAULT_FORMATS = ("csv", "json", "png", "svg")


class ConfigError(Exception):
    def __init__(self, source: str, line: int | None, message: str):
        self.source, self.line, self.message = source, line, message
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


def load_schema() -> dict:
    text = resources.files("upressure").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def locate(text: str, path) -> int:
    """Best-effort line number of the value at ``path`` (a sequence of keys and indices).

    Falls back to line 1 for errors about the document as a whole.
    """
    pos, line = 0, 1
    for key in path:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"' + re.escape(key) + r'"\s*:').search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


@dataclass
class RunConfig:
    raw: dict
    source: str
    hash: str
    seed: int
    system: SystemSpec
    params: pr.SeparationParams
    potentials: dict | None
    measure: dict = field(default_factory=dict)
    properties: dict = field(default_factory=dict)
    derivative: dict | None = None
    sft: oracle.SftSpec | None = None
    leafdump: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    formats: tuple = DEFAULT_FORMATS

    def potentials_or(self, default: dict) -> dict:
        return self.potentials if self.potentials is not None else default


def _build(raw: dict, text: str, source: str, env: dict) -> RunConfig:
    def fail(path, exc):
        raise ConfigError(source, locate(text, path), str(exc)) from exc

    seed = int(raw.get("seed", 0))
    sysd = dict(raw["system"])
    try:
        system = SystemSpec(
            family=sysd["family"],
            matrix=tuple(map(tuple, sysd.get("matrix", ((2, 1), (1, 1))))),
            rotation_angle=sysd.get("rotation_angle", 0.0),
            perturbation_amplitude=sysd.get("perturbation_amplitude", 0.0),
            **({"perturbation_shape": tuple(sysd["perturbation_shape"])} if "perturbation_shape" in sysd else {}),
        )
    except ValueError as exc:
        fail(["system"], exc)

    est = dict(raw.get("estimator", {}))
    count = est.pop("base_points", 5)
    if "eps_list" in est:
        est["eps_list"] = tuple(est["eps_list"])
    try:
        params = pr.make_params(system, count, seed, **est)
    except ValueError as exc:
        fail(["estimator"], exc)

    potentials = None
    if "potentials" in raw:
        potentials = {}
        for name, d in raw["potentials"].items():
            try:
                potentials[name] = _check_potential(system, from_dict(d))
            except ValueError as exc:
                fail(["potentials", name], exc)

    derivative = None
    if "derivative" in raw:
        d = raw["derivative"]
        try:
            derivative = {
                "base": _check_potential(system, from_dict(d["base"])),
                "direction": _check_potential(system, from_dict(d["direction"])),
                "t_grid": tuple(d.get("t_grid", (-0.1, -0.05, 0.0, 0.05, 0.1))),
                "equilibrium": bool(d.get("equilibrium", False)),
            }
            _check_grid(derivative["t_grid"])
        except ValueError as exc:
            fail(["derivative"], exc)

    sft = None
    if "oracle" in raw:
        o = raw["oracle"]
        k = len(o["transition"])
        try:
            sft = oracle.SftSpec(o["transition"], o.get("site_potential", [0.0] * k))
        except ValueError as exc:
            fail(["oracle"], exc)

    props = dict(raw.get("properties", {}))
    if "transfer" in props:
        try:
            props["transfer"] = _check_potential(system, from_dict(props["transfer"]))
        except ValueError as exc:
            fail(["properties", "transfer"], exc)

    leafdump = dict(raw.get("leafdump", {}))
    if "point" in leafdump and len(leafdump["point"]) != system.dim:
        fail(["leafdump", "point"], ValueError(f"point must have {system.dim} coordinates"))
    if "delta" in leafdump and not 0 < leafdump["delta"] < 0.5:
        fail(["leafdump", "delta"], ValueError("delta must lie in (0, 0.5)"))

    out = raw.get("output", {})
    directory = env.get(OUTPUT_ENV) or out.get("directory", "out")
    return RunConfig(
        raw=raw,
        source=source,
        hash=config_hash(raw),
        seed=seed,
        system=system,
        params=params,
        potentials=potentials,
        measure=dict(raw.get("measure", {})),
        properties=props,
        derivative=derivative,
        sft=sft,
        leafdump=leafdump,
        output_dir=Path(directory),
        formats=tuple(out.get("formats", DEFAULT_FORMATS)),
    )


def _check_potential(system: SystemSpec, p: Potential) -> Potential:
    # evaluating at one point surfaces dimension mismatches early
    p.evaluate(system, np.zeros((1, system.dim)))
    return p


def _check_grid(t):
    vals = sorted(t)
    if 0.0 not in vals or sorted(-v for v in vals) != vals:
        raise ValueError("t_grid must be symmetric and contain 0")


def parse_config(text: str, source: str = "<config>", env: dict | None = None) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(source, exc.lineno, exc.msg) from exc
    validator = jsonschema.Draft202012Validator(load_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        path = list(err.absolute_path)
        where = "/".join(map(str, path)) or "<root>"
        raise ConfigError(source, locate(text, path), f"{where}: {err.message}")
    return _build(raw, text, source, {} if env is None else env)


def load_config(path, env: dict | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), None, f"cannot read config: {exc.strerror}") from exc
    return parse_config(text, str(p), env)


def zero_battery() -> dict:
    return {"zero": Constant(0.0)}
