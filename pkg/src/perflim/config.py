"""Run configuration: a single versioned JSON document, unknown fields rejected."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core_algebra import Polynomial, RationalMatrix
from .errors import ConfigError
from .perf_limits import ChannelModel

VERSION = 1
PARAMETERS = ("k", "epsilon", "f", "h", "sigma", "gamma")
PLANT_KINDS = ("integrating_nmp", "tf", "tf_matrix", "ss")


def _fail(path: str, msg: str, text: Optional[str] = None):
    line = _line_of(text, path.split(".")[-1].split("[")[0]) if text else None
    where = f"line {line}, " if line else ""
    raise ConfigError(f"{where}field '{path}': {msg}")


def _line_of(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for i, ln in enumerate(text.splitlines(), 1):
        if needle in ln:
            return i
    return None


def _check_keys(d, allowed, path, text, required=()):
    if not isinstance(d, dict):
        _fail(path or "<root>", "expected an object", text)
    for k in d:
        if k not in allowed:
            _fail(f"{path}.{k}" if path else k, "unknown field", text)
    for k in required:
        if k not in d:
            _fail(f"{path}.{k}" if path else k, "missing required field", text)


def _number(v, path, text, lo=None, hi=None, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(path, f"expected a finite number, got {v!r}", text)
    if positive and v <= 0:
        _fail(path, "must be positive", text)
    if lo is not None and v < lo or hi is not None and v > hi:
        _fail(path, f"must lie in [{lo}, {hi}]", text)
    return float(v)


def _numbers(v, path, text, **kw):
    if isinstance(v, list):
        if not v:
            _fail(path, "empty list", text)
        return [_number(x, f"{path}[{i}]", text, **kw) for i, x in enumerate(v)]
    return _number(v, path, text, **kw)


@dataclass(frozen=True)
class ChannelSpec:
    """First-order low-pass F = f/(s+f), H = h/(s+h); null means unit gain."""

    f: Optional[float] = None
    h: Optional[float] = None
    sigma: object = 1.0  # scalar or per-channel list
    gamma: object = 0.0


@dataclass(frozen=True)
class MonteCarloSpec:
    runs: int = 200
    horizon: float = 200.0
    step: float = 1e-3


@dataclass(frozen=True)
class OracleSpec:
    enable: bool = False
    m: int = 20
    lam: float = 1.0
    monte_carlo: Optional[MonteCarloSpec] = None


@dataclass(frozen=True)
class RunConfig:
    version: int
    name: str
    plant: dict
    channel: ChannelSpec
    epsilon: float
    sweeps: tuple  # tuple of tuples ((param, (grid...)), ...); each block is a cartesian product
    oracle: OracleSpec = field(default_factory=OracleSpec)
    pole: float = -1.0
    seed: int = 0
    plot_script: bool = False

    # -- points --------------------------------------------------------------
    def base_point(self) -> dict:
        pt = {"k": self.plant.get("k"), "epsilon": self.epsilon, "f": self.channel.f, "h": self.channel.h,
              "sigma": self.channel.sigma, "gamma": self.channel.gamma}
        return pt

    def points(self) -> list:
        """Sweep points in deterministic order: blocks in sequence, later parameters varying fastest."""
        out = []
        for block in self.sweeps:
            names = [n for n, _ in block]
            grids = [g for _, g in block]
            for combo in np.ndindex(*[len(g) for g in grids]):
                pt = self.base_point()
                for n, g, i in zip(names, grids, combo):
                    pt[n] = g[i]
                out.append(pt)
        return out

    def swept(self) -> list:
        seen = []
        for block in self.sweeps:
            for n, _ in block:
                if n not in seen:
                    seen.append(n)
        return seen

    # -- model construction --------------------------------------------------
    def plant_at(self, point) -> RationalMatrix:
        return build_plant(self.plant, point.get("k"))

    def channel_at(self, point, size: int) -> ChannelModel:
        return ChannelModel.lowpass(point["f"], point["h"], point["sigma"], point["gamma"], size=size)

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "version": self.version,
            "name": self.name,
            "plant": self.plant,
            "channel": asdict(self.channel),
            "epsilon": self.epsilon,
            "sweeps": [{n: list(g) for n, g in block} for block in self.sweeps],
            "oracle": {
                "enable": self.oracle.enable,
                "m": self.oracle.m,
                "lam": self.oracle.lam,
                "monte_carlo": None if self.oracle.monte_carlo is None else asdict(self.oracle.monte_carlo),
            },
            "pole": self.pole,
            "seed": self.seed,
            "plot_script": self.plot_script,
        }
        return json.loads(json.dumps(d))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _desc(coeffs) -> Polynomial:
    """Descending-power coefficient list, as written by hand, to a Polynomial."""
    return Polynomial(np.asarray(coeffs, dtype=float)[::-1])


def build_plant(spec: dict, k=None) -> RationalMatrix:
    kind = spec["kind"]
    if kind == "integrating_nmp":
        k = spec["k"] if k is None else k
        return RationalMatrix.scalar(Polynomial([-k, 1.0]), Polynomial([0.0, 1.0, 1.0]))
    if kind == "tf":
        return RationalMatrix.scalar(_desc(spec["num"]), _desc(spec["den"]))
    if kind == "tf_matrix":
        return RationalMatrix.from_entries(
            [[(_desc(n), _desc(d)) for n, d in zip(nr, dr)] for nr, dr in zip(spec["num"], spec["den"])])
    if kind == "ss":
        return RationalMatrix.from_state_space(spec["A"], spec["B"], spec["C"], spec["D"])
    raise ConfigError(f"field 'plant.kind': unknown kind {kind!r}")


def _parse_plant(d, text) -> dict:
    if not isinstance(d, dict) or "kind" not in d:
        _fail("plant.kind", "missing required field", text)
    kind = d["kind"]
    fields = {"integrating_nmp": ("k",), "tf": ("num", "den"), "tf_matrix": ("num", "den"),
              "ss": ("A", "B", "C", "D")}
    if kind not in fields:
        _fail("plant.kind", f"must be one of {PLANT_KINDS}", text)
    _check_keys(d, ("kind",) + fields[kind], "plant", text, required=fields[kind])
    out = {"kind": kind}
    if kind == "integrating_nmp":
        out["k"] = _number(d["k"], "plant.k", text)
        return out
    for key in fields[kind]:
        try:
            arr = np.asarray(d[key], dtype=float)
        except (TypeError, ValueError):
            _fail(f"plant.{key}", "expected a numeric array", text)
        if not np.all(np.isfinite(arr)):
            _fail(f"plant.{key}", "non-finite entry", text)
        out[key] = arr.tolist()
    try:
        build_plant(out)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - any construction failure is a schema error
        _fail("plant", f"cannot build plant: {exc}", text)
    return out


def _parse_grid(name, g, path, text, plant_kind, channel):
    if name not in PARAMETERS:
        _fail(path, f"unknown sweep parameter (allowed: {', '.join(PARAMETERS)})", text)
    if name == "k" and plant_kind != "integrating_nmp":
        _fail(path, "k can only be swept for the integrating_nmp plant", text)
    if not isinstance(g, list) or len(g) < 1:
        _fail(path, "grid must be a non-empty list", text)
    kw = {"lo": 0.0, "hi": 1.0} if name == "epsilon" else {"positive": True} if name in ("f", "h") else {}
    if name in ("sigma", "gamma"):
        kw = {"lo": 0.0}
    vals = [_number(x, f"{path}[{i}]", text, **kw) for i, x in enumerate(g)]
    dif = np.diff(vals)
    if len(vals) > 1 and not (np.all(dif > 0) or np.all(dif < 0)):
        _fail(path, "grid must be strictly monotone", text)
    return tuple(vals)


def parse_config(data, text: Optional[str] = None) -> RunConfig:
    top = ("version", "name", "plant", "channel", "epsilon", "sweeps", "oracle", "pole", "seed", "plot_script")
    _check_keys(data, top, "", text, required=("version", "plant", "channel", "epsilon", "sweeps"))
    if data["version"] != VERSION:
        _fail("version", f"unsupported version {data['version']!r} (expected {VERSION})", text)
    name = data.get("name", "run")
    if not isinstance(name, str) or not name:
        _fail("name", "expected a non-empty string", text)
    plant = _parse_plant(data["plant"], text)
    ch = data["channel"]
    _check_keys(ch, ("f", "h", "sigma", "gamma"), "channel", text)
    f = None if ch.get("f") is None else _number(ch["f"], "channel.f", text, positive=True)
    h = None if ch.get("h") is None else _number(ch["h"], "channel.h", text, positive=True)
    sigma = _numbers(ch.get("sigma", 1.0), "channel.sigma", text, lo=0.0)
    gamma = _numbers(ch.get("gamma", 0.0), "channel.gamma", text, lo=0.0)
    channel = ChannelSpec(f, h, sigma, gamma)
    eps = _number(data["epsilon"], "epsilon", text, lo=0.0, hi=1.0)
    sw = data["sweeps"]
    if not isinstance(sw, list) or not sw:
        _fail("sweeps", "expected a non-empty list of sweep blocks", text)
    blocks = []
    for bi, block in enumerate(sw):
        if not isinstance(block, dict) or not block:
            _fail(f"sweeps[{bi}]", "expected a non-empty object mapping parameter to grid", text)
        blocks.append(tuple((n, _parse_grid(n, g, f"sweeps[{bi}].{n}", text, plant["kind"], channel))
                            for n, g in block.items()))
    for bi, block in enumerate(blocks):
        for n, _ in block:
            if n in ("f", "h") and getattr(channel, n) is None:
                _fail(f"sweeps[{bi}].{n}", f"channel.{n} must be set to sweep it", text)
    oracle = OracleSpec()
    if "oracle" in data:
        od = data["oracle"]
        _check_keys(od, ("enable", "m", "lam", "monte_carlo"), "oracle", text)
        enable = od.get("enable", False)
        if not isinstance(enable, bool):
            _fail("oracle.enable", "expected true or false", text)
        m = od.get("m", 20)
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            _fail("oracle.m", "expected an integer >= 1", text)
        lam = _number(od.get("lam", 1.0), "oracle.lam", text, positive=True)
        mc = None
        if od.get("monte_carlo") is not None:
            md = od["monte_carlo"]
            _check_keys(md, ("runs", "horizon", "step"), "oracle.monte_carlo", text)
            runs = md.get("runs", 200)
            if isinstance(runs, bool) or not isinstance(runs, int) or runs < 2:
                _fail("oracle.monte_carlo.runs", "expected an integer >= 2", text)
            mc = MonteCarloSpec(runs, _number(md.get("horizon", 200.0), "oracle.monte_carlo.horizon", text,
                                              positive=True),
                                _number(md.get("step", 1e-3), "oracle.monte_carlo.step", text, positive=True))
        oracle = OracleSpec(enable, m, lam, mc)
    pole = _number(data.get("pole", -1.0), "pole", text)
    if pole >= 0:
        _fail("pole", "coprime factor pole must be negative", text)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail("seed", "expected a nonnegative integer", text)
    plot = data.get("plot_script", False)
    if not isinstance(plot, bool):
        _fail("plot_script", "expected true or false", text)
    return RunConfig(VERSION, name, plant, channel, eps, tuple(blocks), oracle, pole, seed, plot)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: invalid JSON: {exc.msg}") from exc
    return parse_config(data, text)
