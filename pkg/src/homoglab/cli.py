"""Command line orchestration: configs, seeded runs, run ledger, summaries.

Usage::

    homog-lab run CONFIG [--seed N] [--workers N] [--out DIR]
    homog-lab validate CONFIG
    homog-lab emit-defaults KIND

Exit codes: 0 pass, 1 assertion failure, 2 configuration error,
3 numerical anomaly.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import math
import multiprocessing
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from . import __version__
from .env import EnvironmentSpec, Mode, ReactionSpec, validate_hypotheses
from .errors import (CFLViolation, ConfigError, HypothesisViolation, InvalidSpecError,
                     NumericalAnomaly)
from .homog import (RadialProfile, ScaledExperiment, geq_limit_check, monotone_in_eps,
                    pass_fractions, run_sandwich, write_summary)
from .subadd import AdditiveProcess, DeterministicProcess, cell_seed, estimate_limit, \
    validate_process
from .ttime import calibrate_m
from .wulff import Ball, assemble_shape, check_convexity, check_speed_bounds, \
    estimate_speed_table

SCHEMA_VERSION = 1
KINDS = ("validate_env", "speed_table", "wulff_shape", "subadd_synthetic", "sandwich",
         "geq_limit", "full_pipeline")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ANOMALY = 0, 1, 2, 3


# ----------------------------------------------------------------------
# config blocks
# ----------------------------------------------------------------------
@dataclass
class ValidateBlock:
    samples: int = 100
    box_sides: list = field(default_factory=lambda: [4, 16, 64])


@dataclass
class SpeedTableBlock:
    K: int = 32
    R: float = 40.0
    samples: int = 8
    h: float | None = None
    estimator: str = "secant"


@dataclass
class CalibrationBlock:
    enabled: bool = False
    n_seeds: int = 8
    horizon: float | None = None
    safety: float = 1.5


@dataclass
class ConvexityBlock:
    slack_factor: float = 3.0
    n_random: int = 64


@dataclass
class SubaddBlock:
    process: str = "additive"
    low: float = 1.0
    high: float = 2.0
    rate: float = 1.0
    offset: float = 0.0
    n_grid: list = field(default_factory=lambda: [8, 16, 32, 64, 128])
    samples: int = 200
    paired: bool = False
    validate_samples: int = 50


@dataclass
class SandwichBlock:
    eps_list: list = field(default_factory=lambda: [0.25, 0.125, 0.0625, 0.03125])
    delta: float = 0.25
    theta: float = 0.5
    theta_prime: float = 0.5
    times: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    seeds_per_eps: int = 50
    rho: Any = "sqrt"
    shift: str = "alternate"
    shift_bound: float = 1.0
    margin: float = 8.0
    G_center: list = field(default_factory=lambda: [0.0, 0.0])
    G_radius: float = 1.0
    G_polygon: list | None = None
    h: float | None = None
    min_fraction: list = field(default_factory=list)
    require_monotone: bool = True


@dataclass
class GEQLimitBlock:
    eps: float = 0.0625
    t: float = 1.0
    seeds: int = 20
    tol: float = 0.1
    profile: str = "bump"
    center: list = field(default_factory=lambda: [0.0, 0.0])
    radius: float = 1.0
    height: float = 1.0
    rho: Any = "zero"
    shift: str = "alternate"
    shift_bound: float = 1.0
    h: float | None = None
    min_fraction: float = 0.9


BLOCKS = {"validate": ValidateBlock, "speed_table": SpeedTableBlock,
          "calibration": CalibrationBlock, "convexity": ConvexityBlock,
          "subadd": SubaddBlock, "sandwich": SandwichBlock, "geq_limit": GEQLimitBlock}

_USES = {
    "validate_env": ("validate",),
    "speed_table": ("speed_table", "calibration"),
    "wulff_shape": ("speed_table", "calibration", "convexity"),
    "subadd_synthetic": ("subadd",),
    "sandwich": ("speed_table", "sandwich"),
    "geq_limit": ("speed_table", "geq_limit"),
    "full_pipeline": ("validate", "speed_table", "calibration", "convexity", "sandwich",
                      "geq_limit"),
}
_ENV_KINDS = set(KINDS) - {"subadd_synthetic"}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    workers: int = 1
    out: str | None = None
    environment: EnvironmentSpec | None = None
    reaction: ReactionSpec | None = None
    blocks: dict = field(default_factory=dict)

    def block(self, name: str):
        return self.blocks[name]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, "workers": self.workers}
        if self.out is not None:
            out["out"] = self.out
        if self.environment is not None:
            out["environment"] = self.environment.to_dict()
        if self.reaction is not None:
            out["reaction"] = {"form": self.reaction.form.value}
        for name in sorted(self.blocks):
            out[name] = _drop_none(dataclasses.asdict(self.blocks[name]))
        return out

    def config_hash(self) -> str:
        """Hash of everything that determines results except the seed."""
        d = self.to_dict()
        for k in ("seed", "workers", "out"):
            d.pop(k, None)
        blob = json.dumps(d, sort_keys=True, default=_json_default).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    return str(o)


# ----------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------
def _coerce(where: str, name: str, value, default):
    """Light type check against the default value's type."""
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}.{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}.{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}.{name}: expected a string, got {value!r}")
        return value
    if isinstance(default, (list, tuple)):
        if not isinstance(value, list):
            raise ConfigError(f"{where}.{name}: expected a list, got {value!r}")
        return list(value)
    return value


def _build(cls, where: str, raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{where}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"[{where}] unknown key(s): {', '.join(unknown)}")
    base = cls() if cls is not EnvironmentSpec else EnvironmentSpec()
    kw = {}
    for name, value in raw.items():
        default = getattr(base, name)
        if name == "mode":
            kw[name] = value
            continue
        if name == "rho":
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise ConfigError(f"{where}.rho: expected 'sqrt', 'zero' or a number")
            kw[name] = value if isinstance(value, str) else float(value)
            continue
        if name == "mean_flow":
            value = _coerce(where, name, value, [])
            kw[name] = tuple(_coerce(where, name, v, 0.0) for v in value)
            continue
        if default is None:
            if name in ("h", "horizon"):
                default = 0.0
            elif name == "G_polygon":
                default = []
        kw[name] = _coerce(where, name, value, default)
    try:
        return cls(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def _check_ranges(cfg: ExperimentConfig) -> None:
    """Field-precise range checks that do not involve the hypotheses."""
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    need(cfg.workers >= 1, "workers: must be >= 1")
    b = cfg.blocks
    if "speed_table" in b:
        s = b["speed_table"]
        need(s.K >= 8, "speed_table.K: must be >= 8")
        need(s.R > 4, "speed_table.R: must exceed 4")
        need(s.samples >= 2, "speed_table.samples: must be >= 2")
        need(s.estimator in ("secant", "ratio"), "speed_table.estimator: secant or ratio")
        need(s.h is None or s.h > 0, "speed_table.h: must be positive")
    if "calibration" in b:
        need(b["calibration"].n_seeds >= 1, "calibration.n_seeds: must be >= 1")
        need(b["calibration"].safety >= 1, "calibration.safety: must be >= 1")
    if "subadd" in b:
        s = b["subadd"]
        need(s.process in ("additive", "deterministic"), "subadd.process: additive or deterministic")
        need(s.low <= s.high, "subadd.low: must not exceed subadd.high")
        need(len(s.n_grid) >= 2 and all(isinstance(n, int) and n >= 1 for n in s.n_grid)
             and s.n_grid == sorted(set(s.n_grid)), "subadd.n_grid: increasing positive integers")
        need(s.samples >= 2, "subadd.samples: must be >= 2")
    if "sandwich" in b:
        s = b["sandwich"]
        need(0 < s.delta < 1, "sandwich.delta: must lie in (0, 1)")
        need(0 < s.theta <= 1, "sandwich.theta: must lie in (0, 1]")
        need(0 < s.theta_prime < 1, "sandwich.theta_prime: must lie in (0, 1)")
        e = s.eps_list
        need(len(e) >= 1 and all(v > 0 for v in e) and all(y < x for x, y in zip(e, e[1:])),
             "sandwich.eps_list: positive and strictly decreasing")
        need(all(t > 0 for t in s.times), "sandwich.times: must be positive")
        need(s.seeds_per_eps >= 1, "sandwich.seeds_per_eps: must be >= 1")
        need(s.rho in ("sqrt", "zero") or isinstance(s.rho, (int, float)) and s.rho >= 0,
             "sandwich.rho: 'sqrt', 'zero' or a non-negative number")
        need(s.shift in ("alternate", "none"), "sandwich.shift: alternate or none")
        need(s.G_radius > 0, "sandwich.G_radius: must be positive")
        need(not s.min_fraction or len(s.min_fraction) == len(e),
             "sandwich.min_fraction: one entry per eps")
    if "geq_limit" in b:
        s = b["geq_limit"]
        need(s.eps > 0, "geq_limit.eps: must be positive")
        need(s.t > 0, "geq_limit.t: must be positive")
        need(s.seeds >= 1, "geq_limit.seeds: must be >= 1")
        need(s.profile in ("bump", "cone", "const"), "geq_limit.profile: bump, cone or const")
        need(0 <= s.min_fraction <= 1, "geq_limit.min_fraction: must lie in [0, 1]")
    if cfg.kind == "geq_limit":
        need(cfg.environment.mode is Mode.GEQ, "environment.mode: geq_limit needs GEQ")
    if cfg.environment is not None:
        need(cfg.environment.dimension in (1, 2), "environment.dimension: 1 or 2")
        if cfg.kind in ("sandwich", "geq_limit", "wulff_shape", "full_pipeline"):
            need(cfg.environment.dimension == 2,
                 f"environment.dimension: {cfg.kind} needs d = 2")


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    kind = raw.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    if "seed" not in raw:
        raise ConfigError("seed: a master seed is mandatory")
    seed = raw.pop("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a non-negative integer")
    workers = raw.pop("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int):
        raise ConfigError("workers: must be an integer")
    out = raw.pop("out", None)
    if out is not None and not isinstance(out, str):
        raise ConfigError("out: must be a string")
    env = reaction = None
    if kind in _ENV_KINDS:
        if "environment" not in raw:
            raise ConfigError(f"[environment]: required for kind {kind}")
        env = _build(EnvironmentSpec, "environment", raw.pop("environment"))
        if env.mode is Mode.KPP:
            reaction = _build(ReactionSpec, "reaction", raw.pop("reaction", {}))
        elif "reaction" in raw:
            raise ConfigError("[reaction]: only valid for KPP environments")
    blocks = {}
    for name in _USES[kind]:
        blocks[name] = _build(BLOCKS[name], name, raw.pop(name, {}))
    if raw:
        raise ConfigError(f"unknown key(s) or block(s) for kind {kind}: {', '.join(sorted(raw))}")
    cfg = ExperimentConfig(kind, seed, workers, out, env, reaction, blocks)
    _check_ranges(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read a TOML config; unknown keys and out-of-range values are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


def default_config(kind: str) -> ExperimentConfig:
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    raw: dict = {"kind": kind, "seed": 0}
    if kind in _ENV_KINDS:
        raw["environment"] = {"mode": "GEQ"} if kind == "geq_limit" else {}
    return config_from_dict(raw)


def emit_defaults(kind: str) -> str:
    return tomli_w.dumps(default_config(kind).to_dict())


# ----------------------------------------------------------------------
# ledger and summaries
# ----------------------------------------------------------------------
class RunLedger:
    """Append-only JSON-lines record of a run (single writer)."""

    def __init__(self, path, config: ExperimentConfig):
        self.path = Path(path)
        self.config_hash = config.config_hash()
        self.seed = config.seed
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")
        self.append("config", config.to_dict())

    def append(self, rtype: str, data) -> None:
        rec = {"schema_version": SCHEMA_VERSION, "type": rtype, "config_hash": self.config_hash,
               "seed": self.seed,
               "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
               "version": __version__, "data": data}
        self._fh.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


def read_ledger(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})


@contextmanager
def _mapper(workers: int):
    if workers <= 1:
        yield map
        return
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        yield pool.imap


# ----------------------------------------------------------------------
# pipelines
# ----------------------------------------------------------------------
@dataclass
class RunResult:
    ok: bool = True
    failures: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.ok = False
        self.failures.append(msg)


def _validate(cfg, out, ledger, res):
    b = cfg.block("validate")
    rep = validate_hypotheses(cfg.environment, cfg.reaction, samples=b.samples,
                              seed=cell_seed(cfg.seed, 0), box_sides=tuple(b.box_sides))
    ledger.append("validation", rep.to_dict())
    rows = [dict(i._asdict()) for i in rep.items]
    write_rows(out / "validation.csv", rows, ["name", "passed", "margin", "detail"])
    res.artifacts.append("validation.csv")
    for i in rep.failed():
        res.fail(f"hypothesis {i.name} violated: {i.detail}")
    return rep


def _calibration(cfg, ledger):
    b = cfg.block("calibration")
    if not b.enabled:
        return None
    cal = calibrate_m(cfg.environment, cfg.reaction, n_seeds=b.n_seeds, horizon=b.horizon,
                      h=cfg.block("speed_table").h, safety=b.safety)
    ledger.append("calibration", cal.to_dict())
    return cal


def _speed_table(cfg, out, ledger, res, mapper):
    b = cfg.block("speed_table")
    tab = estimate_speed_table(cfg.environment, cfg.reaction, K=b.K, R=b.R, samples=b.samples,
                               h=b.h, seed=cell_seed(cfg.seed, 1), estimator=b.estimator,
                               mapper=mapper)
    for k, est in enumerate(tab.estimates):
        ledger.append("speed_estimate", {
            "k": k, "direction": tab.directions[k], "radii": est.n_grid,
            "travel_times": est.values, "estimator": b.estimator,
            "tau_bar": tab.tau_bar[k], "ci": tab.ci[k], "w": tab.w[k]})
    tab.write_csv(out / "speed_table.csv")
    res.artifacts.append("speed_table.csv")
    w = tab.w
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        res.fail("speed table contains non-positive or non-finite speeds")
    cal = _calibration(cfg, ledger)
    if cal is not None:
        chk = check_speed_bounds(tab, cal.m_emp)
        ledger.append("check", chk)
        if not chk["passed"]:
            res.fail(f"speed bounds 1/M <= w <= M violated (margin {chk['margin']:.4g})")
    return tab


def _shape(cfg, tab, out, ledger, res):
    shape = assemble_shape(tab)
    shape.write_csv(out / "shape.csv")
    res.artifacts.append("shape.csv")
    if "convexity" in cfg.blocks:
        b = cfg.block("convexity")
        rep = check_convexity(shape, tab, slack_factor=b.slack_factor, n_random=b.n_random,
                              seed=cell_seed(cfg.seed, 2))
        row = dict(rep._asdict())
        row["worst_triple"] = " ".join(map(str, rep.worst_triple))
        ledger.append("convexity", row)
        write_rows(out / "convexity.csv", [row], list(row))
        res.artifacts.append("convexity.csv")
        if not (rep.passed and rep.hull_passed):
            res.fail(f"convexity check failed (worst margin {rep.worst_margin:.4g}, "
                     f"slack {rep.slack:.4g}, hull gap {rep.hull_gap:.4g})")
    return shape


def _sandwich(cfg, shape, out, ledger, res, mapper):
    b = cfg.block("sandwich")
    G = Ball(tuple(b.G_center), b.G_radius) if b.G_polygon is None else np.asarray(b.G_polygon)
    exp = ScaledExperiment(cfg.environment, shape, G=G, theta=b.theta, rho=b.rho,
                           shift_bound=b.shift_bound, shift=b.shift,
                           eps_list=tuple(b.eps_list), delta=b.delta,
                           theta_prime=b.theta_prime, times=tuple(b.times),
                           seeds_per_eps=b.seeds_per_eps,
                           reaction=cfg.reaction or ReactionSpec(), h=b.h, margin=b.margin,
                           seed=cell_seed(cfg.seed, 3))
    t0 = time.perf_counter()
    results = run_sandwich(exp, mapper=mapper)
    ledger.append("runtime", {"stage": "sandwich", "seconds": time.perf_counter() - t0})
    rows = []
    for r in results:
        d = r.to_dict()
        d["delta"] = b.delta
        ledger.append("sandwich", d)
        rows.append(d)
    write_rows(out / "sandwich.csv", rows,
               ["eps", "t", "delta", "seed", "inner", "outer", "inner_margin",
                "outer_margin", "outer_vacuous", "valid", "passed"])
    fr = pass_fractions(results)
    write_summary(out / "sandwich_fractions.csv", fr)
    res.artifacts += ["sandwich.csv", "sandwich_fractions.csv"]
    for i, e in enumerate(b.eps_list):
        if b.min_fraction:
            for f in fr:
                if f.eps == e and f.fraction < b.min_fraction[i]:
                    res.fail(f"sandwich pass fraction {f.fraction:.3f} at eps={e}, t={f.t} "
                             f"below {b.min_fraction[i]}")
    if b.require_monotone and not monotone_in_eps(fr):
        res.fail("sandwich pass fraction decreases along the eps list beyond its Wilson interval")
    return results


def _geq_limit(cfg, shape, out, ledger, res, mapper):
    b = cfg.block("geq_limit")
    u0 = RadialProfile(b.profile, tuple(b.center), b.radius, b.height)
    exp = ScaledExperiment(cfg.environment, shape, u0=u0, rho=b.rho, shift=b.shift,
                           shift_bound=b.shift_bound, eps_list=(b.eps,), h=b.h,
                           seed=cell_seed(cfg.seed, 4))
    exp.check()
    seeds = exp.seeds(b.eps, b.seeds)
    results = list(mapper(_GEQCell(exp, b.eps, b.t, b.tol), seeds))
    rows = []
    for r in results:
        d = r.to_dict()
        ledger.append("geq_limit", d)
        rows.append(d)
    write_rows(out / "geq_limit.csv", rows,
               ["eps", "t", "seed", "max_error", "tolerance", "n_probes", "passed"])
    res.artifacts.append("geq_limit.csv")
    frac = sum(r.passed for r in results) / len(results)
    if frac < b.min_fraction:
        res.fail(f"G-equation limit: pass fraction {frac:.3f} below {b.min_fraction}")
    return results


@dataclass
class _GEQCell:
    exp: ScaledExperiment
    eps: float
    t: float
    tol: float

    def __call__(self, seed):
        return geq_limit_check(self.exp, self.eps, seed, t=self.t, tol=self.tol)


def _subadd(cfg, out, ledger, res, mapper):
    b = cfg.block("subadd")
    if b.process == "additive":
        p = AdditiveProcess(b.low, b.high)
        target = (b.low + b.high) / 2
    else:
        p = DeterministicProcess(b.rate, b.offset)
        target = b.rate
    rep = validate_process(p, samples=b.validate_samples, seed=cell_seed(cfg.seed, 5))
    ledger.append("process_validation", {"process": rep.process,
                                         "checks": [c.to_dict() for c in rep.checks]})
    for name in rep.failed():
        res.fail(f"process hypothesis {name} violated")
    est = estimate_limit(p, b.n_grid, b.samples, seed=cell_seed(cfg.seed, 6), paired=b.paired,
                         mapper=mapper)
    ledger.append("convergence", est.to_dict() | {"values": est.values})
    rows = [{"n": n, "mean": m, "sd": s, "count": c}
            for n, m, s, c in zip(est.n_grid, est.means, est.sds, est.counts)]
    write_rows(out / "convergence.csv", rows, ["n", "mean", "sd", "count"])
    write_rows(out / "limit.csv", [{"limit": est.limit, "half_width": est.half_width,
                                    "expected": target}], ["limit", "half_width", "expected"])
    res.artifacts += ["convergence.csv", "limit.csv"]
    return est


def execute(cfg: ExperimentConfig, out: Path) -> RunResult:
    """Run the pipeline of cfg.kind, writing artifacts into `out`."""
    out.mkdir(parents=True, exist_ok=True)
    ledger_path = out / "ledger.jsonl"
    if ledger_path.exists():
        ledger_path.unlink()
    ledger = RunLedger(ledger_path, cfg)
    res = RunResult()
    try:
        if cfg.environment is not None and cfg.kind != "validate_env":
            try:
                cfg.environment.check()
            except InvalidSpecError as exc:
                ledger.append("error", {"hypothesis": exc.hypothesis, "message": str(exc)})
                raise
        with _mapper(cfg.workers) as mapper:
            k = cfg.kind
            if k == "validate_env":
                _validate(cfg, out, ledger, res)
            elif k == "subadd_synthetic":
                _subadd(cfg, out, ledger, res, mapper)
            elif k in ("speed_table", "wulff_shape", "sandwich", "geq_limit", "full_pipeline"):
                if k == "full_pipeline":
                    _validate(cfg, out, ledger, res)
                tab = _speed_table(cfg, out, ledger, res, mapper)
                if k != "speed_table":
                    shape = _shape(cfg, tab, out, ledger, res)
                    if k == "sandwich" or k == "full_pipeline":
                        _sandwich(cfg, shape, out, ledger, res, mapper)
                    if k == "geq_limit" or (k == "full_pipeline"
                                            and cfg.environment.mode is Mode.GEQ):
                        _geq_limit(cfg, shape, out, ledger, res, mapper)
        ledger.append("result", {"ok": res.ok, "failures": res.failures,
                                 "artifacts": res.artifacts})
    finally:
        ledger.close()
    return res


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------
def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homog-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out")
    v = sub.add_parser("validate", help="parse a config and check the hypotheses")
    v.add_argument("config")
    e = sub.add_parser("emit-defaults", help="print a default config")
    e.add_argument("kind", choices=KINDS)
    return p


def _repro(path, cfg) -> str:
    return f"homog-lab run {path} --seed {cfg.seed} --workers 1"


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "emit-defaults":
            sys.stdout.write(emit_defaults(args.kind))
            return EXIT_OK
        cfg = parse_config(args.config)
        if args.command == "validate":
            print(f"config ok: kind={cfg.kind} hash={cfg.config_hash()}")
            if cfg.environment is None:
                return EXIT_OK
            rep = validate_hypotheses(cfg.environment, cfg.reaction)
            for i in rep.items:
                print(f"{'PASS' if i.passed else 'FAIL'} {i.name}: margin={i.margin:.6g} "
                      f"({i.detail})")
            return EXIT_OK if rep.passed else EXIT_FAIL
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed: must be non-negative")
            cfg.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers: must be >= 1")
            cfg.workers = args.workers
        out = Path(args.out or cfg.out or f"runs/{cfg.kind}-{cfg.config_hash()[:8]}-s{cfg.seed}")
        res = execute(cfg, out)
    except (ConfigError, InvalidSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAnomaly, CFLViolation) as exc:
        print(f"numerical anomaly: {exc}", file=sys.stderr)
        if "cfg" in locals():
            print(f"reproduce: {_repro(args.config, cfg)}", file=sys.stderr)
        return EXIT_ANOMALY
    except HypothesisViolation as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"output: {out}")
    for a in res.artifacts:
        print(f"  {a}")
    if res.ok:
        print("status: pass")
        return EXIT_OK
    for f in res.failures:
        print(f"FAIL: {f}")
    print(f"reproduce: {_repro(args.config, cfg)}")
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
