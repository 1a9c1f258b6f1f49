"""Seeded Monte-Carlo experiments and their reports.

A run writes three files next to ``out``: ``<out>.json`` (config, trial
records, summary; byte-identical for identical config and seed),
``<out>.csv`` (one row per trial) and ``<out>.meta.json`` (wall time and
timestamp, the only nondeterministic fields).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .. import BACKEND
from ..budgeted import run_budgeted_pbounded, run_obcm
from ..cover import LayeredScheduler, PartialCascade, run_gen_sched, run_gen_sched_norm, run_osc
from ..instance import BudgetedInstance, SetCoverInstance, load_any, osc_to_gensched
from ..norms import (LInf, Lp, NormAgg, OrderedSym, PNormPower, SumPowers, TopK, WeightedL1,
                     homogeneity_degree)
from ..oracle import OracleLimit, opt_budgeted_sched_pack, opt_gen_sched, opt_obcm, opt_osc
from ..rng import RandomSource
from . import checks
from .generators import (generate_budgeted, generate_facility_location, generate_load_balancing,
                         generate_nested, generate_set_cover)

SCENARIOS = ("set-cover", "load-balancing", "facility-location", "nested-norm", "budgeted", "custom-file")
ASSERT_LEVELS = ("none", "basic", "full")
DESK_LIMIT = 96   # n * m * r for the scheduling oracles

DEFAULT_SIZES = {
    "set-cover": dict(n=12, m=6, r=1),
    "load-balancing": dict(n=8, m=3, r=2),
    "facility-location": dict(n=8, m=3, r=1),
    "nested-norm": dict(n=8, m=4, r=1, L=2),
    "budgeted": dict(n=8, m=4, r=1),
    "custom-file": dict(),
}


class ConfigError(ValueError):
    pass


class AssertionFailed(RuntimeError):
    def __init__(self, trial: int, seed: int, failed: list):
        self.trial, self.seed, self.failed = trial, seed, failed
        names = ", ".join(f"{c.name} ({c.detail})" for c in failed)
        super().__init__(f"trial {trial} failed {names}; replay with --seed {seed}")


def parse_norm(text: str):
    """linf | l1 | l<p> | lp:<p> | top:<k> | owl:<w1>,<w2>,..."""
    t = text.strip().lower()
    if t == "linf":
        return LInf()
    if t.startswith("top:"):
        return TopK(int(t[4:]))
    if t.startswith("lp:"):
        return Lp(float(t[3:]))
    if t.startswith("owl:"):
        return OrderedSym(tuple(float(x) for x in t[4:].split(",")))
    if t.startswith("l") and t[1:].replace(".", "", 1).isdigit():
        return Lp(float(t[1:]))
    raise ConfigError(f"unknown norm {text!r}")


def parse_aggregate(text: str, m: int):
    """sumpow:<p> | pnorm:<p> | wl1 | any outer norm accepted by ``parse_norm``."""
    t = text.strip().lower()
    if t.startswith("sumpow:"):
        return SumPowers(float(t[7:]), (1.0,) * m)
    if t.startswith("pnorm:"):
        return PNormPower(float(t[6:]))
    if t == "wl1":
        return NormAgg(WeightedL1((1.0,) * m))
    return NormAgg(parse_norm(t))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "set-cover"
    n: Optional[int] = None
    m: Optional[int] = None
    r: Optional[int] = None
    L: Optional[int] = None
    trials: int = 10
    seed: int = 0
    density: float = 0.3
    cost_range: tuple = (1.0, 4.0)
    load_range: tuple = (0.5, 3.0)
    distance_range: tuple = (0.0, 2.0)
    inner: str = "linf"
    aggregate: str = "l2"
    p: float = 2.0
    alpha: Optional[float] = None
    oracle_limit: int = 2 ** 22
    assert_level: str = "basic"
    ratio_ceiling: Optional[float] = None
    workers: int = 1
    path: Optional[str] = None

    def resolved(self) -> "ExperimentConfig":
        """Fill scenario defaults and validate."""
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.assert_level not in ASSERT_LEVELS:
            raise ConfigError(f"assert level must be one of {ASSERT_LEVELS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.scenario == "custom-file" and not self.path:
            raise ConfigError("custom-file needs a path")
        d = {k: v for k, v in DEFAULT_SIZES[self.scenario].items() if getattr(self, k) is None}
        cfg = replace(self, cost_range=tuple(self.cost_range), load_range=tuple(self.load_range),
                      distance_range=tuple(self.distance_range), **d)
        if cfg.scenario != "custom-file":
            if cfg.n < 1 or cfg.m < 1 or cfg.r < 1:
                raise ConfigError("sizes must be positive")
            if cfg.scenario == "set-cover":
                if cfg.m > 20 or cfg.n > 63:
                    raise ConfigError("set-cover oracles need m <= 20 and n <= 63")
            elif cfg.n * cfg.m * cfg.r > DESK_LIMIT:
                raise ConfigError(f"n*m*r = {cfg.n * cfg.m * cfg.r} exceeds the desk limit {DESK_LIMIT}")
        return cfg

    def to_json(self) -> dict:
        """Config echo; the worker count does not affect results and is left out."""
        d = asdict(self)
        d.pop("workers")
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in names})


# ------------------------------------------------------------------- trials


def trial_seed(seed: int, t: int) -> int:
    return RandomSource(seed).derive_seed("trial", t)


def make_instance(cfg: ExperimentConfig, tseed: int):
    gen = RandomSource(tseed).stream("instance")
    sc = cfg.scenario
    if sc == "set-cover":
        return generate_set_cover(cfg.n, cfg.m, cfg.density, cfg.cost_range, gen)
    if sc == "load-balancing":
        return generate_load_balancing(cfg.n, cfg.m, cfg.load_range, parse_norm(cfg.inner),
                                       parse_aggregate(cfg.aggregate, cfg.m), gen, cfg.r)
    if sc == "facility-location":
        return generate_facility_location(cfg.n, cfg.m, cfg.cost_range, cfg.distance_range, gen)
    if sc == "nested-norm":
        return generate_nested(cfg.n, cfg.m, cfg.L, cfg.load_range, gen, parse_norm(cfg.inner), cfg.r)
    if sc == "budgeted":
        return generate_budgeted(cfg.n, cfg.m, cfg.p, gen)
    return load_any(cfg.path)


def _agents(result) -> list:
    out = []
    for ph in result.phases:
        algo = ph.algo
        if isinstance(algo, PartialCascade):
            out.extend((a.agent, ph.opt_hat) for s in algo.schedulers for a in s.agents)
        elif isinstance(algo, LayeredScheduler):
            out.extend((a, ph.opt_hat) for ly in algo.layers for a in ly.agents)
    return out


def _agent_check(inst, result):
    groups: dict[float, list] = {}
    for ag, b in _agents(result):
        groups.setdefault(b, []).append(ag)
    worst = checks.Check("agent_costs", True, "no agents")
    for b, ags in groups.items():
        c = checks.agent_costs(inst, ags, b)
        if not c.passed:
            return c
        worst = c
    return worst


def _cover_record(inst, res, opt, level, want_full):
    rec = {"scheduled": res.assignment.count, "n": inst.n, "cost": res.cost, "opt": opt,
           "ratio": res.cost / opt if opt > 0 else (1.0 if res.cost == 0 else math.inf),
           "tau": res.tau, "depth": res.depth, "phases": len(res.phases)}
    cks = [checks.completeness(res.assignment.count, inst.n)]
    if level != "none":
        cks.append(_agent_check(inst, res))
    if want_full:
        cks.append(checks.doubling_invariant(res.hindsight, res.phases))
    return rec, cks


def run_trial(cfg: ExperimentConfig, tseed: int) -> tuple[dict, list]:
    """One trial; returns the record and the list of checks."""
    limit = OracleLimit(cfg.oracle_limit)
    inst = make_instance(cfg, tseed)
    rng = RandomSource(tseed).child("algo")
    full = cfg.assert_level == "full"
    if isinstance(inst, SetCoverInstance):
        opt = opt_osc(inst, limit)[0]
        res = run_osc(inst, rng, alpha=cfg.alpha, limit=limit)
        rec, cks = _cover_record(osc_to_gensched(inst), res.result, opt, cfg.assert_level, full)
        rec["cost"], rec["ratio"] = res.cost, res.cost / opt
        if full:
            k = opt_obcm(inst, opt, limit)[0]
            ob = run_obcm(inst, opt, k, RandomSource(tseed).child("obcm"))
            cks += [checks.obcm_half(ob, k), checks.obcm_wrapper(ob, inst.costs)]
            rec["obcm_covered"], rec["obcm_opt"] = ob.covered_count, k
    elif isinstance(inst, BudgetedInstance):
        opt, _ = opt_budgeted_sched_pack(inst, limit)
        res = run_budgeted_pbounded(inst, cfg.p, max(opt, 1), rng=rng)
        rec = {"scheduled": res.scheduled, "n": inst.n, "cost": res.activation_value, "opt": opt,
               "ratio": res.scheduled / opt if opt else 1.0, "tau": None, "depth": None,
               "phases": 1, "active": len(res.active)}
        cks = []
        if cfg.assert_level != "none":
            cks.append(checks.engine_wrapper(res, checks.pbounded_value(inst)))
        if full and opt > 0:
            cks.append(checks.opt_upper_bound(inst, res, opt, cfg.p))
    else:
        opt = opt_gen_sched(inst, limit)[0]
        if cfg.scenario == "facility-location" or (cfg.scenario == "custom-file"
                                                   and homogeneity_degree(inst.aggregate) == 1.0):
            res = run_gen_sched_norm(inst, alpha=cfg.alpha, rng=rng, limit=limit)
        else:
            res = run_gen_sched(inst, alpha=cfg.alpha, rng=rng, limit=limit)
        rec, cks = _cover_record(inst, res, opt, cfg.assert_level, full)
    if cfg.ratio_ceiling is not None and cfg.assert_level != "none" and cfg.scenario != "budgeted":
        cks.append(checks.Check("ratio_ceiling", rec["ratio"] <= cfg.ratio_ceiling, f"{rec['ratio']:.4g}"))
    rec = {"seed": tseed, **rec, "assertions": {c.name: c.passed for c in cks}}
    return rec, cks


def _run_one(args):
    cfg, t = args
    s = trial_seed(cfg.seed, t)
    rec, cks = run_trial(cfg, s)
    failed = [c for c in cks if not c.passed] if cfg.assert_level != "none" else []
    return t, rec, failed


# ------------------------------------------------------------------ reports


def _stats(values) -> dict:
    """Statistics over the defined values (tau and depth may be None)."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"mean": None, "std": None, "stderr": None, "min": None, "max": None, "count": 0}
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "std": std, "stderr": std / math.sqrt(v.size),
            "min": float(v.min()), "max": float(v.max()), "count": int(v.size)}


def summarize(trials: list[dict]) -> dict:
    out = {key: _stats([t[key] for t in trials]) for key in ("scheduled", "cost", "ratio", "tau", "depth")}
    names = sorted({k for t in trials for k in t["assertions"]})
    out["assertions"] = {k: sum(bool(t["assertions"].get(k)) for t in trials) for k in names}
    out["trials"] = len(trials)
    return out


@dataclass
class RunReport:
    config: dict
    trials: list[dict]
    summary: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"config": self.config, "trials": self.trials, "summary": self.summary}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def trial_bytes(self) -> bytes:
        return json.dumps(self.trials, sort_keys=True).encode()


CSV_FIELDS = ("trial", "seed", "scheduled", "n", "cost", "opt", "ratio", "tau", "depth", "phases", "passed")


def _blank(v):
    return "" if v is None else v


def write_report(rep: RunReport, out: str) -> list[Path]:
    base = Path(out)
    if base.suffix == ".json":
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = [base.with_name(base.name + ".json"), base.with_name(base.name + ".csv"),
             base.with_name(base.name + ".meta.json")]
    paths[0].write_text(rep.dumps())
    with paths[1].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for t, rec in enumerate(rep.trials):
            w.writerow([t, rec["seed"], rec["scheduled"], rec["n"], repr(rec["cost"]), repr(rec["opt"]),
                        repr(rec["ratio"]), _blank(rec["tau"]), _blank(rec["depth"]), rec["phases"], int(all(rec["assertions"].values()))])
    paths[2].write_text(json.dumps(rep.meta, sort_keys=True, indent=1) + "\n")
    return paths


def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None) -> RunReport:
    """Run every trial, check assertions in trial order, optionally write files.

    Raises ``AssertionFailed`` for the first failing trial (by index) and
    ``OracleLimitExceeded`` when an oracle refuses an instance.
    """
    cfg = cfg.resolved()
    start = time.time()
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(a) for a in jobs]
    results.sort(key=lambda x: x[0])
    for t, rec, failed in results:
        if failed:
            raise AssertionFailed(t, rec["seed"], failed)
    trials = [rec for _, rec, _ in results]
    rep = RunReport(cfg.to_json(), trials, summarize(trials),
                    {"wall_time": time.time() - start, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
                     "backend": BACKEND, "workers": cfg.workers, "alpha": cfg.alpha if cfg.alpha is not None else "default"})
    if out:
        write_report(rep, out)
    return rep


def replay(cfg: ExperimentConfig, tseed: int) -> tuple[dict, list]:
    return run_trial(cfg.resolved(), tseed)
