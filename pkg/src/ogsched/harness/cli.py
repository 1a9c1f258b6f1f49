"""Command line: ``ogsched {gen,run,replay,check,report}``.

Exit codes: 0 ok, 1 usage error, 2 assertion failure, 3 oracle limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..instance import SetCoverInstance, instance_to_json, setcover_to_json
from ..oracle import OracleLimitExceeded
from .experiment import (ASSERT_LEVELS, SCENARIOS, AssertionFailed, ConfigError, ExperimentConfig,
                         make_instance, replay, run_experiment, summarize, trial_seed)

EXIT_OK, EXIT_USAGE, EXIT_ASSERT, EXIT_ORACLE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_seed() -> int:
    raw = os.environ.get("OGS_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        print(f"ignoring non-integer OGS_SEED={raw!r}", file=sys.stderr)
        return 0


def _range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(",")
    try:
        return float(lo), float(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=SCENARIOS, default="set-cover")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--L", type=int, help="number of blocks for nested-norm")
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--costs", type=_range, default=(1.0, 4.0), metavar="LO,HI")
    p.add_argument("--loads", type=_range, default=(0.5, 3.0), metavar="LO,HI")
    p.add_argument("--distances", type=_range, default=(0.0, 2.0), metavar="LO,HI")
    p.add_argument("--inner", default="linf", help="linf | l<p> | top:<k> | owl:<w,...>")
    p.add_argument("--aggregate", default="l2", help="outer norm, wl1, sumpow:<p> or pnorm:<p>")
    p.add_argument("--p", type=float, default=2.0, help="exponent for the budgeted scenario")
    p.add_argument("--alpha", type=float)
    p.add_argument("--path", help="instance file for custom-file")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--oracle-limit", type=int, default=2 ** 22)
    p.add_argument("--assert-level", choices=ASSERT_LEVELS, default="basic")
    p.add_argument("--ratio-ceiling", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ogsched", description="Online generalized scheduling experiments")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write one generated instance as JSON")
    _scenario_args(g)
    g.add_argument("--trial", type=int, default=0, help="trial index whose instance to write")
    g.add_argument("--out", help="output file (stdout if omitted)")

    r = sub.add_parser("run", help="run a seeded Monte-Carlo experiment")
    _scenario_args(r)
    r.add_argument("--trials", type=int, default=10)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", default="report", help="output path prefix")

    rp = sub.add_parser("replay", help="rerun a single trial from its trial seed")
    _scenario_args(rp)

    c = sub.add_parser("check", help="run the property suites")
    c.add_argument("--seed", type=int, default=_default_seed())
    c.add_argument("--cases", type=int, default=2000)

    rep = sub.add_parser("report", help="re-summarize a report JSON")
    rep.add_argument("report")
    return ap


def _config(a, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        scenario=a.scenario, n=a.n, m=a.m, r=a.r, L=a.L, seed=a.seed, density=a.density,
        cost_range=a.costs, load_range=a.loads, distance_range=a.distances, inner=a.inner,
        aggregate=a.aggregate, p=a.p, alpha=a.alpha, oracle_limit=a.oracle_limit,
        assert_level=a.assert_level, ratio_ceiling=a.ratio_ceiling, path=a.path, **extra)


def _print_summary(summary: dict, out=None) -> None:
    out = out or sys.stdout
    for key in ("scheduled", "cost", "ratio", "tau", "depth"):
        st = summary[key]
        if st["count"]:
            print(f"{key:>9}: mean {st['mean']:.4g}  std {st['std']:.4g}  stderr {st['stderr']:.3g}"
                  f"  min {st['min']:.4g}  max {st['max']:.4g}", file=out)
    for name, cnt in summary["assertions"].items():
        print(f"{name:>16}: {cnt}/{summary['trials']} passed", file=out)


def _cmd_gen(a) -> int:
    cfg = _config(a, trials=1).resolved()
    inst = make_instance(cfg, trial_seed(cfg.seed, a.trial))
    d = setcover_to_json(inst) if isinstance(inst, SetCoverInstance) else instance_to_json(inst)
    text = json.dumps(d, indent=1, sort_keys=True) + "\n"
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_run(a) -> int:
    rep = run_experiment(_config(a, trials=a.trials, workers=a.workers), out=a.out)
    _print_summary(rep.summary)
    print(f"wrote {a.out}.json, {a.out}.csv, {a.out}.meta.json")
    return EXIT_OK


def _cmd_replay(a) -> int:
    rec, cks = replay(_config(a, trials=1), a.seed)
    print(json.dumps(rec, sort_keys=True, indent=1))
    failed = [c for c in cks if not c.passed]
    for c in failed:
        print(f"FAILED {c.name}: {c.detail}", file=sys.stderr)
    return EXIT_ASSERT if failed and a.assert_level != "none" else EXIT_OK


def _cmd_check(a) -> int:
    from .properties import run_property_suite
    bad = 0
    for name, cases, violations in run_property_suite(a.seed, a.cases):
        print(f"{'ok  ' if violations == 0 else 'FAIL'} {name}: {violations}/{cases} violations")
        bad += violations
    return EXIT_ASSERT if bad else EXIT_OK


def _cmd_report(a) -> int:
    try:
        d = json.loads(Path(a.report).read_text())
        trials = d["trials"]
    except (OSError, ValueError, KeyError) as e:
        print(f"cannot read report: {e}", file=sys.stderr)
        return EXIT_USAGE
    _print_summary(summarize(trials))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and EXIT_USAGE
    handlers = {"gen": _cmd_gen, "run": _cmd_run, "replay": _cmd_replay, "check": _cmd_check,
                "report": _cmd_report}
    try:
        return handlers[a.cmd](a)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionFailed as e:
        print(str(e), file=sys.stderr)
        return EXIT_ASSERT
    except OracleLimitExceeded as e:
        print(f"oracle limit: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
