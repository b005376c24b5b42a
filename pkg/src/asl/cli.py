"""Command-line entry point: ``asl thresholds | simulate | sweep | compare``.

Exit status is 0 on success, 1 on a usage error and 2 on a configuration error.
Settings come from an optional JSON ``--config`` file; command-line flags
override individual fields.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict

from . import __version__
from .classes import class_from_dict
from .errors import ConfigError
from .harness import (DEFAULT_PROCEDURE, PROCEDURES, ExperimentConfig, aggregate, default_jobs,
                      parse_mu_grid, run_trials, sweep_mu, trials_csv, write_json)
from .theory import threshold_report

EXIT_OK, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2

_CLASS_FLAGS = {
    "n": "n", "s": "s", "k": "k", "p": "p", "nr": "n_r", "nc": "n_c", "sr": "s_r", "sc": "s_c",
}
_CLASS_KINDS = {"sset": "sset", "intervals": "intervals", "stars": "stars", "star": "stars",
                "submatrix": "submatrix"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_class_flags(p):
    p.add_argument("--class", dest="klass", choices=sorted(_CLASS_KINDS), help="support class")
    for flag, name in _CLASS_FLAGS.items():
        p.add_argument(f"--{flag}", type=int, dest=f"cls_{name}", help=f"class parameter {name}")
    p.add_argument("--m", type=float, help="energy budget")
    p.add_argument("--eps", type=float, help="target error epsilon")


def _add_experiment_flags(p, grid=True):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    _add_class_flags(p)
    p.add_argument("--procedure", choices=sorted(PROCEDURES))
    if grid:
        p.add_argument("--mu-grid", help="'xT:0.5,1', 'xProp1:0.5,1' or '0.5,1.2'")
    p.add_argument("--mu", help="signal magnitude (absolute, or a grid spec)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="experiment seed (falls back to $ASL_SEED, then 0)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    p.add_argument("--budget-mode", choices=("expected", "hard"))
    p.add_argument("--hard-multiplier", type=float, help="hard cap as a multiple of m")
    p.add_argument("--calibration", choices=("signal", "threshold"),
                   help="working mu for the procedure: the signal's own or the reference threshold")
    p.add_argument("--placement", choices=("uniform", "adversarial"))
    p.add_argument("--out", default="asl_out", help="output directory")


def build_parser():
    parser = _Parser(prog="asl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"asl {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("thresholds", help="evaluate every applicable threshold for a class")
    t.add_argument("--config", help="JSON with a class descriptor and m/epsilon")
    _add_class_flags(t)
    t.add_argument("--mu", type=float, help="signal magnitude for the sample lower bound")
    t.add_argument("--out", help="also write thresholds.json and thresholds.csv here")

    s = sub.add_parser("simulate", help="run trials at one mu; write trial CSV and summary JSON")
    _add_experiment_flags(s, grid=False)
    w = sub.add_parser("sweep", help="run a mu grid; write trial CSV and sweep JSON")
    _add_experiment_flags(w)
    c = sub.add_parser("compare", help="two procedures on matched seeds; write paired deltas")
    _add_experiment_flags(c)
    c.add_argument("--procedure-b", required=True, choices=sorted(PROCEDURES))
    return parser


# -- config assembly ----------------------------------------------------------

def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", field="config") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object", field="config")
    return obj


def _class_dict(args, base):
    d = dict(base.get("class") or {})
    if args.klass:
        kind = _CLASS_KINDS[args.klass]
        if d.get("class") != kind:
            d = {}
        d["class"] = kind
    for name in _CLASS_FLAGS.values():
        v = getattr(args, f"cls_{name}", None)
        if v is not None:
            d[name] = v
    if not d:
        raise ConfigError("no support class given (use --class or a config file)", field="class")
    return d


def _seed(args, base):
    if args.seed is not None:
        return args.seed
    if "seed" in base:
        return base["seed"]
    env = os.environ.get("ASL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"ASL_SEED must be an integer, got {env!r}", field="seed") from None
    return 0


def experiment_config(args, procedure=None):
    base = _load_config_file(args.config)
    cls = class_from_dict(_class_dict(args, base))
    d = {k: v for k, v in base.items() if k not in ("class", "schema_version")}
    for flag, key in (("m", "m"), ("eps", "epsilon"), ("trials", "trials"),
                      ("budget_mode", "budget_mode"), ("hard_multiplier", "hard_budget_multiplier"),
                      ("calibration", "calibration"), ("placement", "placement")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    d["procedure"] = procedure or args.procedure or d.get("procedure") or DEFAULT_PROCEDURE[cls.kind]
    d["seed"] = _seed(args, base)
    grid = getattr(args, "mu_grid", None) or args.mu
    if grid is not None:
        d["mu_grid"] = grid
    for key in ("m", "epsilon", "trials", "mu_grid"):
        if key not in d:
            raise ConfigError("missing required setting", field=key)
    if d["procedure"] not in PROCEDURES:
        raise ConfigError(f"unknown procedure {d['procedure']!r}", field="procedure")
    d["mu_grid"] = tuple(parse_mu_grid(d["mu_grid"], cls, d["procedure"], d["m"], d["epsilon"]))
    known = {"procedure", "m", "epsilon", "mu_grid", "trials", "seed", "budget_mode",
             "hard_budget_multiplier", "calibration", "placement"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unexpected fields {sorted(extra)}", field="config")
    return ExperimentConfig(cls=cls, **d)


def _jobs(args):
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise ConfigError("jobs must be at least 1", field="jobs")
    return jobs


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _out_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc.strerror}", field="out") from None
    return path


def _json_safe(d):
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


# -- commands -----------------------------------------------------------------

def cmd_thresholds(args, stdout):
    base = _load_config_file(args.config)
    cls = class_from_dict(_class_dict(args, base))
    m = args.m if args.m is not None else base.get("m")
    eps = args.eps if args.eps is not None else base.get("epsilon")
    if m is None:
        raise ConfigError("missing required setting", field="m")
    if eps is None:
        raise ConfigError("missing required setting", field="eps")
    mu = args.mu if args.mu is not None else base.get("mu")
    rep = threshold_report(cls, float(m), float(eps), mu)
    d = rep.to_dict()
    d["sample_lower_nonadaptive"] = _json_safe(d["sample_lower_nonadaptive"])
    text = _dump(d)
    stdout.write(text)
    if args.out:
        out = _out_dir(args.out)
        write_json(os.path.join(out, "thresholds.json"), text)
        row = {k: ("" if v is None else v) for k, v in rep.csv_row().items()}
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        write_json(os.path.join(out, "thresholds.csv"), buf.getvalue())
    return EXIT_OK


def cmd_simulate(args, stdout):
    config = experiment_config(args)
    mu = config.mu_grid[0]
    recs = run_trials(config, mu, _jobs(args))
    point = aggregate(recs)
    out = _out_dir(args.out)
    write_json(os.path.join(out, "trials.csv"), trials_csv(recs))
    summary = {"schema_version": 1, "config": config.to_dict(), "point": asdict(point)}
    text = _dump(summary)
    write_json(os.path.join(out, "summary.json"), text)
    stdout.write(text)
    return EXIT_OK


def cmd_sweep(args, stdout):
    config = experiment_config(args)
    res = sweep_mu(config, _jobs(args))
    out = _out_dir(args.out)
    write_json(os.path.join(out, "trials.csv"), trials_csv(res.records))
    text = res.to_json()
    write_json(os.path.join(out, "sweep.json"), text)
    stdout.write(text)
    return EXIT_OK


def _paired(a, b, key):
    diffs = [float(getattr(y, key)) - float(getattr(x, key)) for x, y in zip(a, b)]
    k = len(diffs)
    mean = math.fsum(diffs) / k
    var = math.fsum((d - mean) ** 2 for d in diffs) / (k - 1) if k > 1 else 0.0
    half = 1.959963984540054 * math.sqrt(var / k)
    return {"mean": mean, "ci_low": mean - half, "ci_high": mean + half}


def cmd_compare(args, stdout):
    cfg_a = experiment_config(args)
    cfg_b = experiment_config(args, procedure=args.procedure_b)
    jobs = _jobs(args)
    rows = []
    all_recs = []
    for mu in cfg_a.mu_grid:
        ra = run_trials(cfg_a, mu, jobs)
        rb = run_trials(cfg_b, mu, jobs)
        all_recs += ra + rb
        rows.append({
            "mu": mu,
            cfg_a.procedure: asdict(aggregate(ra)),
            cfg_b.procedure: asdict(aggregate(rb)),
            "delta": {key: _paired(ra, rb, key) for key in ("error", "energy", "samples")},
        })
    result = {"schema_version": 1, "a": cfg_a.to_dict(), "b": cfg_b.to_dict(),
              "delta_definition": "b minus a, paired by trial index", "points": rows}
    out = _out_dir(args.out)
    write_json(os.path.join(out, "trials.csv"), trials_csv(all_recs))
    text = _dump(result)
    write_json(os.path.join(out, "compare.json"), text)
    stdout.write(text)
    return EXIT_OK


_COMMANDS = {"thresholds": cmd_thresholds, "simulate": cmd_simulate, "sweep": cmd_sweep,
             "compare": cmd_compare}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, stdout)
    except ConfigError as exc:
        stderr.write(f"asl: configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
