"""Monte Carlo trials, mu sweeps and result files.

Randomness is keyed by ``(seed, trial_index, stream)`` through
:class:`numpy.random.SeedSequence` with a Philox generator, so a trial's support,
noise tape and procedure choices never depend on scheduling or on the grid point.
Every grid point therefore reuses the same supports and noise (common random
numbers), and parallel runs reproduce serial ones exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import recovery_cass as rc
from . import recovery_slrt as rs
from .classes import (adversarial_supports, class_from_dict, class_to_dict, sample_support,
                      symmetric_difference_size)
from .errors import ConfigError, SparsityWarning
from .sensing import ProbeBatch, SensingOracle, SignalInstance
from .theory import all_thresholds

SCHEMA_VERSION = 1
STREAM_SUPPORT, STREAM_NOISE, STREAM_PROCEDURE = 0, 1, 2
Z95 = 1.959963984540054


# -- baseline and hard budget -------------------------------------------------

def nonadaptive_baseline(oracle, cls, epsilon, m, *, mu) -> rs.RecoveryResult:
    """One fixed look at every component with energy ``m/n`` each, thresholded at half the signal level.

    A diagnostic only: it shows what a single non-adaptive pass achieves next to
    the non-adaptive necessary bounds.
    """
    n = cls.n
    b = math.sqrt(m / n)
    ledger = rs._Ledger(oracle)
    ledger.mark()
    y = oracle.measure_batch(ProbeBatch.singletons(np.arange(n), b))
    est = np.flatnonzero(y > mu * b / 2.0)
    return rs._finish(oracle, ledger, est, cls, False, {})


def hard_budget_wrapper(procedure, multiplier):
    """Wrap ``procedure(oracle, cls, epsilon, m, mu, rng)`` so the oracle refuses spending past ``multiplier * m``."""
    if not multiplier > 0:
        raise ConfigError("hard budget multiplier must be positive", field="hard_budget_multiplier")

    def wrapped(oracle, cls, epsilon, m, mu, rng):
        oracle.impose_budget(multiplier * m)
        return procedure(oracle, cls, epsilon, m, mu, rng)

    wrapped.__name__ = f"hard_{getattr(procedure, '__name__', 'procedure')}"
    wrapped.multiplier = multiplier
    return wrapped


# -- registry -----------------------------------------------------------------

@dataclass(frozen=True)
class ProcedureSpec:
    run: object
    kinds: tuple
    threshold: str


def _p_sset(o, c, e, m, mu, rng):
    return rs.recover_sset(o, c.n, c.s, e, m, mu=mu)


def _p_intervals(o, c, e, m, mu, rng):
    return rs.recover_intervals(o, c.n, c.s, c.k, e, m, mu=mu)


def _p_star(o, c, e, m, mu, rng):
    if c.k != 1:
        raise ConfigError("procedure 'star' handles a single star; use 'union_stars'", field="procedure")
    return rs.recover_star(o, c.p, c.s, e, m, mu=mu)


def _p_union_stars(o, c, e, m, mu, rng):
    return rs.recover_union_stars(o, c.p, c.s, c.k, e, m, mu=mu)


def _p_sub1(o, c, e, m, mu, rng):
    return rs.recover_submatrix_v1(o, c.n_r, c.n_c, c.s_r, c.s_c, e, m, mu=mu)


def _p_sub2(o, c, e, m, mu, rng):
    return rs.recover_submatrix_v2(o, c.n_r, c.n_c, c.s_r, c.s_c, e, m, mu=mu, rng=rng)


def _p_cass_sset(o, c, e, m, mu, rng):
    return rc.cass_sset(o, c.n, c.s, e, m, mu)


def _p_cass_intervals(o, c, e, m, mu, rng):
    return rc.cass_intervals(o, c.n, c.s, c.k, e, m, mu)


def _p_cass_star(o, c, e, m, mu, rng):
    if c.k != 1:
        raise ConfigError("star CASS handles a single star", field="procedure")
    return rc.cass_star(o, c.p, c.s, e, m, mu)


def _p_cass_sub(o, c, e, m, mu, rng):
    return rc.cass_submatrix(o, c.n_r, c.n_c, c.s_r, c.s_c, e, m, mu)


def _p_baseline(o, c, e, m, mu, rng):
    return nonadaptive_baseline(o, c, e, m, mu=mu)


_ALL = ("sset", "intervals", "stars", "submatrix")
PROCEDURES = {
    "sset": ProcedureSpec(_p_sset, ("sset",), "Prop1"),
    "intervals": ProcedureSpec(_p_intervals, ("intervals",), "Prop2"),
    "star": ProcedureSpec(_p_star, ("stars",), "Prop3"),
    "union_stars": ProcedureSpec(_p_union_stars, ("stars",), "Prop4"),
    "submatrix_v1": ProcedureSpec(_p_sub1, ("submatrix",), "Prop5"),
    "submatrix_v2": ProcedureSpec(_p_sub2, ("submatrix",), "Prop6"),
    "cass_sset": ProcedureSpec(_p_cass_sset, ("sset",), "CASS_sset"),
    "cass_intervals": ProcedureSpec(_p_cass_intervals, ("intervals",), "Prop19"),
    "cass_star": ProcedureSpec(_p_cass_star, ("stars",), "StarCASS"),
    "cass_submatrix": ProcedureSpec(_p_cass_sub, ("submatrix",), "Prop20"),
    "nonadaptive": ProcedureSpec(_p_baseline, _ALL, None),
}
DEFAULT_PROCEDURE = {"sset": "sset", "intervals": "intervals", "stars": "star", "submatrix": "submatrix_v1"}
_NONADAPTIVE_LABEL = {"sset": "Prop7", "intervals": "Prop8", "stars": "Prop9", "submatrix": "Prop10"}


def reference_threshold(cls, procedure, m, epsilon, label=None):
    """Value of the named threshold, or of the procedure's own reference threshold."""
    spec = PROCEDURES[procedure]
    label = label or spec.threshold or _NONADAPTIVE_LABEL[cls.kind]
    table = all_thresholds(cls, m, epsilon)
    if label not in table or table[label] is None:
        raise ConfigError(f"threshold {label!r} is not defined for {cls}", field="mu_grid")
    return table[label]


def parse_mu_grid(spec, cls, procedure, m, epsilon):
    """Resolve ``"xT:0.5,1"``, ``"xProp1:0.5,1"``, ``"0.5,1.2"`` or a list of numbers to a float list."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad mu grid entry: {exc}", field="mu_grid") from None
    if not isinstance(spec, str) or not spec.strip():
        raise ConfigError("mu grid must be a non-empty string or list", field="mu_grid")
    text = spec.strip()
    scale = 1.0
    if text.startswith("x"):
        head, sep, tail = text.partition(":")
        if not sep:
            raise ConfigError("multiplier grids look like 'xT:0.5,1.0'", field="mu_grid")
        label = head[1:]
        scale = reference_threshold(cls, procedure, m, epsilon, None if label == "T" else label)
        text = tail
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad mu grid: {exc}", field="mu_grid") from None
    return [scale * v for v in values]


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    cls: object
    procedure: str
    m: float
    epsilon: float
    mu_grid: tuple
    trials: int
    seed: int = 0
    budget_mode: str = "expected"
    hard_budget_multiplier: float = 4.0
    calibration: str = "signal"
    placement: str = "uniform"

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ConfigError(f"unknown procedure {self.procedure!r}; expected one of {sorted(PROCEDURES)}",
                              field="procedure")
        if self.cls.kind not in PROCEDURES[self.procedure].kinds:
            raise ConfigError(f"procedure {self.procedure!r} does not apply to class {self.cls.kind!r}",
                              field="procedure")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}", field="trials")
        if not (isinstance(self.m, (int, float)) and self.m > 0 and math.isfinite(self.m)):
            raise ConfigError(f"m must be positive and finite, got {self.m!r}", field="m")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon!r}", field="epsilon")
        grid = tuple(float(v) for v in self.mu_grid)
        if not grid:
            raise ConfigError("mu grid is empty", field="mu_grid")
        if any(not (v > 0 and math.isfinite(v)) for v in grid):
            raise ConfigError("mu grid values must be positive and finite", field="mu_grid")
        if list(grid) != sorted(grid):
            raise ConfigError("mu grid must be sorted ascending", field="mu_grid")
        object.__setattr__(self, "mu_grid", grid)
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not (0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}", field="seed")
        if self.budget_mode not in ("expected", "hard"):
            raise ConfigError("budget_mode must be 'expected' or 'hard'", field="budget_mode")
        if not self.hard_budget_multiplier > 0:
            raise ConfigError("hard_budget_multiplier must be positive", field="hard_budget_multiplier")
        if self.calibration not in ("signal", "threshold"):
            raise ConfigError("calibration must be 'signal' or 'threshold'", field="calibration")
        if self.placement not in ("uniform", "adversarial"):
            raise ConfigError("placement must be 'uniform' or 'adversarial'", field="placement")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "cls"}
        d["class"] = class_to_dict(self.cls)
        d["mu_grid"] = list(self.mu_grid)
        return d

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        obj = dict(obj)
        if "class" not in obj:
            raise ConfigError("missing class descriptor", field="class")
        klass = class_from_dict(obj.pop("class"))
        obj.pop("schema_version", None)
        known = {f.name for f in fields(cls)} - {"cls"}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unexpected fields {sorted(extra)}", field="config")
        for name in ("m", "epsilon", "mu_grid", "trials"):
            if name not in obj:
                raise ConfigError("missing required field", field=name)
        procedure = obj.pop("procedure", DEFAULT_PROCEDURE[klass.kind])
        grid = parse_mu_grid(obj.pop("mu_grid"), klass, procedure, obj["m"], obj["epsilon"])
        return cls(cls=klass, procedure=procedure, mu_grid=tuple(grid), **obj)

    def working_mu(self, mu):
        if self.calibration == "signal":
            return mu
        return reference_threshold(self.cls, self.procedure, self.m, self.epsilon)


# -- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    procedure: str
    trial: int
    mu: float
    mu_work: float
    error: int
    exact: bool
    energy: float
    samples: int
    search_energy: float
    refine_energy: float
    search_samples: int
    refine_samples: int
    truncated: bool
    exhausted: bool
    support_size: int
    estimate_size: int
    schema_version: int = SCHEMA_VERSION


CSV_FIELDS = [f.name for f in fields(TrialRecord)]


def trial_rng(seed, trial_index, stream):
    ss = np.random.SeedSequence(seed, spawn_key=(int(trial_index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def _support_for(config, trial_index):
    if config.placement == "adversarial":
        pool = adversarial_supports(config.cls)
        return pool[trial_index % len(pool)]
    return sample_support(config.cls, trial_rng(config.seed, trial_index, STREAM_SUPPORT))


def procedure_callable(config):
    run = PROCEDURES[config.procedure].run
    if config.budget_mode == "hard":
        run = hard_budget_wrapper(run, config.hard_budget_multiplier)
    return run


def run_trial(config: ExperimentConfig, trial_index: int, mu=None, oracle_log=False) -> TrialRecord:
    """One trial at signal magnitude ``mu`` (default: the first grid point)."""
    mu = config.mu_grid[0] if mu is None else float(mu)
    support = _support_for(config, trial_index)
    oracle = SensingOracle(SignalInstance(support, mu), trial_rng(config.seed, trial_index, STREAM_NOISE),
                           log=oracle_log)
    mu_w = config.working_mu(mu)
    run = procedure_callable(config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SparsityWarning)
        res = run(oracle, config.cls, config.epsilon, config.m, mu_w,
                  trial_rng(config.seed, trial_index, STREAM_PROCEDURE))
    if config.budget_mode == "hard" and oracle.energy_spent > config.hard_budget_multiplier * config.m:
        raise AssertionError("hard budget exceeded")  # pragma: no cover
    err = symmetric_difference_size(res.estimate, support)
    pb = res.phase_breakdown
    return TrialRecord(
        procedure=config.procedure, trial=int(trial_index), mu=mu, mu_work=float(mu_w), error=err,
        exact=err == 0, energy=res.energy, samples=res.samples, search_energy=pb.search_energy,
        refine_energy=pb.refine_energy, search_samples=pb.search_samples,
        refine_samples=pb.refine_samples, truncated=res.truncated, exhausted=oracle.exhausted,
        support_size=len(support), estimate_size=len(res.estimate),
    )


def _run_chunk(args):
    config, mu, indices = args
    return [run_trial(config, i, mu) for i in indices]


def run_trials(config, mu, jobs=1, chunk=None):
    """All ``config.trials`` trials at ``mu`` in trial order."""
    indices = list(range(config.trials))
    if jobs <= 1 or config.trials < 2:
        return [run_trial(config, i, mu) for i in indices]
    chunk = chunk or max(1, math.ceil(config.trials / (4 * jobs)))
    parts = [indices[i:i + chunk] for i in range(0, len(indices), chunk)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        out = []
        for recs in pool.map(_run_chunk, [(config, mu, p) for p in parts]):
            out.extend(recs)
    return out


# -- aggregation --------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    mu: float
    trials: int
    mean_error: float
    ci_low: float
    ci_high: float
    exact_rate: float
    mean_energy: float
    max_energy: float
    mean_samples: float
    max_samples: int
    truncation_rate: float
    exhaustion_rate: float


def _mean(xs):
    return math.fsum(xs) / len(xs)


def aggregate(records) -> GridPoint:
    """Pure fold of one grid point's records; order-independent and exact under re-reading."""
    if not records:
        raise ValueError("no records to aggregate")
    k = len(records)
    errs = [float(r.error) for r in records]
    mean = _mean(errs)
    var = math.fsum((e - mean) ** 2 for e in errs) / (k - 1) if k > 1 else 0.0
    half = Z95 * math.sqrt(var / k)
    return GridPoint(
        mu=records[0].mu, trials=k, mean_error=mean, ci_low=mean - half, ci_high=mean + half,
        exact_rate=_mean([1.0 if r.exact else 0.0 for r in records]),
        mean_energy=_mean([r.energy for r in records]), max_energy=max(r.energy for r in records),
        mean_samples=_mean([float(r.samples) for r in records]), max_samples=max(r.samples for r in records),
        truncation_rate=_mean([1.0 if r.truncated else 0.0 for r in records]),
        exhaustion_rate=_mean([1.0 if r.exhausted else 0.0 for r in records]),
    )


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list
    overlay: dict = field(default_factory=dict)
    records: list = field(default_factory=list, repr=False)

    @property
    def mu_star(self):
        """Smallest grid mu whose mean error meets epsilon, else ``None``."""
        for p in self.points:
            if p.mean_error <= self.config.epsilon:
                return p.mu
        return None

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "points": [asdict(p) for p in self.points],
            "mu_star": self.mu_star,
            "overlay": {k: v for k, v in self.overlay.items() if v is not None},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def sweep_mu(config: ExperimentConfig, jobs=1) -> SweepResult:
    records = []
    points = []
    for mu in config.mu_grid:
        recs = run_trials(config, mu, jobs)
        records.extend(recs)
        points.append(aggregate(recs))
    overlay = all_thresholds(config.cls, config.m, config.epsilon)
    return SweepResult(config, points, overlay, records)


def reaggregate(config, records) -> SweepResult:
    """Rebuild a sweep from trial records (for example read back from CSV)."""
    by_mu = {}
    for r in records:
        by_mu.setdefault(r.mu, []).append(r)
    points = [aggregate(by_mu[mu]) for mu in config.mu_grid if mu in by_mu]
    return SweepResult(config, points, all_thresholds(config.cls, config.m, config.epsilon), list(records))


# -- files --------------------------------------------------------------------

def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trials_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_cell(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def write_trials_csv(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(trials_csv(records))


_TYPES = {f.name: f.type for f in fields(TrialRecord)}


def _parse(name, text):
    kind = _TYPES[name]
    if kind in ("bool", bool):
        return text == "true"
    if kind in ("int", int):
        return int(text)
    if kind in ("float", float):
        return float(text)
    return text


def read_trials_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [TrialRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in rows]


def write_json(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def default_jobs():
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return max(1, os.cpu_count() or 1)


__all__ = [
    "ExperimentConfig", "TrialRecord", "GridPoint", "SweepResult", "PROCEDURES", "run_trial",
    "run_trials", "sweep_mu", "aggregate", "reaggregate", "nonadaptive_baseline", "hard_budget_wrapper",
    "parse_mu_grid", "reference_threshold", "trials_csv", "write_trials_csv", "read_trials_csv",
]
