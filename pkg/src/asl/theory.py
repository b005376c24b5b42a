"""Closed-form signal-strength thresholds and sample-count bounds.

Labels follow the proposition numbering used across this package:

* sufficient (SLRT procedures): ``Prop1``..``Prop6``
* sufficient (CASS): ``CASS_sset``, ``Prop19``, ``Prop19_text`` (the search/refine
  maximum derived in the running text), ``StarCASS``, ``Prop20`` (submatrix CASS)
* necessary, non-adaptive: ``Prop7``..``Prop10``
* necessary, adaptive: ``Prop11``..``Prop18``
* sample counts: ``Lemma10`` (constant taken as 1) and the CASS caps

Logarithms are natural except the base-2 logs in the sample caps.  A sufficient
value is ``None`` where its formula is undefined (for example ``s = 1`` for the
star search).  A necessary value whose radicand is negative is reported as 0,
since the bound is then vacuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .classes import Intervals, SSet, Stars, Submatrix, class_to_dict, star_packing_bound
from .errors import ConfigError

SCHEMA_VERSION = 1


def _sqrt_or_none(x):
    return math.sqrt(x) if x is not None and x > 0 and math.isfinite(x) else None


def _sqrt_floor0(x):
    return math.sqrt(x) if x > 0 else 0.0


def _check_inputs(m, epsilon):
    if not (m > 0 and math.isfinite(m)):
        raise ConfigError(f"budget m must be positive and finite, got {m!r}", field="m")
    if not (0.0 < epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}", field="eps")


# -- sufficient ---------------------------------------------------------------

def sufficient_mu(cls, m, epsilon) -> dict:
    _check_inputs(m, epsilon)
    e, ln = epsilon, math.log
    out = {}
    if isinstance(cls, SSet):
        n, s = cls.n, cls.s
        out["Prop1"] = math.sqrt(2 * n / m * ln(2 * s / e) + 2 * s / m * ln(2 * n / e))
        out["CASS_sset"] = math.sqrt(32 * n / m * ln(2 * s / e))
    elif isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        out["Prop2"] = math.sqrt(30 * n / (s * s * m) * ln(2 * math.sqrt(2) * k * s / e))
        out["Prop19"] = math.sqrt(768 * n / (s * s * m) * ln(3 * math.sqrt(2) * k * s / e))
        out["Prop19_text"] = math.sqrt(max(384 * n / (s * s * m) * ln(9 * k / e),
                                           72 * k * s / m * ln(9 * k * s / (2 * e))))
    elif isinstance(cls, Stars):
        n, s, k = cls.n, cls.s, cls.k
        if k == 1:
            out["Prop3"] = (math.sqrt(16 * n / ((s - 1) ** 2 * m) * ln(4 * s / e)) if s > 1 else None)
            out["StarCASS"] = math.sqrt(392 * n / (s * s * m) * ln(9 * s / e))
        out["Prop4"] = (math.sqrt(16 * n / ((s - k) ** 2 * m) * ln(4 * s * k / e)) if k < s else None)
    elif isinstance(cls, Submatrix):
        w, _ = cls.normalized()
        n, s = w.n, w.sparsity
        out["Prop5"] = math.sqrt(8 * n / (w.s_r ** 2 * m) * ln(4 * s / e))
        out["Prop6"] = math.sqrt(10 * n / (w.s_c * w.s_r ** 2 * m) * ln(8 * s / e))
        out["Prop20"] = math.sqrt(128 * n / (w.s_r ** 2 * m) * ln(2 * s / e))
    else:  # pragma: no cover
        raise ConfigError(f"unsupported class {cls!r}")
    return out


# -- necessary, non-adaptive --------------------------------------------------

def necessary_mu_nonadaptive(cls, m, epsilon) -> dict:
    _check_inputs(m, epsilon)
    f = 1 - 2 * epsilon
    ln = math.log
    out = {}
    if isinstance(cls, SSet):
        n, s = cls.n, cls.s
        out["Prop7"] = _sqrt_floor0(f * n / (4 * m) * ln(n - s)) if n - s > 0 else 0.0
    elif isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        arg = n / s - k
        out["Prop8"] = _sqrt_floor0(f * (n - (k - 1) * s) / (4 * s * s * m) * ln(arg)) if arg > 0 else 0.0
    elif isinstance(cls, Stars):
        if cls.k == 1:
            n, s = cls.n, cls.s
            arg = math.sqrt(2 * n) - s - 1
            out["Prop9"] = _sqrt_floor0(f * n / (2 * m) * ln(arg)) if arg > 0 else 0.0
    elif isinstance(cls, Submatrix):
        n_r, n_c, s_r, s_c = cls.n_r, cls.n_c, cls.s_r, cls.s_c
        n = cls.n
        ratio = max((n_c - s_c) / (s_r * n_c), (n_r - s_r) / (s_c * n_r))
        arg = max(n_r - s_r, n_c - s_c)
        out["Prop10"] = _sqrt_floor0(f * n / (4 * m) * ratio * ln(arg)) if arg > 0 else 0.0
    return out


# -- necessary, adaptive ------------------------------------------------------

def necessary_mu_adaptive(cls, m, epsilon) -> dict:
    _check_inputs(m, epsilon)
    e, ln = epsilon, math.log
    out = {}
    if isinstance(cls, SSet):
        n, s = cls.n, cls.s
        out["Prop11"] = _sqrt_floor0(2 * (n - s + 1) / m * (ln(s / (2 * e)) + ln((n - s + 1) / (n + 1))))
    elif isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        if k == 1:
            out["Prop12"] = max(0.0, (1 - e) * math.sqrt(n / (2 * s * s * m)))
        big = n - s * (k - 1)
        out["Prop13"] = _sqrt_floor0(2 * big / (s * s * m) * (ln(k * s / (8 * e)) + ln(big / (n + s))))
    elif isinstance(cls, Stars):
        p, s, k = cls.p, cls.s, cls.k
        N = float(star_packing_bound(p, s))
        if k == 1:
            out["Prop14"] = (1 - e) * math.sqrt(N / (2 * s * m))
            out["Prop16"] = _sqrt_floor0(2 * (p - s) / m * (ln(s / (2 * e)) + ln((p - s) / p)))
        top = N - k + 1
        if top > 0:
            out["Prop15"] = (1 / s) * _sqrt_floor0(2 * top / (m / s) * (ln(k * s / (8 * e)) + ln(top / (N + 1))))
        else:
            out["Prop15"] = 0.0
    elif isinstance(cls, Submatrix):
        w, _ = cls.normalized()
        n, s = w.n, w.sparsity
        out["Prop17"] = (1 - e) * math.sqrt(n / (2 * s * s * m))
        top = w.n_c - w.s_c + 1
        out["Prop18"] = _sqrt_floor0(2 * top / (w.s_r * m) * (ln(s / (8 * e)) + ln(top / (w.n_c + 1))))
    return out


# -- sample counts ------------------------------------------------------------

def lemma10_samples(n, s, mu, m, c=1.0):
    """Non-adaptive sample lower bound ``c s log(n/s) / log(mu^2 m/n + 1)``."""
    denom = math.log(mu * mu * m / n + 1.0)
    if denom <= 0:
        return math.inf
    return c * s * math.log(n / s) / denom


def sample_caps(cls) -> dict:
    log2 = math.log2
    if isinstance(cls, SSet):
        return {"CASS_sset": 2 * cls.s * log2(cls.n / (2 * cls.s))}
    if isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        return {"Prop19": 3 * k * (log2(n / (2 * k * s)) + 1.5 * s)}
    if isinstance(cls, Stars):
        if cls.k != 1:
            return {}
        p, s = cls.p, cls.s
        return {"StarCASS": 4 * log2(p / 4) + 2 * s * log2((p - 1) / s)}
    if isinstance(cls, Submatrix):
        w, _ = cls.normalized()
        return {"Prop20": 2 * w.s_c * log2(w.n_c / (2 * w.s_c)) + 2 * w.s_r * log2(w.n_r / (2 * w.s_r))}
    return {}


def sample_bounds(cls, mu, m) -> dict:
    out = {f"{k}_cap": v for k, v in sample_caps(cls).items()}
    if mu is not None:
        out["Lemma10"] = lemma10_samples(cls.n, cls.sparsity, mu, m)
    return out


# -- regimes ------------------------------------------------------------------

def regime_checks(cls, epsilon=None) -> list[tuple[str, bool]]:
    ln = math.log
    out = []
    if isinstance(cls, SSet):
        out.append(("n/s integer", cls.n % cls.s == 0))
        out.append(("n >= 2s", cls.n >= 2 * cls.s))
    elif isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        out.append(("n/log(4n) >= k s^3", n / ln(4 * n) >= k * s ** 3))
        out.append(("n > k s^3", n > k * s ** 3))
        out.append(("2n/s integer", (2 * n) % s == 0))
        out.append(("n/s integer", n % s == 0))
    elif isinstance(cls, Stars):
        n, p, s, k = cls.n, cls.p, cls.s, cls.k
        out.append(("sqrt(n)/log(4n) >= s^2", math.sqrt(n) / ln(4 * n) >= s * s))
        out.append(("sqrt(2n) >= s^2", math.sqrt(2 * n) >= s * s))
        out.append(("p/s integer", p % s == 0))
        if k > 1:
            out.append(("k < s", k < s))
            out.append(("sqrt(n)/log(4n) >= k(s-k)^2", math.sqrt(n) / ln(4 * n) >= k * (s - k) ** 2))
    elif isinstance(cls, Submatrix):
        w, _ = cls.normalized()
        n = w.n
        out.append(("n_c/log(4n) >= s_r^2/s_c", w.n_c / ln(4 * n) >= w.s_r ** 2 / w.s_c))
        out.append(("min(n_r,n_c)/log(8n) >= s_c s_r^2", min(w.n_r, w.n_c) / ln(8 * n) >= w.s_c * w.s_r ** 2))
        out.append(("n_c > s_r^2/s_c", w.n_c > w.s_r ** 2 / w.s_c))
        out.append(("n_r/s_r and n_c/s_c integers", w.n_r % w.s_r == 0 and w.n_c % w.s_c == 0))
    if epsilon is not None:
        out.append(("(1-2eps) log M >= 1 (non-adaptive bounds informative)",
                    (1 - 2 * epsilon) * ln(max(_nonadaptive_M(cls), 1)) >= 1))
    return out


def _nonadaptive_M(cls):
    if isinstance(cls, SSet):
        return cls.n - cls.s
    if isinstance(cls, Intervals):
        return cls.n / cls.s - cls.k
    if isinstance(cls, Stars):
        return math.sqrt(2 * cls.n) - cls.s - 1
    return max(cls.n_r - cls.s_r, cls.n_c - cls.s_c)


# -- report -------------------------------------------------------------------

@dataclass
class ThresholdReport:
    cls: object
    m: float
    epsilon: float
    regime_checks: list = field(default_factory=list)
    sufficient_mu: dict = field(default_factory=dict)
    necessary_mu_adaptive: dict = field(default_factory=dict)
    necessary_mu_nonadaptive: dict = field(default_factory=dict)
    sample_caps: dict = field(default_factory=dict)
    sample_lower_nonadaptive: float | None = None
    mu: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "class": class_to_dict(self.cls),
            "m": self.m,
            "epsilon": self.epsilon,
            "mu": self.mu,
            "regime_checks": [{"condition": c, "satisfied": ok} for c, ok in self.regime_checks],
            "sufficient_mu": dict(self.sufficient_mu),
            "necessary_mu_adaptive": dict(self.necessary_mu_adaptive),
            "necessary_mu_nonadaptive": dict(self.necessary_mu_nonadaptive),
            "sample_caps": dict(self.sample_caps),
            "sample_lower_nonadaptive": {"Lemma10": self.sample_lower_nonadaptive, "c": 1},
        }

    def csv_row(self) -> dict:
        """Flat ``{column: value}`` mapping for one CSV line."""
        row = {"class": self.cls.kind}
        row.update(self.cls.params())
        row.update(m=self.m, epsilon=self.epsilon, mu=self.mu)
        for prefix, d in (("suff", self.sufficient_mu), ("nec_ad", self.necessary_mu_adaptive),
                          ("nec_na", self.necessary_mu_nonadaptive), ("cap", self.sample_caps)):
            for k, v in d.items():
                row[f"{prefix}_{k}"] = v
        row["Lemma10"] = self.sample_lower_nonadaptive
        for cond, ok in self.regime_checks:
            row[f"regime[{cond}]"] = ok
        return row


def threshold_report(cls, m, epsilon, mu=None) -> ThresholdReport:
    """Every applicable threshold for ``cls``; ``mu`` (if given) feeds the sample lower bound."""
    rep = ThresholdReport(cls=cls, m=m, epsilon=epsilon, mu=mu)
    rep.regime_checks = regime_checks(cls, epsilon)
    rep.sufficient_mu = sufficient_mu(cls, m, epsilon)
    rep.necessary_mu_adaptive = necessary_mu_adaptive(cls, m, epsilon)
    rep.necessary_mu_nonadaptive = necessary_mu_nonadaptive(cls, m, epsilon)
    rep.sample_caps = sample_caps(cls)
    if mu is not None:
        rep.sample_lower_nonadaptive = lemma10_samples(cls.n, cls.sparsity, mu, m)
    return rep


def all_thresholds(cls, m, epsilon) -> dict:
    """Flat label to value mapping across sufficient and necessary families (for grid specs)."""
    out = {}
    out.update(sufficient_mu(cls, m, epsilon))
    out.update(necessary_mu_adaptive(cls, m, epsilon))
    out.update(necessary_mu_nonadaptive(cls, m, epsilon))
    return out
