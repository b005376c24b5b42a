"""Two-phase support recovery built from sequential likelihood-ratio tests.

Every procedure first runs a search phase that localises the support to a small
candidate set ``P`` and then a refinement phase of per-component tests inside
``P``.  The s-set procedure is refinement only.  Procedures receive the working
signal magnitude ``mu`` they are calibrated for; the true magnitude lives in the
oracle and is never read.

A hard-budget refusal never escapes as an exception: the affected tests come
back truncated and the estimate is built from the decisions already made.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .classes import EdgeIndexer, Intervals, SSet, Stars, Submatrix, SupportSet
from .errors import ConfigError, SparsityWarning
from .sensing import ProbeBatch
from .slrt import DEFAULT_ETA, run_slrt_batch

# largest beta accepted by the boundaries; the submatrix v2 rule can exceed it for wide s_c
BETA_CEILING = 0.49


@dataclass(frozen=True)
class PhaseBreakdown:
    search_energy: float = 0.0
    refine_energy: float = 0.0
    search_samples: int = 0
    refine_samples: int = 0


@dataclass
class RecoveryResult:
    estimate: SupportSet
    energy: float
    samples: int
    phase_breakdown: PhaseBreakdown
    truncated: bool
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        pb = self.phase_breakdown
        return {
            "estimate": self.estimate.indices.tolist(),
            "energy": self.energy,
            "samples": self.samples,
            "search_energy": pb.search_energy,
            "refine_energy": pb.refine_energy,
            "search_samples": pb.search_samples,
            "refine_samples": pb.refine_samples,
            "truncated": self.truncated,
            "diagnostics": dict(self.diagnostics),
        }


class _Ledger:
    """Snapshots the oracle ledger at phase boundaries."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.marks = [(oracle.energy_exact, oracle.measurement_count)]

    def mark(self):
        self.marks.append((self.oracle.energy_exact, self.oracle.measurement_count))

    def breakdown(self):
        (e0, c0), (e1, c1), (e2, c2) = self.marks[0], self.marks[1], self.marks[-1]
        return PhaseBreakdown(float(e1 - e0), float(e2 - e1), c1 - c0, c2 - c1)

    def totals(self):
        (e0, c0), (e2, c2) = self.marks[0], self.marks[-1]
        return float(e2 - e0), c2 - c0


def _finish(oracle, ledger, estimate, cls, truncated, diagnostics):
    ledger.mark()
    energy, samples = ledger.totals()
    est = SupportSet(np.asarray(estimate, dtype=np.int64), cls)
    truncated = bool(truncated or oracle.exhausted)
    return RecoveryResult(est, energy, samples, ledger.breakdown(), truncated, diagnostics)


def _warn_regime(ok, message):
    if not ok:
        warnings.warn(message, SparsityWarning, stacklevel=3)


def _check_common(epsilon, mu):
    if not (0.0 < epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}", field="epsilon")
    if not (mu > 0 and math.isfinite(mu)):
        raise ConfigError(f"working mu must be positive and finite, got {mu!r}", field="mu")


def _capped(res):
    return int(np.count_nonzero(res.codes == _kernels.CAPPED))


def _refine_singletons(oracle, candidates, alpha, beta, mu, eta):
    candidates = np.asarray(candidates, dtype=np.int64)
    res = run_slrt_batch(oracle, ProbeBatch.singletons(candidates, 1.0), alpha, beta, 0.0, 1.0, mu, eta)
    return candidates[res.accepted], res


# -- s-sets -------------------------------------------------------------------

def recover_sset(oracle, n, s, epsilon, m=None, *, mu, eta=DEFAULT_ETA) -> RecoveryResult:
    """Test every coordinate separately with ``alpha = eps/2n`` and ``beta = eps/2s``."""
    cls = SSet(n, s)
    _check_common(epsilon, mu)
    ledger = _Ledger(oracle)
    ledger.mark()  # no search phase
    alpha, beta = epsilon / (2 * n), epsilon / (2 * s)
    est, res = _refine_singletons(oracle, np.arange(n), alpha, beta, mu, eta)
    diag = {"capped_tests": _capped(res), "refused_tests": int(res.refused.sum())}
    return _finish(oracle, ledger, est, cls, res.truncated.any(), diag)


# -- unions of intervals ------------------------------------------------------

def interval_bins(n, length):
    """Consecutive bins of ``length`` indices; the last one may be shorter."""
    starts = np.arange(0, n, length)
    return [np.arange(a, min(a + length, n)) for a in starts]


def recover_intervals(oracle, n, s, k, epsilon, m=None, *, mu, eta=DEFAULT_ETA,
                      shrink_bins=False) -> RecoveryResult:
    """Search over bins of length ``s/2`` then test each coordinate near accepted bins.

    ``shrink_bins`` uses bins one shorter, which avoids the zero-drift tie a bin
    half covered by the support would otherwise produce when ``s`` is divisible by 4.
    """
    cls = Intervals(n, s, k)
    _check_common(epsilon, mu)
    _warn_regime(n / math.log(4 * n) >= k * s ** 3,
                 f"interval search assumes n/log(4n) >= k s^3 (n={n}, s={s}, k={k})")
    length = max(1, s // 2 - (1 if shrink_bins else 0))
    bins = interval_bins(n, length)
    sizes = np.array([b.size for b in bins], dtype=np.float64)
    alpha, beta = epsilon / (6 * n), epsilon / (8 * k * k * s * s)
    alpha_r, beta_r = epsilon / (4 * n), epsilon / (4 * k * s)

    ledger = _Ledger(oracle)
    search = run_slrt_batch(oracle, bins, alpha, beta, 0.0, sizes, mu, eta)
    ledger.mark()
    acc = search.accepted
    keep = acc.copy()
    keep[1:] |= acc[:-1]
    keep[:-1] |= acc[1:]
    cand = np.concatenate([bins[i] for i in np.flatnonzero(keep)]) if keep.any() else np.empty(0, np.int64)
    est, refine = _refine_singletons(oracle, cand, alpha_r, beta_r, mu, eta)
    diag = {
        "bin_length": length,
        "accepted_bins": int(acc.sum()),
        "P_size": int(cand.size),
        "capped_tests": _capped(search) + _capped(refine),
        "refused_tests": int(search.refused.sum() + refine.refused.sum()),
    }
    truncated = search.truncated.any() or refine.truncated.any()
    return _finish(oracle, ledger, est, cls, truncated, diag)


# -- stars --------------------------------------------------------------------

def _star_search(oracle, cls, null, alpha, beta, alpha_r, beta_r, mu, eta):
    ix: EdgeIndexer = cls.indexer
    ledger = _Ledger(oracle)
    inc = ix.incident
    batch = ProbeBatch(inc.ravel(), np.arange(cls.p + 1, dtype=np.int64) * (cls.p - 1), 1.0)
    search = run_slrt_batch(oracle, batch, alpha, beta, float(null), float(cls.s), mu, eta)
    ledger.mark()
    centers = np.flatnonzero(search.accepted)
    cand = ix.edges_of(centers)
    est, refine = _refine_singletons(oracle, cand, alpha_r, beta_r, mu, eta)
    diag = {
        "accepted_vertices": int(centers.size),
        "P_size": int(cand.size),
        "capped_tests": _capped(search) + _capped(refine),
        "refused_tests": int(search.refused.sum() + refine.refused.sum()),
    }
    truncated = search.truncated.any() or refine.truncated.any()
    return _finish(oracle, ledger, est, cls, truncated, diag)


def recover_star(oracle, p, s, epsilon, m=None, *, mu, eta=DEFAULT_ETA) -> RecoveryResult:
    """Find the center by testing each vertex's incident edges, then test edges at accepted vertices."""
    cls = Stars(p, s, 1)
    _check_common(epsilon, mu)
    if s < 2:
        raise ConfigError("the center test needs s >= 2", field="s")
    n = cls.n
    _warn_regime(math.sqrt(n) / math.log(4 * n) >= s * s,
                 f"star search assumes sqrt(n)/log(4n) >= s^2 (p={p}, s={s})")
    return _star_search(oracle, cls, 1, epsilon / (2 * n), epsilon / (4 * s),
                        epsilon / (4 * n), epsilon / (4 * s), mu, eta)


def recover_union_stars(oracle, p, s, k, epsilon, m=None, *, mu, eta=DEFAULT_ETA) -> RecoveryResult:
    """Union of ``k < s`` vertex-disjoint stars; the center test uses ``k`` versus ``s`` active edges."""
    cls = Stars(p, s, k)
    _check_common(epsilon, mu)
    if not k < s:
        raise ConfigError(f"the union search needs k < s (k={k}, s={s})", field="k")
    n = cls.n
    _warn_regime(math.sqrt(n) / math.log(4 * n) >= k * (s - k) ** 2,
                 f"union-of-stars search assumes sqrt(n)/log(4n) >= k(s-k)^2 (p={p}, s={s}, k={k})")
    return _star_search(oracle, cls, k, epsilon / (2 * n), epsilon / (4 * k * s),
                        epsilon / (4 * n), epsilon / (4 * k * s), mu, eta)


# -- submatrices --------------------------------------------------------------

def _layout(cls: Submatrix):
    """Working class with ``s_r >= s_c`` plus a map from working (row, col) to the oracle's index."""
    work, transposed = cls.normalized()
    pos = np.arange(cls.n, dtype=np.int64).reshape(cls.n_r, cls.n_c)
    if transposed:
        pos = np.ascontiguousarray(pos.T)
    return work, transposed, pos


def recover_submatrix_v1(oracle, n_r, n_c, s_r, s_c, epsilon, m=None, *, mu,
                         eta=DEFAULT_ETA) -> RecoveryResult:
    """Accept active columns, then active rows restricted to them; estimate is their product."""
    cls = Submatrix(n_r, n_c, s_r, s_c)
    _check_common(epsilon, mu)
    work, transposed, pos = _layout(cls)
    n, s = cls.n, cls.sparsity
    _warn_regime(work.n_c / math.log(4 * n) >= work.s_r ** 2 / work.s_c,
                 f"column search assumes n_c/log(4n) >= s_r^2/s_c ({work})")
    a = epsilon / (4 * n)
    b = epsilon / (4 * s)

    ledger = _Ledger(oracle)
    cols = [pos[:, c] for c in range(work.n_c)]
    search = run_slrt_batch(oracle, cols, a, b, 0.0, float(work.s_r), mu, eta)
    ledger.mark()
    chosen = np.flatnonzero(search.accepted)
    rows_hat = np.empty(0, dtype=np.int64)
    refine = None
    if chosen.size:
        probes = [pos[r, chosen] for r in range(work.n_r)]
        refine = run_slrt_batch(oracle, probes, a, b, 0.0, float(work.s_c), mu, eta)
        rows_hat = np.flatnonzero(refine.accepted)
    est = pos[np.ix_(rows_hat, chosen)].ravel()
    diag = {
        "transposed": transposed,
        "accepted_columns": int(chosen.size),
        "accepted_rows": int(rows_hat.size),
        "capped_tests": _capped(search) + (_capped(refine) if refine else 0),
        "refused_tests": int(search.refused.sum() + (refine.refused.sum() if refine else 0)),
    }
    truncated = search.truncated.any() or (refine is not None and refine.truncated.any())
    return _finish(oracle, ledger, est, cls, truncated, diag)


def recover_submatrix_v2(oracle, n_r, n_c, s_r, s_c, epsilon, m=None, *, mu, rng=None,
                         eta=DEFAULT_ETA) -> RecoveryResult:
    """Find one active column, read the active rows off it, then the active columns off one row.

    ``rng`` drives the uniform choice among accepted columns and rows.
    """
    cls = Submatrix(n_r, n_c, s_r, s_c)
    _check_common(epsilon, mu)
    rng = np.random.default_rng(0) if rng is None else rng
    work, transposed, pos = _layout(cls)
    n, s = cls.n, cls.sparsity
    _warn_regime(min(n_r, n_c) / math.log(8 * n) >= work.s_c * work.s_r ** 2,
                 f"single-column search assumes min(n_r,n_c)/log(8n) >= s_c s_r^2 ({work})")
    alpha = epsilon / (16 * n * n)
    beta_raw = (epsilon / (8 * s)) ** (1.0 / work.s_c)
    beta = min(beta_raw, BETA_CEILING)
    alpha_r, beta_r = epsilon / (8 * n), epsilon / (8 * s)

    ledger = _Ledger(oracle)
    cols = [pos[:, c] for c in range(work.n_c)]
    search = run_slrt_batch(oracle, cols, alpha, beta, 0.0, float(work.s_r), mu, eta)
    ledger.mark()
    accepted_cols = np.flatnonzero(search.accepted)
    diag = {"transposed": transposed, "accepted_columns": int(accepted_cols.size),
            "beta_clipped": beta != beta_raw}
    capped = _capped(search)
    refused = int(search.refused.sum())
    truncated = bool(search.truncated.any())
    est = np.empty(0, dtype=np.int64)
    if accepted_cols.size:
        c_star = int(rng.choice(accepted_cols))
        r_idx, res_r = _refine_singletons(oracle, pos[:, c_star], alpha_r, beta_r, mu, eta)
        rows_hat = np.flatnonzero(res_r.accepted)
        capped += _capped(res_r)
        refused += int(res_r.refused.sum())
        truncated |= bool(res_r.truncated.any())
        diag["pivot_column"] = c_star
        if rows_hat.size:
            r_star = int(rng.choice(rows_hat))
            _, res_c = _refine_singletons(oracle, pos[r_star, :], alpha_r, beta_r, mu, eta)
            cols_hat = np.flatnonzero(res_c.accepted)
            capped += _capped(res_c)
            refused += int(res_c.refused.sum())
            truncated |= bool(res_c.truncated.any())
            diag["pivot_row"] = r_star
            est = pos[np.ix_(rows_hat, cols_hat)].ravel()
    diag.update(capped_tests=capped, refused_tests=refused)
    return _finish(oracle, ledger, est, cls, truncated, diag)
