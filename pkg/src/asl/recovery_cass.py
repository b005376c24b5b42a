"""Compressive adaptive sense-and-search (CASS): bisection with a fixed measurement schedule.

Each procedure works on "units" (single components, interval bins, columns,
rows or vertices) padded with known-empty units up to ``G * 2**(J-1)``.  Round
``j`` measures every live group once with ``a * sqrt(j)`` times the indicator of
its members, keeps at most ``K`` groups and halves the survivors.  The last
round measures single units.  Padding units carry no components, so the sensing
vectors put no weight on them.

Because the per-round energy carries the factor ``j * 2**-(j-1)``, the total
energy is bounded by ``4 * a**2 * (padded size)`` however many rounds are run.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .classes import Intervals, SSet, Stars, Submatrix
from .errors import BudgetExhausted, ConfigError, SparsityWarning
from .recovery_slrt import RecoveryResult, _Ledger, _finish, _layout, interval_bins
from .sensing import ProbeBatch


def rounds_needed(units, groups):
    """Rounds to go from ``groups`` equal groups down to single units (padding ``units`` up)."""
    per = max(1, math.ceil(units / groups))
    return 1 + max(0, math.ceil(math.log2(per) - 1e-12))


def energy_series(rounds):
    """``sum_{j=1}^{rounds} j * 2**-(j-1)``; never exceeds 4."""
    return math.fsum(j * 2.0 ** (1 - j) for j in range(1, rounds + 1))


class _Bisection:
    """Shared round loop.

    ``members(lo, hi)`` returns the oracle indices covered by units ``lo..hi-1``.
    ``keep`` is the per-round survivor limit; ``threshold`` is the per-unit test
    level in units of ``a * sqrt(j)`` (``None`` keeps the top ``keep`` regardless).
    """

    def __init__(self, oracle, units, groups, keep, members, amplitude, threshold):
        self.oracle = oracle
        self.units = units
        self.groups = groups
        self.keep = keep
        self.members = members
        self.a = amplitude
        self.threshold = threshold
        self.rounds = rounds_needed(units, groups)
        self.padded = groups * 2 ** (self.rounds - 1)
        self.truncated = False
        self.measurements = 0

    def run(self):
        width = self.padded // self.groups
        live = [(g * width, (g + 1) * width) for g in range(self.groups)]
        for j in range(1, self.rounds + 1):
            live = [(lo, hi) for lo, hi in live if lo < self.units]
            sets = [self.members(lo, min(hi, self.units)) for lo, hi in live]
            amp = self.a * math.sqrt(j)
            batch = ProbeBatch.from_sets(sets, amp)
            try:
                y = self.oracle.measure_batch(batch)
            except BudgetExhausted as exc:
                self.truncated = True
                y = np.full(len(batch), -np.inf)
                y[:exc.served.size] = exc.served
            self.measurements += len(batch)
            chosen = self._select(y, amp)
            live = [live[i] for i in chosen]
            if self.truncated:
                break
            if j < self.rounds:
                live = [half for lo, hi in live for half in ((lo, (lo + hi) // 2), ((lo + hi) // 2, hi))]
        return [lo for lo, hi in live if hi - lo == 1 and lo < self.units]

    def _select(self, y, amp):
        order = np.argsort(-y, kind="stable")  # ties go to the lower group index
        if self.threshold is not None:
            order = order[y[order] > self.threshold * amp]
        return np.sort(order[: self.keep])


def _check(epsilon, mu, m):
    if not (0.0 < epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}", field="epsilon")
    if not (mu > 0 and math.isfinite(mu)):
        raise ConfigError(f"working mu must be positive and finite, got {mu!r}", field="mu")
    if not (m > 0 and math.isfinite(m)):
        raise ConfigError(f"budget m must be positive and finite, got {m!r}", field="m")


def _sset_search(oracle, universe, s, budget, mu):
    """CASS for an unstructured ``s``-set inside ``universe`` using at most ``budget`` energy."""
    universe = np.asarray(universe, dtype=np.int64)
    groups = 2 * s
    rounds = rounds_needed(universe.size, groups)
    padded = groups * 2 ** (rounds - 1)
    a = math.sqrt(budget / (4.0 * padded))
    bis = _Bisection(oracle, universe.size, groups, s, lambda lo, hi: universe[lo:hi], a, mu / 2.0)
    found = bis.run()
    return universe[np.asarray(found, dtype=np.int64)], bis


def cass_sset(oracle, n, s, epsilon, m, mu) -> RecoveryResult:
    """Bisection over ``2s`` bins with threshold ``(mu/2) * a * sqrt(j)`` and ``a = sqrt(m/4n)``."""
    cls = SSet(n, s)
    _check(epsilon, mu, m)
    if n < 2 * s:
        raise ConfigError(f"CASS needs n >= 2s (n={n}, s={s})", field="n")
    ledger = _Ledger(oracle)
    ledger.mark()  # a single phase, reported as refinement
    est, bis = _sset_search(oracle, np.arange(n), s, m, mu)
    diag = {"rounds": bis.rounds, "padded_n": bis.padded, "measurements": bis.measurements}
    return _finish(oracle, ledger, est, cls, bis.truncated, diag)


def cass_intervals(oracle, n, s, k, epsilon, m, mu) -> RecoveryResult:
    """Bisection over bins of length ``s/2`` in ``4k`` groups, then one look per candidate component.

    Half the budget goes to each phase.  The search keeps at most ``3k`` groups per
    round; the refinement measures every component of the final bins and their
    neighbours once with energy ``m/(9ks)``.
    """
    cls = Intervals(n, s, k)
    _check(epsilon, mu, m)
    if s < 2:
        raise ConfigError("interval CASS needs s >= 2 for bins of length s/2", field="s")
    if not n > k * s ** 3:
        warnings.warn(f"interval CASS assumes n > k s^3 (n={n}, s={s}, k={k})", SparsityWarning, stacklevel=2)
    length = s // 2
    bins = interval_bins(n, length)
    nb = len(bins)
    groups = 4 * k
    rounds = rounds_needed(nb, groups)
    padded_bins = groups * 2 ** (rounds - 1)
    a = math.sqrt(m / (12.0 * padded_bins * length))
    starts = np.arange(nb) * length

    def members(lo, hi):
        return np.arange(starts[lo], min(starts[hi - 1] + length, n))

    ledger = _Ledger(oracle)
    bis = _Bisection(oracle, nb, groups, 3 * k, members, a, length * mu / 2.0)
    kept = bis.run()
    ledger.mark()
    keep = np.zeros(nb, dtype=bool)
    for b in kept:
        keep[max(0, b - 1):b + 2] = True
    cand = np.concatenate([bins[i] for i in np.flatnonzero(keep)]) if keep.any() else np.empty(0, np.int64)
    b_amp = math.sqrt(m / (9.0 * k * s))
    truncated = bis.truncated
    refine_meas = 0
    est = np.empty(0, dtype=np.int64)
    if cand.size:
        batch = ProbeBatch.singletons(cand, b_amp)
        try:
            y = oracle.measure_batch(batch)
        except BudgetExhausted as exc:
            truncated = True
            y = np.full(cand.size, -np.inf)
            y[:exc.served.size] = exc.served
        refine_meas = cand.size
        est = cand[y > mu * b_amp / 2.0]
    diag = {"rounds": bis.rounds, "padded_bins": padded_bins, "bin_length": length,
            "P_size": int(cand.size), "search_measurements": bis.measurements,
            "refine_measurements": refine_meas}
    return _finish(oracle, ledger, est, cls, truncated, diag)


def cass_star(oracle, p, s, epsilon, m, mu) -> RecoveryResult:
    """Locate the center by keeping the top two of four vertex groups per round, then run s-set CASS.

    A vertex group is measured through the union of edges incident to its vertices.
    The search spends at most ``m/2``; the s-set CASS over the edges of the two
    surviving vertices gets the other half.
    """
    cls = Stars(p, s, 1)
    _check(epsilon, mu, m)
    n = cls.n
    if p < 4:
        raise ConfigError("star CASS needs p >= 4", field="p")
    if math.sqrt(2 * n) < s * s:
        warnings.warn(f"star CASS assumes sqrt(2n) >= s^2 (p={p}, s={s})", SparsityWarning, stacklevel=2)
    ix = cls.indexer
    rounds = rounds_needed(p, 4)
    padded = 4 * 2 ** (rounds - 1)
    a = math.sqrt(m / (8.0 * (p - 1) * padded))

    ledger = _Ledger(oracle)
    bis = _Bisection(oracle, p, 4, 2, lambda lo, hi: ix.edges_of(np.arange(lo, hi)), a, None)
    centers = bis.run()
    ledger.mark()
    cand = ix.edges_of(centers)
    truncated = bis.truncated
    est = np.empty(0, dtype=np.int64)
    refine = None
    if cand.size >= 1:
        est, refine = _sset_search(oracle, cand, min(s, cand.size), m / 2.0, mu)
        truncated |= refine.truncated
    diag = {"search_rounds": bis.rounds, "padded_p": padded, "centers": list(map(int, centers)),
            "P_size": int(cand.size), "search_measurements": bis.measurements,
            "refine_measurements": refine.measurements if refine else 0,
            "refine_rounds": refine.rounds if refine else 0}
    return _finish(oracle, ledger, est, cls, truncated, diag)


def cass_submatrix(oracle, n_r, n_c, s_r, s_c, epsilon, m, mu) -> RecoveryResult:
    """Column CASS with ``a = sqrt(m/8n)``, then row CASS restricted to the chosen columns.

    Works on the transpose when ``s_r < s_c`` so that the longer side is searched first.
    """
    cls = Submatrix(n_r, n_c, s_r, s_c)
    _check(epsilon, mu, m)
    work, transposed, pos = _layout(cls)
    if work.n_c < 2 * work.s_c or work.n_r < 2 * work.s_r:
        raise ConfigError("submatrix CASS needs n_c >= 2 s_c and n_r >= 2 s_r", field="n_c")
    if not work.n_c > work.s_r ** 2 / work.s_c:
        warnings.warn(f"submatrix CASS assumes n_c > s_r^2/s_c ({work})", SparsityWarning, stacklevel=2)
    col_rounds = rounds_needed(work.n_c, 2 * work.s_c)
    padded_c = 2 * work.s_c * 2 ** (col_rounds - 1)
    a_col = math.sqrt(m / (8.0 * work.n_r * padded_c))

    ledger = _Ledger(oracle)
    col = _Bisection(oracle, work.n_c, 2 * work.s_c, work.s_c,
                     lambda lo, hi: pos[:, lo:hi].ravel(), a_col, work.s_r * mu / 2.0)
    chosen = np.asarray(col.run(), dtype=np.int64)
    ledger.mark()
    truncated = col.truncated
    rows = np.empty(0, dtype=np.int64)
    row = None
    if chosen.size:
        row_rounds = rounds_needed(work.n_r, 2 * work.s_r)
        padded_r = 2 * work.s_r * 2 ** (row_rounds - 1)
        a_row = math.sqrt(m / (8.0 * padded_r * work.s_c))
        row = _Bisection(oracle, work.n_r, 2 * work.s_r, work.s_r,
                         lambda lo, hi: pos[lo:hi][:, chosen].ravel(), a_row,
                         chosen.size * mu / 2.0)
        rows = np.asarray(row.run(), dtype=np.int64)
        truncated |= row.truncated
    est = pos[np.ix_(rows, chosen)].ravel()
    diag = {"transposed": transposed, "columns": chosen.tolist(), "rows": rows.tolist(),
            "column_rounds": col.rounds, "row_rounds": row.rounds if row else 0,
            "search_measurements": col.measurements,
            "refine_measurements": row.measurements if row else 0}
    return _finish(oracle, ledger, est, cls, truncated, diag)


# -- schedule maxima ----------------------------------------------------------

def max_measurements_sset(n, s):
    return 2 * s * rounds_needed(n, 2 * s)


def max_measurements_intervals(n, s, k):
    length = s // 2
    nb = math.ceil(n / length)
    r = rounds_needed(nb, 4 * k)
    search = min(4 * k, nb) + (r - 1) * min(6 * k, 2 * 3 * k)
    refine = min(9 * k, nb) * length
    return search + refine


def max_measurements_star(p, s):
    search = 4 * rounds_needed(p, 4)
    return search + max_measurements_sset(2 * (p - 1), s)


def max_measurements_submatrix(n_r, n_c, s_r, s_c):
    work, _ = Submatrix(n_r, n_c, s_r, s_c).normalized()
    return max_measurements_sset(work.n_c, work.s_c) + max_measurements_sset(work.n_r, work.s_r)
