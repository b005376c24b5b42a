"""The noisy linear measurement channel and its energy ledger.

A query with sensing vector ``a`` returns ``<a, x> + w`` where ``x`` equals ``mu``
on the hidden support and zero elsewhere, and ``w`` is standard normal.  The
oracle reads noise from a tape: the j-th query ever served consumes the j-th
normal drawn from the trial's generator, so a fixed seed and query sequence
always reproduce the same observations.

Energy is metered exactly.  Every query's squared norm is a float; the ledger
keeps their sum as a :class:`~fractions.Fraction`, so ``energy_spent`` is the
correctly rounded total and matches ``math.fsum`` over the query log bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .classes import SupportSet
from .errors import BudgetExhausted, ConfigError

NOISE_CHUNK = 1 << 16
LOG_CAPACITY = 1_000_000
# the walk kernel sees the remaining hard budget shrunk by this relative margin,
# so float rounding can never let it overspend; the exact check follows anyway
_ALLOWANCE_GUARD = 1e-9


@dataclass(frozen=True)
class SignalInstance:
    support: SupportSet
    mu: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ConfigError(f"mu must be positive and finite, got {self.mu!r}", field="mu")

    @property
    def n(self):
        return self.support.n


class SenseVector:
    """Sparse sensing vector stored as parallel index and coefficient arrays."""

    __slots__ = ("indices", "coefs", "squared_norm")

    def __init__(self, indices, coefs):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        c = np.broadcast_to(np.asarray(coefs, dtype=np.float64), idx.shape).copy()
        if np.unique(idx).size != idx.size:
            raise ConfigError("sense vector indices must be unique", field="indices")
        self.indices = idx
        self.coefs = c
        self.squared_norm = math.fsum((c * c).tolist())

    @classmethod
    def indicator(cls, indices, amplitude=1.0):
        """``amplitude`` times the indicator of ``indices``."""
        return cls(indices, amplitude)


class ProbeBatch:
    """A list of scaled indicator vectors ``amp[i] * 1_{P_i}`` in CSR layout."""

    __slots__ = ("flat", "offsets", "amps", "sizes")

    def __init__(self, flat, offsets, amps):
        self.flat = np.asarray(flat, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.sizes = np.diff(self.offsets)
        self.amps = np.broadcast_to(np.asarray(amps, dtype=np.float64), self.sizes.shape).copy()

    @classmethod
    def from_sets(cls, sets, amps):
        sets = [np.asarray(p, dtype=np.int64).reshape(-1) for p in sets]
        offsets = np.zeros(len(sets) + 1, dtype=np.int64)
        if sets:
            offsets[1:] = np.cumsum([p.size for p in sets])
            flat = np.concatenate(sets)
        else:
            flat = np.empty(0, dtype=np.int64)
        return cls(flat, offsets, amps)

    @classmethod
    def singletons(cls, indices, amps):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        return cls(idx, np.arange(idx.size + 1, dtype=np.int64), amps)

    def __len__(self):
        return int(self.sizes.size)

    @property
    def sqnorms(self):
        return self.amps * self.amps * self.sizes.astype(np.float64)


class QueryLog:
    """Ring buffer of ``(squared_norm, y)`` pairs; ``complete`` until it first wraps."""

    def __init__(self, capacity=LOG_CAPACITY):
        self.capacity = int(capacity)
        self._sq = np.empty(self.capacity)
        self._y = np.empty(self.capacity)
        self._total = 0

    def extend(self, sq, y):
        sq = np.asarray(sq, dtype=np.float64).reshape(-1)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if sq.size > self.capacity:
            # older entries would be overwritten in this same call; skip writing them
            self._total += sq.size - self.capacity
            sq, y = sq[-self.capacity:], y[-self.capacity:]
        k = sq.size
        start = self._total % self.capacity
        first = min(k, self.capacity - start)
        self._sq[start:start + first] = sq[:first]
        self._y[start:start + first] = y[:first]
        self._sq[:k - first] = sq[first:]
        self._y[:k - first] = y[first:]
        self._total += k

    def __len__(self):
        return min(self._total, self.capacity)

    @property
    def complete(self):
        return self._total <= self.capacity

    @property
    def first_index(self):
        """Global query number (0-based) of the oldest retained entry."""
        return self._total - len(self)

    def entries(self):
        """Retained ``(sqnorms, ys)`` in query order."""
        k = len(self)
        if self._total <= self.capacity:
            return self._sq[:k].copy(), self._y[:k].copy()
        start = self._total % self.capacity
        order = np.r_[start:self.capacity, 0:start]
        return self._sq[order], self._y[order]


class SensingOracle:
    """Stateful measurement channel for a single trial.

    ``budget`` is the hard energy cap (``None`` for ledger-only accounting).  The
    signal is private; procedures interact only through the query methods.
    """

    def __init__(self, instance: SignalInstance, rng: np.random.Generator, budget=None,
                 log=False, log_capacity=LOG_CAPACITY):
        self._instance = instance
        self._mask = instance.support.mask()
        self._mu = float(instance.mu)
        self._rng = rng
        self._buf = np.empty(0)
        self._pos = 0
        self._energy = Fraction(0)
        self._count = 0
        if budget is not None and not (budget >= 0 and math.isfinite(budget)):
            raise ConfigError(f"hard budget must be a finite nonnegative number, got {budget!r}",
                              field="budget")
        self.budget = None if budget is None else float(budget)
        self._cap = None if budget is None else Fraction(float(budget))
        self.exhausted = False
        self.log = QueryLog(log_capacity) if log else None

    def impose_budget(self, cap):
        """Set or tighten the hard cap; it may not fall below what is already spent."""
        cap_exact = Fraction(float(cap))
        if cap_exact < self._energy:
            raise ValueError("cannot impose a cap below the energy already spent")
        if self._cap is None or cap_exact < self._cap:
            self._cap = cap_exact
            self.budget = float(cap)

    # -- ledger ---------------------------------------------------------------

    @property
    def n(self):
        return self._instance.n

    @property
    def energy_spent(self) -> float:
        return float(self._energy)

    @property
    def energy_exact(self) -> Fraction:
        return self._energy

    @property
    def measurement_count(self) -> int:
        return self._count

    @property
    def remaining(self) -> float:
        if self._cap is None:
            return math.inf
        return float(self._cap - self._energy)

    def replay_energy(self) -> float:
        """Recompute spent energy from the query log (requires an unwrapped log)."""
        if self.log is None or not self.log.complete:
            raise RuntimeError("replay needs a complete query log")
        sq, _ = self.log.entries()
        return math.fsum(sq.tolist())

    def export_log(self, path_or_file, trial=0):
        """Write retained log entries as CSV rows ``trial,j,sqnorm,y``."""
        if self.log is None:
            raise RuntimeError("query logging is disabled")
        sq, y = self.log.entries()
        j0 = self.log.first_index
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["trial", "j", "sqnorm", "y"])
            for k, (a, b) in enumerate(zip(sq.tolist(), y.tolist())):
                w.writerow([trial, j0 + k, repr(a), repr(b)])
        finally:
            if own:
                fh.close()

    # -- noise tape -----------------------------------------------------------

    def _take(self, k):
        out = np.empty(k)
        got = 0
        while got < k:
            if self._pos >= self._buf.size:
                self._refill()
            t = min(k - got, self._buf.size - self._pos)
            out[got:got + t] = self._buf[self._pos:self._pos + t]
            self._pos += t
            got += t
        return out

    def _refill(self):
        self._buf = self._rng.standard_normal(NOISE_CHUNK)
        self._pos = 0

    def _charge(self, sqs, steps):
        """Add ``sum(sqs * steps)`` to the ledger exactly; grouping equal norms keeps it cheap."""
        sqs = np.asarray(sqs, dtype=np.float64)
        steps = np.asarray(steps, dtype=np.int64)
        live = steps > 0
        if not live.any():
            return
        vals, inv = np.unique(sqs[live], return_inverse=True)
        counts = np.bincount(inv, weights=steps[live].astype(np.float64))
        for v, c in zip(vals.tolist(), counts.tolist()):
            self._energy += Fraction(v) * int(c)

    def _check_invariant(self):
        if self._cap is not None and self._energy > self._cap:  # pragma: no cover
            raise AssertionError("hard energy cap violated")

    # -- queries --------------------------------------------------------------

    def measure(self, a: SenseVector) -> float:
        """Serve one query; raises :class:`BudgetExhausted` if it would pass the cap."""
        if a.indices.size and (a.indices.min() < 0 or a.indices.max() >= self.n):
            raise IndexError("sense vector index out of range")
        sq = Fraction(a.squared_norm)
        if self._cap is not None and self._energy + sq > self._cap:
            self.exhausted = True
            raise BudgetExhausted(f"query of energy {a.squared_norm} exceeds remaining budget")
        mean = self._mu * math.fsum(a.coefs[self._mask[a.indices]].tolist())
        y = mean + float(self._take(1)[0])
        self._energy += sq
        self._count += 1
        if self.log is not None:
            self.log.extend([a.squared_norm], [y])
        return y

    def _means(self, batch: ProbeBatch):
        if batch.flat.size and (batch.flat.min() < 0 or batch.flat.max() >= self.n):
            raise IndexError("probe index out of range")
        hits = np.zeros(len(batch), dtype=np.int64)
        nonempty = batch.sizes > 0
        if nonempty.any():
            active = self._mask[batch.flat].astype(np.int64)
            csum = np.concatenate(([0], np.cumsum(active)))
            hits = csum[batch.offsets[1:]] - csum[batch.offsets[:-1]]
        return batch.amps * self._mu * hits

    def measure_batch(self, batch: ProbeBatch) -> np.ndarray:
        """One observation per probe, served in order.

        Under a hard cap the longest affordable prefix is served; if that is not the
        whole batch :class:`BudgetExhausted` is raised with ``.served`` holding the
        observations obtained.
        """
        means = self._means(batch)
        sqs = batch.sqnorms
        k = len(batch)
        if self._cap is not None:
            room = self._cap - self._energy
            acc = Fraction(0)
            k = 0
            for v in sqs.tolist():
                if acc + Fraction(v) > room:
                    break
                acc += Fraction(v)
                k += 1
        y = means[:k] + self._take(k)
        self._charge(sqs[:k], np.ones(k, dtype=np.int64))
        self._count += k
        if self.log is not None:
            self.log.extend(sqs[:k], y)
        self._check_invariant()
        if k < len(batch):
            self.exhausted = True
            err = BudgetExhausted(f"served {k} of {len(batch)} queries before the cap")
            err.served = y
            raise err
        return y

    def sense_until(self, batch: ProbeBatch, slopes, offsets, lower, upper, max_steps):
        """Run one sequential test per probe, in order.

        Each test re-senses its probe and accumulates ``slope * y - offset`` until the
        running sum leaves ``(lower, upper)`` or ``max_steps`` is reached.  Returns
        ``(steps, decisions, llr)`` arrays with decision codes from :mod:`asl._kernels`.
        Under a hard cap, the test that runs out of budget and all later ones come
        back as ``REFUSED`` and ``exhausted`` is set; no exception is raised.
        """
        k = len(batch)
        means = self._means(batch)
        sqs = batch.sqnorms
        slopes = np.broadcast_to(np.asarray(slopes, dtype=np.float64), (k,)).copy()
        offs = np.broadcast_to(np.asarray(offsets, dtype=np.float64), (k,)).copy()
        steps = np.zeros(k, dtype=np.int64)
        dec = np.zeros(k, dtype=np.int64)
        llr = np.zeros(k)
        if k == 0:
            return steps, dec, llr
        if self._cap is None:
            allowance = math.inf
        else:
            allowance = float(self._cap - self._energy) * (1.0 - _ALLOWANCE_GUARD)
            allowance = max(allowance, 0.0)
        consumed = [] if self.log is not None else None
        i, s0, l0 = 0, 0, 0.0
        while True:
            if self._pos >= self._buf.size:
                self._refill()
            p0 = self._pos
            i, pos, s0, l0, allowance, status = _kernels.walk(
                self._buf, self._pos, means, slopes, offs, sqs,
                float(lower), float(upper), int(max_steps),
                i, s0, l0, allowance, steps, dec, llr)
            self._pos = int(pos)
            if consumed is not None:
                consumed.append(self._buf[p0:self._pos].copy())
            if status != _kernels.NEED_NOISE:
                break
        if status == _kernels.EXHAUSTED:
            self.exhausted = True
        self._charge(sqs, steps)
        total = int(steps.sum())
        self._count += total
        if consumed is not None:
            w = np.concatenate(consumed) if consumed else np.empty(0)
            self.log.extend(np.repeat(sqs, steps), np.repeat(means, steps) + w)
        self._check_invariant()
        return steps, dec, llr
