"""Sequential likelihood-ratio tests between two Gaussian drifts.

A test repeatedly senses ``a * 1_P`` and compares the hypotheses that ``P`` holds
``null_count`` versus ``alt_count`` active components.  Each observation is then
``N(a*d, 1)`` with ``d = count * mu`` and the log-likelihood ratio walks until it
leaves ``(l, u)``.

The amplitude ``a`` is finite here.  The default rule keeps the per-step KL
divergence at ``eta * min(|l|, u)`` so the overshoot past a boundary is small and
the realised error rates stay near the nominal ``alpha`` and ``beta``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .sensing import ProbeBatch

DEFAULT_ETA = 0.01
CAP_FACTOR = 40


class Decision(enum.Enum):
    ACCEPT_H0 = "AcceptH0"
    ACCEPT_H1 = "AcceptH1"
    TRUNCATED = "Truncated"


def slrt_boundaries(alpha: float, beta: float) -> tuple[float, float]:
    """Return ``(l, u) = (log(beta/(1-alpha)), log((1-beta)/alpha))``."""
    for name, v in (("alpha", alpha), ("beta", beta)):
        if not (0.0 < v < 0.5):
            raise ValueError(f"{name} must lie in (0, 1/2), got {v!r}")
    return math.log(beta / (1.0 - alpha)), math.log((1.0 - beta) / alpha)


def llr_increment(y, a, d0, d1):
    """Log density ratio of ``N(a*d1, 1)`` to ``N(a*d0, 1)`` at ``y``."""
    return a * (d1 - d0) * y - a * a * (d1 * d1 - d0 * d0) / 2.0


def amplitude_rule(alpha, beta, null_count, alt_count, mu, eta=DEFAULT_ETA):
    """Amplitude whose per-step KL divergence equals ``eta * min(|l|, u)``."""
    if not alt_count > null_count:
        raise ValueError("alt_count must exceed null_count")
    if not (mu > 0 and eta > 0):
        raise ValueError("mu and eta must be positive")
    l, u = slrt_boundaries(alpha, beta)
    return math.sqrt(2.0 * eta * min(-l, u)) / ((alt_count - null_count) * mu)


def default_max_steps(alpha, beta, eta=DEFAULT_ETA):
    l, u = slrt_boundaries(alpha, beta)
    kl = eta * min(-l, u)
    return int(math.ceil(CAP_FACTOR * (u - l) / kl))


@dataclass(frozen=True)
class SlrtConfig:
    alpha: float
    beta: float
    amplitude: float
    probe_set: tuple
    null_count: float
    alt_count: float
    mu: float
    max_steps: int

    def __post_init__(self):
        slrt_boundaries(self.alpha, self.beta)
        if not self.null_count < self.alt_count:
            raise ValueError("null_count must be smaller than alt_count")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @classmethod
    def calibrated(cls, alpha, beta, probe_set, null_count, alt_count, mu, eta=DEFAULT_ETA,
                   max_steps=None):
        a = amplitude_rule(alpha, beta, null_count, alt_count, mu, eta)
        if max_steps is None:
            max_steps = default_max_steps(alpha, beta, eta)
        return cls(alpha, beta, a, tuple(int(i) for i in probe_set), null_count, alt_count,
                   mu, max_steps)

    @property
    def boundaries(self):
        return slrt_boundaries(self.alpha, self.beta)

    @property
    def slope(self):
        return self.amplitude * (self.alt_count - self.null_count) * self.mu

    @property
    def offset(self):
        d0, d1 = self.null_count * self.mu, self.alt_count * self.mu
        return self.amplitude ** 2 * (d1 * d1 - d0 * d0) / 2.0


@dataclass(frozen=True)
class SlrtOutcome:
    decision: Decision
    steps: int
    energy: float
    final_llr: float
    refused: bool = False

    @property
    def accepted_h1(self):
        return self.decision is Decision.ACCEPT_H1


_DECISIONS = {
    _kernels.H0: Decision.ACCEPT_H0,
    _kernels.H1: Decision.ACCEPT_H1,
    _kernels.CAPPED: Decision.TRUNCATED,
    _kernels.REFUSED: Decision.TRUNCATED,
}


def run_slrt(oracle, config: SlrtConfig) -> SlrtOutcome:
    """Run one test to completion; budget refusal yields a ``Truncated`` outcome."""
    batch = ProbeBatch.from_sets([np.asarray(config.probe_set, dtype=np.int64)], config.amplitude)
    l, u = config.boundaries
    steps, dec, llr = oracle.sense_until(batch, config.slope, config.offset, l, u, config.max_steps)
    st = int(steps[0])
    return SlrtOutcome(
        decision=_DECISIONS[int(dec[0])],
        steps=st,
        energy=st * float(batch.sqnorms[0]),
        final_llr=float(llr[0]),
        refused=int(dec[0]) == _kernels.REFUSED,
    )


@dataclass
class SlrtBatchResult:
    """Outcomes of a run of independent tests, one entry per probe."""

    steps: np.ndarray
    codes: np.ndarray
    llr: np.ndarray
    sqnorms: np.ndarray

    @property
    def accepted(self):
        return self.codes == _kernels.H1

    @property
    def truncated(self):
        return (self.codes == _kernels.CAPPED) | (self.codes == _kernels.REFUSED)

    @property
    def refused(self):
        return self.codes == _kernels.REFUSED

    @property
    def energy(self):
        return self.steps * self.sqnorms

    @property
    def samples(self):
        return int(self.steps.sum())

    def outcome(self, i) -> SlrtOutcome:
        return SlrtOutcome(_DECISIONS[int(self.codes[i])], int(self.steps[i]), float(self.energy[i]),
                           float(self.llr[i]), int(self.codes[i]) == _kernels.REFUSED)


def run_slrt_batch(oracle, probes, alpha, beta, null_counts, alt_counts, mu, eta=DEFAULT_ETA,
                   max_steps=None) -> SlrtBatchResult:
    """Run one calibrated test per probe set, sharing ``alpha``, ``beta`` and ``mu``.

    ``null_counts`` and ``alt_counts`` may be scalars or per-probe arrays, so short
    bins can use their actual sizes in the drift terms.
    """
    if isinstance(probes, ProbeBatch):
        flat, offsets = probes.flat, probes.offsets
    else:
        tmp = ProbeBatch.from_sets(probes, 1.0)
        flat, offsets = tmp.flat, tmp.offsets
    k = offsets.size - 1
    null = np.broadcast_to(np.asarray(null_counts, dtype=np.float64), (k,))
    alt = np.broadcast_to(np.asarray(alt_counts, dtype=np.float64), (k,))
    if np.any(alt <= null):
        raise ValueError("every test needs alt_count > null_count")
    l, u = slrt_boundaries(alpha, beta)
    amps = np.sqrt(2.0 * eta * min(-l, u)) / ((alt - null) * mu)
    batch = ProbeBatch(flat, offsets, amps)
    slopes = amps * (alt - null) * mu
    d0, d1 = null * mu, alt * mu
    offs = amps * amps * (d1 * d1 - d0 * d0) / 2.0
    if max_steps is None:
        max_steps = default_max_steps(alpha, beta, eta)
    steps, codes, llr = oracle.sense_until(batch, slopes, offs, l, u, max_steps)
    return SlrtBatchResult(steps, codes, llr, batch.sqnorms)
