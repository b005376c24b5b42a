import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asl import BudgetExhausted, ConfigError, ProbeBatch, SenseVector, SignalInstance, SSet, SupportSet
from asl.sensing import QueryLog
from conftest import make_oracle


def test_signal_instance_requires_positive_mu():
    s = SupportSet([0], SSet(4, 1))
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ConfigError):
            SignalInstance(s, bad)


def test_measure_mean_and_energy():
    o, _ = make_oracle(SSet(8, 2), [1, 5], mu=3.0, seed=1)
    ys = [o.measure(SenseVector([1, 2, 5], [2.0, 1.0, 0.5])) for _ in range(4000)]
    assert np.mean(ys) == pytest.approx(3.0 * 2.5, abs=0.06)
    assert o.energy_spent == pytest.approx(4000 * 5.25)
    assert o.measurement_count == 4000


def test_hard_cap_refuses_and_flags():
    o, _ = make_oracle(SSet(8, 1), [0], mu=1.0, budget=2.5)
    o.measure(SenseVector.indicator([0, 1], 1.0))
    with pytest.raises(BudgetExhausted):
        o.measure(SenseVector.indicator([0], 1.0))
    assert o.exhausted and o.energy_spent == 2.0


def test_measure_batch_serves_affordable_prefix():
    o, _ = make_oracle(SSet(8, 1), [0], mu=1.0, budget=3.0)
    batch = ProbeBatch.singletons(np.arange(5), 1.0)
    with pytest.raises(BudgetExhausted) as err:
        o.measure_batch(batch)
    assert err.value.served.size == 3
    assert o.energy_spent == 3.0 and o.measurement_count == 3


def test_impose_budget_only_tightens():
    o, _ = make_oracle(SSet(8, 1), [0], mu=1.0)
    o.measure_batch(ProbeBatch.singletons(np.arange(4), 1.0))
    with pytest.raises(ValueError):
        o.impose_budget(3.0)
    o.impose_budget(10.0)
    o.impose_budget(20.0)
    assert o.budget == 10.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 3.0), min_size=1, max_size=40), st.integers(0, 1000))
def test_ledger_matches_exact_sum_and_log_replay(amps, seed):
    o, _ = make_oracle(SSet(50, 3), [0, 7, 9], mu=1.0, seed=seed, log=True)
    sets = [np.arange(i % 7 + 1) for i in range(len(amps))]
    o.measure_batch(ProbeBatch.from_sets(sets, amps))
    o.measure(SenseVector([3, 4], [amps[0], 0.5]))
    # the ledger is the exact sum of the per-query float norms
    exact = sum((Fraction(a * a * float(len(p))) for a, p in zip(amps, sets)), Fraction(0))
    exact += Fraction(math.fsum([amps[0] ** 2, 0.25]))
    assert o.energy_exact == exact
    assert o.replay_energy() == pytest.approx(o.energy_spent, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 50.0), st.integers(0, 1000))
def test_hard_cap_never_exceeded_by_sequential_tests(cap, seed):
    o, _ = make_oracle(SSet(64, 2), [3, 40], mu=0.7, seed=seed, budget=cap)
    batch = ProbeBatch.singletons(np.arange(64), 0.3)
    o.sense_until(batch, 0.2, 0.01, -4.0, 4.0, 10_000)
    assert o.energy_exact <= Fraction(cap)


def test_sense_until_logs_every_step():
    o, _ = make_oracle(SSet(16, 2), [2, 3], mu=1.0, seed=4, log=True)
    batch = ProbeBatch.singletons(np.arange(16), 0.5)
    steps, dec, _ = o.sense_until(batch, 0.5, 0.125, -3.0, 3.0, 1000)
    assert len(o.log) == int(steps.sum()) == o.measurement_count
    assert o.replay_energy() == pytest.approx(o.energy_spent)
    buf = io.StringIO()
    o.export_log(buf, trial=7)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trial,j,sqnorm,y" and len(lines) == 1 + len(o.log)
    assert lines[1].startswith("7,0,")


def test_noise_tape_spans_refills():
    # more steps than one noise chunk forces the kernel to pause and resume
    o, _ = make_oracle(SSet(4, 1), [0], mu=1.0, seed=2)
    batch = ProbeBatch.singletons([1], 1e-3)
    steps, dec, _ = o.sense_until(batch, 1e-3, 0.0, -1e9, 1e9, 200_000)
    assert steps[0] == 200_000 and o.measurement_count == 200_000


def test_query_log_ring_buffer():
    log = QueryLog(capacity=5)
    log.extend(np.arange(3.0), np.arange(3.0))
    assert log.complete and len(log) == 3
    log.extend(np.arange(3.0, 9.0), np.arange(3.0, 9.0))
    assert not log.complete and len(log) == 5 and log.first_index == 4
    sq, _ = log.entries()
    assert sq.tolist() == [4.0, 5.0, 6.0, 7.0, 8.0]
    log.extend(np.arange(9.0, 21.0), np.arange(9.0, 21.0))
    assert log.entries()[0].tolist() == [16.0, 17.0, 18.0, 19.0, 20.0] and log.first_index == 16


def test_probe_index_checked():
    o, _ = make_oracle(SSet(4, 1), [0], mu=1.0)
    with pytest.raises(IndexError):
        o.measure_batch(ProbeBatch.singletons([4], 1.0))
    with pytest.raises(IndexError):
        o.measure(SenseVector([9], [1.0]))


def test_sense_vector_norm_is_compensated():
    v = SenseVector(np.arange(10), [0.1] * 10)
    assert v.squared_norm == math.fsum([0.1 * 0.1] * 10)
    with pytest.raises(ConfigError):
        SenseVector([1, 1], [1.0, 1.0])
