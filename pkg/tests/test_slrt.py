import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asl import Decision, SSet, SlrtConfig, llr_increment, run_slrt, run_slrt_batch, slrt_boundaries
from asl.slrt import amplitude_rule, default_max_steps
from conftest import make_oracle


def test_boundaries_values():
    l, u = slrt_boundaries(0.05, 0.05)
    assert l == pytest.approx(math.log(0.05 / 0.95)) and u == pytest.approx(math.log(0.95 / 0.05))
    for bad in ((0.0, 0.1), (0.1, 0.5), (0.6, 0.1)):
        with pytest.raises(ValueError):
            slrt_boundaries(*bad)


@given(st.floats(-10, 10), st.floats(0.01, 3), st.floats(0, 5), st.floats(0, 5))
def test_llr_increment_is_the_gaussian_log_density_ratio(y, a, d0, d1):
    ref = mp.log(mp.npdf(y, a * d1, 1) / mp.npdf(y, a * d0, 1))
    assert llr_increment(y, a, d0, d1) == pytest.approx(float(ref), abs=1e-9, rel=1e-9)


@given(st.floats(1e-4, 0.4), st.floats(1e-4, 0.4), st.floats(0.1, 5.0), st.integers(1, 20))
def test_amplitude_rule_fixes_per_step_divergence(alpha, beta, mu, alt):
    a = amplitude_rule(alpha, beta, 0, alt, mu, eta=0.01)
    l, u = slrt_boundaries(alpha, beta)
    assert (a * alt * mu) ** 2 / 2 == pytest.approx(0.01 * min(-l, u))


def test_config_validation():
    with pytest.raises(ValueError):
        SlrtConfig.calibrated(0.05, 0.05, [0], 1, 1, 1.0)
    cfg = SlrtConfig.calibrated(0.05, 0.05, [0], 0, 1, 1.0)
    assert cfg.max_steps == default_max_steps(0.05, 0.05)
    assert cfg.slope == pytest.approx(cfg.amplitude * 1.0)


def _error_rate(on_support, trials=1500):
    cls = SSet(2, 1)
    wrong = 0
    for t in range(trials):
        o, _ = make_oracle(cls, [0], mu=1.0, seed=t)
        cfg = SlrtConfig.calibrated(0.05, 0.05, [0 if on_support else 1], 0, 1, 1.0)
        out = run_slrt(o, cfg)
        wrong += out.accepted_h1 != on_support
    return wrong / trials


def test_error_rates_near_nominal():
    assert _error_rate(False) < 0.07
    assert _error_rate(True) < 0.07


def test_truncated_when_capped_or_refused():
    o, _ = make_oracle(SSet(4, 1), [0], mu=1.0)
    cfg = SlrtConfig.calibrated(0.01, 0.01, [1], 0, 1, 1.0, max_steps=3)
    out = run_slrt(o, cfg)
    assert out.decision is Decision.TRUNCATED and out.steps == 3 and not out.refused
    o, _ = make_oracle(SSet(4, 1), [0], mu=1.0, budget=1e-6)
    out = run_slrt(o, SlrtConfig.calibrated(0.01, 0.01, [1], 0, 1, 1.0))
    assert out.decision is Decision.TRUNCATED and out.refused and out.energy == 0.0


def test_batch_matches_single_tests():
    probes = [[0], [1], [2, 3]]
    o1, _ = make_oracle(SSet(8, 2), [0, 2], mu=1.5, seed=9)
    res = run_slrt_batch(o1, probes, 0.02, 0.05, 0, [1, 1, 2], 1.5)
    o2, _ = make_oracle(SSet(8, 2), [0, 2], mu=1.5, seed=9)
    for i, p in enumerate(probes):
        single = run_slrt(o2, SlrtConfig.calibrated(0.02, 0.05, p, 0, [1, 1, 2][i], 1.5))
        assert single == res.outcome(i)
    assert res.energy.sum() == pytest.approx(o1.energy_spent)
    assert res.samples == o1.measurement_count


def test_batch_rejects_bad_counts():
    o, _ = make_oracle(SSet(4, 1), [0], mu=1.0)
    with pytest.raises(ValueError):
        run_slrt_batch(o, [[0]], 0.05, 0.05, 1, 1, 1.0)


def test_h1_energy_close_to_wald_approximation():
    # expected energy under H1 is about 2 ln(1/alpha) / mu^2 for small amplitude
    energies = []
    for t in range(800):
        o, _ = make_oracle(SSet(2, 1), [0], mu=1.0, seed=10_000 + t)
        energies.append(run_slrt(o, SlrtConfig.calibrated(0.05, 0.05, [0], 0, 1, 1.0)).energy)
    wald = 2 * ((1 - 0.05) * math.log(0.95 / 0.05) + 0.05 * math.log(0.05 / 0.95))
    assert np.mean(energies) == pytest.approx(wald, rel=0.15)
