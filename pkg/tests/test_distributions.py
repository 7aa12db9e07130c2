from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluidq.distributions import (Deterministic, DistributionError, Exponential,
                                  HyperExponential, Replay, UniformInterval,
                                  UniformMixture, mix_seed,
                                  require_deadline_law, stream)

FAMILIES = [
    Exponential(1.0),
    Exponential(2.0),
    Deterministic(1.5),
    UniformInterval(0.0, 2.0),
    UniformInterval(1.0, 3.0),
    UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0))),
    HyperExponential(((0.3, 1.0), (0.7, 2.0))),
]


def test_exponential_survival_closed_form():
    law = Exponential(1.0)
    assert law.survival(math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert law.survival(0.0) == 1.0
    assert law.cdf(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)


def test_exponential_integrate_survival():
    law = Exponential(2.0)
    # integral of e^{-2x} over [0, 1]
    assert law.integrate_survival(0.0, 1.0) == pytest.approx(
        (1 - math.exp(-2)) / 2, abs=1e-15)
    assert law.integrate_survival(0.0, math.inf) == pytest.approx(0.5, abs=1e-15)


def test_deterministic_survival_right_continuous():
    law = Deterministic(1.5)
    assert law.survival(1.5 - 1e-12) == 1.0
    assert law.survival(1.5) == 0.0
    assert law.integrate_survival(0.0, 10.0) == 1.5
    assert law.integrate_survival(1.0, 2.0) == 0.5
    assert not law.is_continuous


def test_uniform_inverse_cdf_example():
    law = UniformInterval(1.0, 3.0)
    assert law._inverse_cdf(np.asarray(0.25)) == pytest.approx(1.5, abs=1e-15)


def test_uniform_integrate_survival_piecewise():
    law = UniformInterval(0.0, 2.0)
    # G(x) = 1 - x/2 on [0, 2]: integral over [0, 2] is 1, over [1, 3] is 1/4
    assert law.integrate_survival(0.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert law.integrate_survival(1.0, 3.0) == pytest.approx(0.25, abs=1e-15)
    assert law.integrate_survival(3.0, 5.0) == 0.0


def test_sup_support_values():
    assert UniformInterval(0.0, 2.0).sup_support() == 2.0
    assert Exponential(1.0).sup_support() == math.inf
    assert UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0))).sup_support() == 3.0
    assert Deterministic(1.5).sup_support() == 1.5
    assert HyperExponential(((0.5, 1.0), (0.5, 3.0))).sup_support() == math.inf


def test_mixture_survival_has_flat_stretch():
    law = UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0)))
    assert law.survival(1.0) == pytest.approx(0.5, abs=1e-15)
    assert law.survival(1.7) == pytest.approx(0.5, abs=1e-15)
    assert law.survival(2.0) == pytest.approx(0.5, abs=1e-15)
    assert law.survival(2.5) == pytest.approx(0.25, abs=1e-15)


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(DistributionError):
        UniformMixture(((0.5, 0.0, 1.0), (0.4, 2.0, 3.0)))


@pytest.mark.parametrize("law", FAMILIES, ids=lambda d: type(d).__name__ + repr(d)[:30])
def test_survival_plus_cdf_is_one(law):
    xs = np.linspace(0.0, 5.0, 101)
    np.testing.assert_allclose(law.survival(xs) + law.cdf(xs), 1.0, atol=1e-12)


@given(a=st.floats(0, 5), b=st.floats(0, 5), c=st.floats(0, 5))
@settings(max_examples=60, deadline=None)
def test_integrate_survival_additive(a, b, c):
    lo, mid, hi = sorted((a, b, c))
    for law in FAMILIES:
        whole = law.integrate_survival(lo, hi)
        split = law.integrate_survival(lo, mid) + law.integrate_survival(mid, hi)
        assert abs(whole - split) <= 1e-12


@pytest.mark.parametrize("law", FAMILIES, ids=lambda d: type(d).__name__ + repr(d)[:30])
def test_integrate_survival_matches_quadrature(law):
    from fluidq.numerics import integrate
    hi = min(law.sup_support(), 6.0)
    want = integrate(lambda x: np.asarray(law.survival(x), dtype=float), 0.25, hi)
    assert law.integrate_survival(0.25, hi) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("law", FAMILIES, ids=lambda d: type(d).__name__ + repr(d)[:30])
def test_monte_carlo_mean_within_five_se(law):
    rng = stream(123456, 0)
    samples = law.sample(rng, 1_000_000)
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - law.mean()) <= 5 * max(se, 1e-15)


def test_integrate_survival_converges_to_mean():
    bounded = UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0)))
    assert bounded.integrate_survival(0.0, bounded.sup_support()) == pytest.approx(
        bounded.mean(), abs=1e-9)
    exp = Exponential(2.0)
    assert exp.integrate_survival(0.0, 50.0 / 2.0) == pytest.approx(
        exp.mean(), abs=1e-6)


def test_hyperexponential_oracle_integral():
    law = HyperExponential(((0.3, 1.0), (0.7, 2.0)))
    assert law.integrate_survival(0.0, 1.0) == pytest.approx(
        0.49226881851575286136, abs=1e-12)
    assert law.mean() == pytest.approx(0.3 / 1.0 + 0.7 / 2.0, abs=1e-15)


def test_stream_reproducible_and_independent():
    a = stream(42, 0, 1).random(8)
    b = stream(42, 0, 1).random(8)
    c = stream(42, 0, 2).random(8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mix_seed_deterministic():
    assert mix_seed(7, 10, 3) == mix_seed(7, 10, 3)
    assert mix_seed(7, 10, 3) != mix_seed(7, 10, 4)
    assert 0 <= mix_seed(7, 10, 3) < 2**64


@pytest.mark.parametrize("law,factor", [
    (Exponential(2.0), 10),
    (UniformInterval(1.0, 3.0), 4),
    (Deterministic(1.5), 10),
    (HyperExponential(((0.3, 1.0), (0.7, 2.0))), 5),
    (UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0))), 8),
])
def test_scaled_law_couples_with_divided_samples(law, factor):
    scaled = law.scaled(factor)
    a = scaled.sample(stream(9, 1), 1000)
    b = law.sample(stream(9, 1), 1000) / factor
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)


def test_scaled_exponential_is_rate_scaled():
    assert Exponential(2.0).scaled(10) == Exponential(20.0)
    law = UniformInterval(1.0, 3.0).scaled(4)
    assert (law.lo, law.hi) == (0.25, 0.75)


def test_deadline_law_rejects_discontinuous():
    with pytest.raises(DistributionError):
        require_deadline_law(Deterministic(1.0))
    with pytest.raises(DistributionError):
        require_deadline_law(Replay((1.0,)))
    assert require_deadline_law(Exponential(1.0)) is not None


def test_replay_consumes_in_order_and_errors_on_exhaustion():
    law = Replay((1.0, 2.0, 3.0))
    rng = stream(0)
    assert law.sample(rng) == 1.0
    np.testing.assert_array_equal(law.sample(rng, 2), [2.0, 3.0])
    assert law.remaining == 0
    with pytest.raises(DistributionError):
        law.sample(rng)
    law.reset()
    assert law.remaining == 3
    assert law.sample(rng) == 1.0


def test_replay_has_no_law():
    law = Replay((1.0,))
    with pytest.raises(DistributionError):
        law.survival(0.5)
    with pytest.raises(DistributionError):
        law.mean()
    assert law.scaled(2).samples == (0.5,)


def test_invalid_parameters_rejected():
    with pytest.raises(DistributionError):
        Exponential(0.0)
    with pytest.raises(DistributionError):
        Exponential(-1.0)
    with pytest.raises(DistributionError):
        UniformInterval(2.0, 1.0)
    with pytest.raises(DistributionError):
        Deterministic(0.0)
    with pytest.raises(DistributionError):
        Replay((1.0, -2.0))
    with pytest.raises(DistributionError):
        HyperExponential(((1.0, -1.0),))
