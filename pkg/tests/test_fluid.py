from __future__ import annotations

import math

import numpy as np
import pytest

from fluidq.distributions import (Deterministic, DistributionError,
                                  Exponential, UniformInterval,
                                  UniformMixture)
from fluidq.fluid import (BoxMixtureInitial, FluidClass, FluidModelError,
                          FluidModelInput, FluidSolution, InvariantInitial,
                          ZeroInitial, corner_mass_fluid, equilibrium_band,
                          eval_fluid, fluid_abandoning, fluid_age_count,
                          fluid_nonabandoning, fluid_queue_length,
                          invariant_state, residual_deadline_limit,
                          solve_fluid, solve_workload, tau)
from fluidq.measures import Box, upper_right

LN2 = math.log(2.0)


@pytest.fixture(scope="module")
def markovian():
    """Single class, arrival rate 2, service rate 1, exponential deadlines.

    The workload path has the closed form w(t) = ln(2 - (2 - e^{w0}) e^{-t})
    and the equilibrium band degenerates to {ln 2}.
    """
    return FluidModelInput((FluidClass(2.0, 1.0, Exponential(1.0)),))


@pytest.fixture(scope="module")
def uniform_model():
    return FluidModelInput((FluidClass(2.0, 1.0, UniformInterval(0.0, 2.0)),))


@pytest.fixture(scope="module")
def gapped_model():
    law = UniformMixture(((0.5, 0.0, 1.0), (0.5, 2.0, 3.0)))
    return FluidModelInput((FluidClass(2.0, 1.0, law),))


@pytest.fixture(scope="module")
def empty_solution(markovian):
    return solve_fluid(markovian, ZeroInitial(), T=6.0)


@pytest.fixture(scope="module")
def equilibrium_solution(markovian):
    return solve_fluid(markovian, InvariantInitial(LN2), T=6.0)


def closed_form(t, w0):
    return math.log(2.0 - (2.0 - math.exp(w0)) * math.exp(-t))


def test_model_validation(markovian):
    with pytest.raises(FluidModelError):
        FluidClass(-1.0, 1.0, Exponential(1.0))
    with pytest.raises(FluidModelError):
        FluidClass(1.0, 0.0, Exponential(1.0))
    with pytest.raises(DistributionError):
        FluidClass(1.0, 1.0, Deterministic(1.0))
    with pytest.raises(FluidModelError):
        FluidModelInput(())
    with pytest.raises(FluidModelError):
        FluidModelInput((FluidClass(0.5, 1.0, Exponential(1.0)),))
    assert markovian.rho == 2.0
    assert markovian.d_max == math.inf


def test_workload_matches_closed_form(markovian):
    path = solve_workload(markovian, 0.0, 6.0)
    for t in (0.0, 0.25, 1.0, 3.0, 6.0):
        assert path(t) == pytest.approx(closed_form(t, 0.0), abs=1e-9)
    assert path(1.0) == pytest.approx(0.48988012564474997671, abs=1e-9)
    assert path(6.0) == pytest.approx(0.69190703580989502459, abs=1e-9)
    from_above = solve_workload(markovian, 2.0, 6.0)
    assert from_above(1.0) == pytest.approx(1.3819155245221057362, abs=1e-9)


def test_workload_vectorized_evaluation(markovian):
    path = solve_workload(markovian, 0.0, 6.0)
    ts = np.linspace(0.0, 6.0, 17)
    np.testing.assert_allclose(path.at(ts), [path(t) for t in ts], atol=1e-14)
    with pytest.raises(FluidModelError):
        path(6.5)
    with pytest.raises(FluidModelError):
        path.at(np.array([-1.0]))


def test_workload_zero_horizon(markovian):
    path = solve_workload(markovian, 0.3, 0.0)
    assert path(0.0) == 0.3
    assert path.T == 0.0


def test_workload_rejects_bad_inputs(uniform_model):
    with pytest.raises(FluidModelError):
        solve_workload(uniform_model, -0.1, 1.0)
    with pytest.raises(FluidModelError):
        solve_workload(uniform_model, 2.5, 1.0)  # above the deadline support
    with pytest.raises(FluidModelError):
        solve_workload(uniform_model, 0.0, -1.0)


def test_equilibrium_band_examples(markovian, uniform_model, gapped_model):
    w_l, w_u = equilibrium_band(markovian)
    assert w_l == pytest.approx(LN2, abs=1e-9)
    assert w_u == pytest.approx(LN2, abs=1e-9)
    assert equilibrium_band(uniform_model) == pytest.approx((1.0, 1.0), abs=1e-9)
    assert equilibrium_band(gapped_model) == pytest.approx((1.0, 2.0), abs=1e-9)


def test_band_levels_are_fixed_points(markovian, uniform_model, gapped_model):
    for model in (markovian, uniform_model, gapped_model):
        w_l, w_u = equilibrium_band(model)
        for w0 in {w_l, w_u, 0.5 * (w_l + w_u)}:
            path = solve_workload(model, w0, 20.0)
            drift = np.abs(path.at(np.linspace(0.0, 20.0, 81)) - w0)
            assert drift.max() <= 1e-9


@pytest.mark.parametrize("w0_low,w0_high", [(0.0, 0.5), (0.3, 2.0), (LN2, 1.0)])
def test_workload_order_preserved(markovian, w0_low, w0_high):
    low = solve_workload(markovian, w0_low, 6.0)
    high = solve_workload(markovian, w0_high, 6.0)
    ts = np.linspace(0.0, 6.0, 61)
    assert np.all(low.at(ts) <= high.at(ts) + 1e-9)


def test_frontier_map_strictly_increases(empty_solution):
    path = empty_solution.workload
    ts = np.linspace(0.0, 6.0, 241)
    values = np.array([path.phi(t) for t in ts])
    assert np.all(np.diff(values) > 0)


def test_tau_oracles(empty_solution, equilibrium_solution):
    assert tau(empty_solution, 1.0) == pytest.approx(
        0.62011450695827752463, abs=1e-8)
    path = empty_solution.workload
    assert path.tau(1.1) == pytest.approx(0.69418814455548550116, abs=1e-8)
    assert path.tau(1.4) == pytest.approx(0.92727022935850561719, abs=1e-8)
    # at the fixed point w(s) = ln 2, so w(s) + s = t solves to s = t - ln 2
    assert tau(equilibrium_solution, 2.0) == pytest.approx(
        2.0 - LN2, abs=1e-8)
    # before the support edge the frontier already covers t
    assert tau(equilibrium_solution, 0.5) == 0.0
    assert tau(empty_solution, 0.0) == 0.0


def test_tau_consistency_identity(empty_solution):
    path = empty_solution.workload
    for t in (0.5, 1.0, 2.0, 4.5, 6.0):
        s = path.tau(t)
        assert path.phi(s) == pytest.approx(t, abs=1e-7)


def test_workload_at_tau_oracle(empty_solution):
    path = empty_solution.workload
    assert path(path.tau(1.0)) == pytest.approx(
        0.37988549304172247537, abs=1e-8)


def test_performance_functionals_at_t1(empty_solution):
    z = fluid_queue_length(empty_solution, 0, 1.0)
    n = fluid_nonabandoning(empty_solution, 0, 1.0)
    a = fluid_abandoning(empty_solution, 0, 1.0)
    assert z == pytest.approx(0.6321205588285576784, abs=1e-8)
    assert n == pytest.approx(0.48988012564474997671, abs=1e-8)
    assert a == pytest.approx(0.14224043318380770169, abs=1e-8)
    assert z == pytest.approx(n + a, abs=1e-9)


def test_eval_fluid_box_oracle(empty_solution):
    box = Box(0.1, 0.4, 0.2, 0.9)
    assert eval_fluid(empty_solution, 0, 1.0, box) == pytest.approx(
        0.15936364452879842858, abs=1e-8)


def test_eval_fluid_full_quadrant_is_queue_length(empty_solution):
    for t in (0.0, 0.5, 1.0, 3.0, 6.0):
        whole = eval_fluid(empty_solution, 0, t, upper_right(0.0, 0.0))
        assert whole == pytest.approx(
            fluid_queue_length(empty_solution, 0, t), abs=1e-9)


def test_eval_fluid_partition_additivity(empty_solution):
    whole = Box(0.0, 1.2, 0.0, 2.4)
    parts = [Box(x, x + 0.4, y, y + 0.8)
             for x in np.arange(0.0, 1.2, 0.4) for y in np.arange(0.0, 2.4, 0.8)]
    total = sum(eval_fluid(empty_solution, 0, 1.0, b) for b in parts)
    assert total == pytest.approx(
        eval_fluid(empty_solution, 0, 1.0, whole), abs=1e-9)


def test_zero_initial_starts_empty(empty_solution):
    assert empty_solution.w0 == 0.0
    assert fluid_queue_length(empty_solution, 0, 0.0) == 0.0
    assert fluid_nonabandoning(empty_solution, 0, 0.0) == 0.0
    assert fluid_abandoning(empty_solution, 0, 0.0) == 0.0


def test_equilibrium_functionals_are_constant(equilibrium_solution):
    for t in (0.0, 0.7, 2.0, 6.0):
        assert fluid_queue_length(equilibrium_solution, 0, t) == pytest.approx(
            1.0, abs=1e-8)
        assert fluid_nonabandoning(equilibrium_solution, 0, t) == pytest.approx(
            LN2, abs=1e-8)
        assert fluid_abandoning(equilibrium_solution, 0, t) == pytest.approx(
            1.0 - LN2, abs=1e-8)


def test_age_count_identities(empty_solution, equilibrium_solution):
    # zero age threshold recovers the full queue length
    assert fluid_age_count(empty_solution, 0, 1.0, 0.0) == pytest.approx(
        fluid_queue_length(empty_solution, 0, 1.0), abs=1e-9)
    # equilibrium oracle: 2 * (e^{-ln2/2} - e^{-ln2}) = sqrt(2) - 1
    assert fluid_age_count(equilibrium_solution, 0, 1.0, LN2 / 2) == pytest.approx(
        0.4142135623730950488, abs=1e-8)
    # ages at or beyond the workload level have no mass
    assert fluid_age_count(equilibrium_solution, 0, 1.0, 0.8) == pytest.approx(
        0.0, abs=1e-9)
    assert fluid_age_count(equilibrium_solution, 0, 1.0, LN2) == pytest.approx(
        0.0, abs=1e-9)
    with pytest.raises(FluidModelError):
        fluid_age_count(empty_solution, 0, 1.0, 1.5)
    with pytest.raises(FluidModelError):
        fluid_age_count(empty_solution, 0, 1.0, -0.1)


def test_age_count_monotone_in_age(empty_solution):
    ages = np.linspace(0.0, 1.0, 11)
    values = [fluid_age_count(empty_solution, 0, 1.0, u) for u in ages]
    assert all(x >= y - 1e-12 for x, y in zip(values, values[1:]))


def test_invariant_state_oracles(markovian):
    state = invariant_state(markovian, LN2)
    assert state.queue_length(0) == pytest.approx(1.0, abs=1e-12)
    assert state.nonabandoning(0) == pytest.approx(LN2, abs=1e-12)
    assert state.abandoning(0) == pytest.approx(1.0 - LN2, abs=1e-12)
    assert state.measure(0, Box(0.2, 0.5, 0.1, 0.8)) == pytest.approx(
        0.19464719497793125957, abs=1e-12)
    assert state.measure(0, Box(0.0, 0.3, 0.4, 2.0)) == pytest.approx(
        0.18716913118419831409, abs=1e-12)
    # no mass at or beyond the workload level
    assert state.measure(0, upper_right(LN2, 0.0)) == 0.0
    assert state.measure(0, upper_right(0.0, 0.0)) == pytest.approx(
        state.queue_length(0), abs=1e-12)
    assert state.as_initial() == InvariantInitial(LN2)


def test_invariant_state_rejects_levels_outside_band(markovian, gapped_model):
    with pytest.raises(FluidModelError):
        invariant_state(markovian, 0.5)
    with pytest.raises(FluidModelError):
        invariant_state(markovian, 1.0)
    # the gapped band is the whole interval [1, 2]
    invariant_state(gapped_model, 1.0)
    invariant_state(gapped_model, 1.5)
    invariant_state(gapped_model, 2.0)
    with pytest.raises(FluidModelError):
        invariant_state(gapped_model, 2.3)


def test_invariant_initial_is_a_fixed_point_of_the_full_state(gapped_model):
    # pick the interior of the gapped band: the state should not move at all
    solution = solve_fluid(gapped_model, InvariantInitial(1.5), T=8.0)
    state = invariant_state(gapped_model, 1.5)
    boxes = [Box(0.0, 0.8, 0.0, 1.0), Box(0.4, 1.5, 0.5, 2.5),
             upper_right(0.0, 0.0)]
    for t in (0.0, 1.0, 4.0, 8.0):
        for box in boxes:
            assert eval_fluid(solution, 0, t, box) == pytest.approx(
                state.measure(0, box), abs=1e-8)


def test_residual_deadline_limit_oracles(markovian):
    assert residual_deadline_limit(markovian, 0, 1.0, 0.0) == pytest.approx(
        1.2642411176571153568, abs=1e-12)
    assert residual_deadline_limit(markovian, 0, 1.0, 0.5) == pytest.approx(
        0.76680099912840718934, abs=1e-12)
    assert residual_deadline_limit(markovian, 0, 1.0, 1.0) == pytest.approx(
        0.4650883158696592594, abs=1e-12)
    with pytest.raises(FluidModelError):
        residual_deadline_limit(markovian, 0, 1.0, -0.5)


def test_residual_limit_vanishes_beyond_support(uniform_model):
    assert residual_deadline_limit(uniform_model, 0, 1.0, 2.0) == 0.0
    assert residual_deadline_limit(uniform_model, 0, 1.0, 5.0) == 0.0


def test_corner_mass_shrinks_linearly(equilibrium_solution):
    masses = [corner_mass_fluid(equilibrium_solution, 1.0, 0.3, 0.4, kappa)
              for kappa in (0.4, 0.2, 0.1)]
    assert masses[0] > 0
    assert masses[1] <= 0.7 * masses[0] + 1e-9
    assert masses[2] <= 0.7 * masses[1] + 1e-9
    with pytest.raises(FluidModelError):
        corner_mass_fluid(equilibrium_solution, 1.0, 0.3, 0.4, 0.0)


def test_box_mixture_initial_oracles(markovian):
    initial = BoxMixtureInitial(((0, Box(0.0, 1.0, 0.0, 2.0), 1.0),))
    solution = solve_fluid(markovian, initial, T=2.0)
    assert solution.w0 == 1.0
    # queue length at t=0.5: surviving uniform mass 0.375 plus new arrivals
    assert fluid_queue_length(solution, 0, 0.5) == pytest.approx(
        1.1619386805747331528, abs=1e-8)
    # a box that catches only the evolved initial content
    assert eval_fluid(solution, 0, 0.5, Box(0.0, 0.5, 0.25, math.inf)) == \
        pytest.approx(0.3125, abs=1e-8)
    # the diagonal splits the initial mass into eventual-service 3/4, reneging 1/4
    assert fluid_nonabandoning(solution, 0, 0.0) == pytest.approx(0.75, abs=1e-9)
    assert fluid_abandoning(solution, 0, 0.0) == pytest.approx(0.25, abs=1e-9)
    for t in (0.0, 0.3, 0.8, 1.5):
        z = fluid_queue_length(solution, 0, t)
        n = fluid_nonabandoning(solution, 0, t)
        a = fluid_abandoning(solution, 0, t)
        assert z == pytest.approx(n + a, abs=1e-8)


def test_box_mixture_validation(markovian, uniform_model):
    with pytest.raises(FluidModelError):
        solve_fluid(markovian, BoxMixtureInitial(()), T=1.0)
    with pytest.raises(FluidModelError):
        BoxMixtureInitial(((0, upper_right(0.0, 0.0), 1.0),)).validate(markovian)
    with pytest.raises(FluidModelError):
        BoxMixtureInitial(((0, Box(0.0, 0.0, 0.0, 1.0), 1.0),)).validate(markovian)
    with pytest.raises(FluidModelError):
        BoxMixtureInitial(((1, Box(0.0, 1.0, 0.0, 1.0), 1.0),)).validate(markovian)
    with pytest.raises(FluidModelError):
        BoxMixtureInitial(((0, Box(0.0, 1.0, 0.0, 1.0), -1.0),)).validate(markovian)
    # support edge above the largest deadline cannot have arisen from arrivals
    tall = BoxMixtureInitial(((0, Box(0.0, 3.0, 0.0, 1.0), 1.0),))
    with pytest.raises(FluidModelError):
        tall.validate(uniform_model)


def test_multiclass_conservation():
    model = FluidModelInput((
        FluidClass(1.2, 1.0, Exponential(1.0)),
        FluidClass(1.0, 0.8, UniformInterval(0.0, 2.0)),
    ))
    solution = solve_fluid(model, ZeroInitial(), T=3.0)
    for k in range(model.K):
        for t in (0.5, 1.5, 3.0):
            z = fluid_queue_length(solution, k, t)
            n = fluid_nonabandoning(solution, k, t)
            a = fluid_abandoning(solution, k, t)
            assert z == pytest.approx(n + a, abs=1e-8)
            assert eval_fluid(solution, k, t, upper_right(0.0, 0.0)) == \
                pytest.approx(z, abs=1e-8)


def test_solution_band_property(empty_solution):
    w_l, w_u = empty_solution.band
    assert w_l == pytest.approx(LN2, abs=1e-9)
    assert w_u == pytest.approx(LN2, abs=1e-9)
