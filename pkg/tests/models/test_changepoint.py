"""
Tests for transdim.models.changepoint.
"""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from transdim.core.errors import ContractViolation, EvaluationError
from transdim.core.estimation import posterior_model_probs
from transdim.core.sampler import check_move, run_sampler
from transdim.core.state import ChainState, SamplerConfig
from transdim.models.changepoint import (
    ChangePointBirthDeath,
    ChangePointHyper,
    ChangePointModel,
    ChangePointState,
    build_changepoint_space,
    changepoint_log_likelihood,
    changepoint_log_posterior,
    check_events,
    split_params,
)
from transdim.models.simulate import simulate_dataset

EVENTS = np.array([0.5, 1.5, 3.0, 6.0, 8.5])


class TestHyper:

    def test_model_prior_is_truncated_poisson(self):
        prior = ChangePointHyper(horizon=10.0, nu=1.0, k_max=3).model_prior()
        assert sum(prior.values()) == pytest.approx(1.0)
        assert prior[0] == pytest.approx(prior[1])
        assert prior[2] / prior[1] == pytest.approx(0.5)
        assert prior[3] / prior[2] == pytest.approx(1 / 3)

    def test_height_rate_from_events(self):
        assert ChangePointHyper.from_events(EVENTS, 10.0).b_h == pytest.approx(2.0)
        assert ChangePointHyper.from_events([], 10.0).b_h == 1.0

    def test_invalid(self):
        with pytest.raises(ContractViolation):
            ChangePointHyper(horizon=0.0)


class TestDensities:
    """Poisson-process likelihood with a step rate."""

    def test_split_params(self):
        positions, heights = split_params([4.0, 1.0, 2.0])
        assert positions.tolist() == [4.0]
        assert heights.tolist() == [1.0, 2.0]
        with pytest.raises(ContractViolation):
            split_params([1.0, 2.0])

    def test_events_outside_the_horizon(self):
        with pytest.raises(EvaluationError):
            check_events([1.0, 12.0], 10.0)

    def test_constant_rate(self):
        assert changepoint_log_likelihood(np.zeros(0), np.array([2.0]), EVENTS, 10.0) == \
            pytest.approx(5 * math.log(2.0) - 20.0)

    def test_one_change_point(self):
        expected = 3 * math.log(1.0) + 2 * math.log(2.0) - (4.0 * 1.0 + 6.0 * 2.0)
        assert changepoint_log_likelihood(np.array([4.0]), np.array([1.0, 2.0]), EVENTS, 10.0) == \
            pytest.approx(expected)

    def test_position_prior(self):
        hyper = ChangePointHyper(horizon=10.0)
        model = ChangePointModel(1, hyper)
        heights = float(np.sum(stats.gamma.logpdf([1.0, 2.0], 1.0)))
        expected = gammaln(4) - 3 * math.log(10.0) + math.log(4.0) + math.log(6.0) + heights
        assert model.log_prior(np.array([4.0, 1.0, 2.0])) == pytest.approx(expected)

    def test_unordered_positions(self):
        model = ChangePointModel(2, ChangePointHyper(horizon=10.0))
        assert model.log_prior(np.array([6.0, 4.0, 1.0, 1.0, 1.0])) == -math.inf

    def test_posterior_adds_the_model_prior(self):
        hyper = ChangePointHyper(horizon=10.0, k_max=3)
        state = ChangePointState(np.array([4.0]), np.array([1.0, 2.0]), hyper)
        model = ChangePointModel(1, hyper)
        params = state.to_params()
        expected = (math.log(hyper.model_prior()[1]) + model.log_prior(params)
                     + model.log_likelihood(params, EVENTS))
        assert changepoint_log_posterior(state, EVENTS) == pytest.approx(expected)


class TestChangePointModel:

    def test_prior_draws_are_ordered(self, rng):
        model = ChangePointModel(4, ChangePointHyper(horizon=10.0))
        params, latent = model.sample_prior(rng, EVENTS)
        positions, heights = split_params(params)
        assert latent is None
        assert np.all(np.diff(positions) > 0)
        assert np.all((positions > 0) & (positions < 10.0))
        assert np.all(heights > 0)

    def test_labels(self):
        assert ChangePointModel(1, ChangePointHyper(horizon=1.0)).parameter_names() == ['s[1]', 'h[0]', 'h[1]']

    def test_sweep_stays_in_support(self, rng, changepoint_events):
        model = ChangePointModel(2, ChangePointHyper.from_events(changepoint_events, 100.0))
        state = model.evaluate(np.array([30.0, 60.0, 1.0, 1.0, 1.0]), changepoint_events)
        for _ in range(50):
            state = model.within_model_update(state, np.full(5, 0.1), changepoint_events, rng)
            positions, heights = split_params(state.params)
            assert np.all(np.diff(np.concatenate([[0.0], positions, [100.0]])) > 0)
        assert state.is_finite()


class TestBirthDeath:
    """Adding a change point preserves the integrated rate."""

    def test_check_move(self):
        move = ChangePointBirthDeath(1, ChangePointHyper(horizon=10.0))
        state = ChainState(1, np.array([4.0, 1.0, 2.0]), 0.0, 0.0)
        result = check_move(move, state, np.array([7.0, 0.3]))
        assert result.round_trip_error < 1e-12
        assert result.analytic_log_jacobian == pytest.approx(math.log(8.0))
        assert result.jacobian_error < 1e-5

    def test_birth_preserves_the_integral(self):
        move = ChangePointBirthDeath(1, ChangePointHyper(horizon=10.0))
        state = ChainState(1, np.array([4.0, 1.0, 2.0]), 0.0, 0.0)
        params, _, u_rev = move.forward(state, np.array([7.0, 0.3]))
        positions, heights = split_params(params)
        assert positions.tolist() == [4.0, 7.0]
        assert heights == pytest.approx([1.0, 1.2, 2.8])
        assert u_rev.tolist() == [1.0]

    def test_reverse_density(self):
        move = ChangePointBirthDeath(2, ChangePointHyper(horizon=10.0))
        assert move.log_reverse_density(None, np.array([1.0])) == pytest.approx(-math.log(3))
        assert move.log_forward_density(None, np.array([11.0, 0.5])) == -math.inf

    def test_space(self, changepoint_events):
        hyper = ChangePointHyper.from_events(changepoint_events, 100.0, k_max=4)
        space, moves = build_changepoint_space(changepoint_events, hyper)
        assert space.indices == [0, 1, 2, 3, 4]
        assert len(moves) == 4
        assert space.model_prior == pytest.approx(hyper.model_prior())

    @pytest.mark.slow
    def test_prior_only_recovers_the_model_prior(self):
        hyper = ChangePointHyper(horizon=10.0, nu=1.0, k_max=3)
        space, moves = build_changepoint_space(np.zeros(0), hyper)
        config = SamplerConfig(iterations=40000, burn_in=2000, seed=21, default_scale=0.3)
        visits = run_sampler(config, space.prior_only(), moves, np.zeros(0)).model_sequences()[0]
        for k, p in hyper.model_prior().items():
            assert abs(np.mean(visits == k) - p) < 0.04


@pytest.mark.slow
def test_recovers_two_change_points():
    truth = {'horizon': 100.0, 'positions': [30.0, 70.0], 'heights': [0.5, 3.0, 0.8]}
    events = simulate_dataset('changepoint', truth, None, np.random.default_rng(70))
    hyper = ChangePointHyper.from_events(events, 100.0, k_max=6)
    space, moves = build_changepoint_space(events, hyper)
    config = SamplerConfig(iterations=20000, burn_in=4000, seed=41, default_scale=0.1)
    estimate = posterior_model_probs(run_sampler(config, space, moves, events).model_sequences()[0])
    assert max(estimate.probabilities, key=estimate.probabilities.get) == 2
