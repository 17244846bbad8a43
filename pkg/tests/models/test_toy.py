"""
Tests for transdim.models.toy: targets with known answers.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from transdim.core.errors import ContractViolation
from transdim.core.sampler import check_move, run_sampler
from transdim.core.state import ChainState, SamplerConfig
from transdim.models.toy import (
    DiscreteSwapMove,
    GaussianTarget,
    NormalMeanModel,
    default_gaussian_toy,
    discrete_toy,
    gaussian_mean_bayes_factor,
    gaussian_mean_problem,
    plus_minus_move,
    swap_stage,
    two_model_toy,
)

DATA = np.array([0.8, -0.3, 1.1, 0.4, 0.9])


class TestGaussianTargets:

    def test_two_model_toy(self):
        space, moves = two_model_toy({1: 0.2, 2: 0.8})
        assert space.indices == [1, 2]
        assert space.model_prior == {1: 0.2, 2: 0.8}
        assert len(moves) == 1

    def test_plus_minus_move(self):
        state = ChainState(1, np.array([0.7]), 0.0, 0.0)
        result = check_move(plus_minus_move(), state, np.array([0.4]))
        assert result.round_trip_error < 1e-12
        assert result.analytic_log_jacobian == pytest.approx(math.log(2.0))
        assert result.jacobian_error < 1e-5

    def test_gaussian_target_density(self):
        target = GaussianTarget(2, [1.0, 0.0], [[1.0, 0.2], [0.2, 2.0]])
        expected = stats.multivariate_normal([1.0, 0.0], [[1.0, 0.2], [0.2, 2.0]]).logpdf([0.5, 0.5])
        assert target.log_prior(np.array([0.5, 0.5])) == pytest.approx(expected)
        assert target.log_likelihood(np.array([0.5, 0.5]), None) == 0.0

    def test_empty_target(self, rng):
        target = GaussianTarget(1, np.zeros(0), np.zeros((0, 0)))
        assert target.dimension == 0
        assert target.log_prior(np.zeros(0)) == 0.0
        assert target.sample_prior(rng, None)[0].shape == (0,)

    def test_default_gaussian_toy(self):
        space = default_gaussian_toy()
        assert space.model_prior == {1: 0.3, 2: 0.7}
        assert space.model(2).dimension == 2


class TestDiscreteToy:
    """Finite grids with a tabulated joint target."""

    def test_exact_probabilities(self):
        toy = discrete_toy()
        probs = toy.exact_probabilities()
        assert len(probs) == 4 + 16
        assert sum(probs.values()) == pytest.approx(1.0)
        models = toy.exact_model_probabilities()
        assert models[1] == pytest.approx(sum(v for key, v in probs.items() if key[0] == 1))

    def test_model_prior_matches_table_mass(self):
        toy = discrete_toy()
        assert toy.space.model_prior[1] == pytest.approx(toy.exact_model_probabilities()[1])

    def test_off_grid_has_no_mass(self):
        model = discrete_toy().space.model(1)
        assert model.log_prior(np.array([1.5])) == -math.inf
        assert model.log_prior(np.array([4.0])) == -math.inf

    def test_shift_move(self):
        (move,) = discrete_toy().moves
        state = ChainState(1, np.array([3.0]), 0.0, 0.0)
        params, _, _ = move.forward(state, np.array([2.0]))
        assert params.tolist() == [3.0, 1.0]
        back, _, u = move.reverse(ChainState(2, params, 0.0, 0.0), np.zeros(0))
        assert back.tolist() == [3.0]
        assert u.tolist() == [2.0]

    def test_swap_stage(self):
        move = swap_stage(np.array([1.0]))
        assert isinstance(move, DiscreteSwapMove)
        params, _, _ = move.forward(ChainState(1, np.array([2.0]), 0.0, 0.0), np.array([0.0]))
        assert params.tolist() == [0.0, 2.0]


class TestGaussianMean:
    """Point null against a normal alternative for the mean."""

    def test_bayes_factor_by_quadrature(self):
        tau = 1.5
        total, n = float(DATA.sum()), DATA.shape[0]

        def integrand(mu):
            return math.exp(mu * total - 0.5 * n * mu ** 2) * stats.norm.pdf(mu, scale=tau)

        value, _ = integrate.quad(integrand, -20.0, 20.0)
        assert gaussian_mean_bayes_factor(DATA, tau) == pytest.approx(value, rel=1e-6)

    def test_exact_posterior(self):
        mean, sd = NormalMeanModel(1.0).posterior(DATA)
        assert mean == pytest.approx(DATA.sum() / 6.0)
        assert sd == pytest.approx(1.0 / math.sqrt(6.0))

    def test_invalid_tau(self):
        with pytest.raises(ContractViolation):
            NormalMeanModel(0.0)

    def test_jump_is_an_insertion(self):
        space, (move,) = gaussian_mean_problem(DATA)
        assert space.model(1).dimension == 0
        state = ChainState(1, np.zeros(0), 0.0, 0.0)
        params, _, u_rev = move.forward(state, np.array([0.25]))
        assert params.tolist() == [0.25]
        assert u_rev.shape == (0,)
        assert move.log_jacobian(state, np.array([0.25])) == 0.0

    @pytest.mark.slow
    def test_sampler_matches_the_bayes_factor(self, rng):
        data = rng.normal(0.3, 1.0, size=20)
        bayes_factor = gaussian_mean_bayes_factor(data)
        space, moves = gaussian_mean_problem(data)
        config = SamplerConfig(iterations=20000, burn_in=1000, seed=8)
        visits = run_sampler(config, space, moves, data).model_sequences()[0]
        assert np.mean(visits == 2) == pytest.approx(bayes_factor / (1.0 + bayes_factor), abs=0.03)
