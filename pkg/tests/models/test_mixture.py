"""
Tests for transdim.models.mixture.
"""

import math

import numpy as np
import pytest
from scipy import stats

from transdim.core.errors import ContractViolation, MoveAborted
from transdim.core.estimation import posterior_model_probs
from transdim.core.moves import DelayedRejectionMove
from transdim.core.sampler import check_move, run_sampler
from transdim.core.state import ChainState, SamplerConfig
from transdim.models.mixture import (
    MixtureBirthDeath,
    MixtureHyper,
    MixtureModel,
    MixtureSplitMerge,
    MixtureState,
    allocated_log_likelihood,
    allocation_probabilities,
    build_mixture_space,
    component_log_prior,
    marginal_log_likelihood,
    mixture_gibbs_allocations,
    mixture_log_posterior,
    sort_by_means,
)
from transdim.models.simulate import simulate_dataset

PARAMS = np.array([0.3, 0.7, -1.0, 2.0, 0.5, 1.5])
DATA = np.array([-1.2, -0.8, 1.5, 2.2, 2.9, 3.1])
ALLOCATIONS = np.array([0, 0, 1, 1, 1, 1])


class TestHyper:

    def test_defaults_from_data_range(self):
        hyper = MixtureHyper.from_data([1.0, 3.0, 5.0])
        assert hyper.xi == 3.0
        assert hyper.kappa == pytest.approx(1 / 16)
        assert hyper.beta == pytest.approx(0.02 * 16)

    def test_overrides_win(self):
        assert MixtureHyper.from_data([0.0, 1.0], k_max=4, xi=10.0).xi == 10.0

    def test_invalid(self):
        with pytest.raises(ContractViolation):
            MixtureHyper(delta=0.0)


class TestDensities:
    """Likelihoods and priors of mixture parameter vectors."""

    def test_single_component_marginal(self):
        params = np.array([1.0, 0.5, 2.0])
        expected = float(np.sum(stats.norm.logpdf(DATA, 0.5, math.sqrt(2.0))))
        assert marginal_log_likelihood(params, DATA) == pytest.approx(expected)

    def test_allocated_likelihood(self):
        expected = float(np.sum(stats.norm.logpdf(DATA[:2], -1.0, math.sqrt(0.5)))
                         + np.sum(stats.norm.logpdf(DATA[2:], 2.0, math.sqrt(1.5))))
        assert allocated_log_likelihood(PARAMS, DATA, ALLOCATIONS) == pytest.approx(expected)

    def test_weights_off_the_simplex(self):
        params = PARAMS.copy()
        params[0] = 0.5
        assert marginal_log_likelihood(params, DATA) == -math.inf
        assert component_log_prior(params, MixtureHyper()) == -math.inf

    def test_prior_is_label_invariant(self):
        swapped = np.array([0.7, 0.3, 2.0, -1.0, 1.5, 0.5])
        hyper = MixtureHyper()
        assert component_log_prior(swapped, hyper) == pytest.approx(component_log_prior(PARAMS, hyper))

    def test_posterior_forms(self):
        hyper = MixtureHyper(k_max=5)
        state = MixtureState.from_params(PARAMS, ALLOCATIONS, hyper)
        marginal = mixture_log_posterior(state, DATA)
        allocated = mixture_log_posterior(state, DATA, form='allocation')
        assert math.isfinite(marginal) and math.isfinite(allocated)
        assert marginal != allocated

    def test_posterior_relabelling(self):
        hyper = MixtureHyper(k_max=5)
        state = MixtureState.from_params(PARAMS, ALLOCATIONS, hyper)
        swapped = MixtureState.from_params(np.array([0.7, 0.3, 2.0, -1.0, 1.5, 0.5]),
                                           1 - ALLOCATIONS, hyper)
        assert mixture_log_posterior(swapped, DATA, 'allocation') == \
            pytest.approx(mixture_log_posterior(state, DATA, 'allocation'))

    def test_posterior_outside_model_range(self):
        state = MixtureState.from_params(PARAMS, hyper=MixtureHyper(k_max=1))
        assert mixture_log_posterior(state, DATA) == -math.inf

    def test_unknown_form(self):
        with pytest.raises(ContractViolation):
            mixture_log_posterior(MixtureState.from_params(PARAMS), DATA, form='complete')


class TestAllocations:

    def test_probabilities_are_normalised(self):
        probs = allocation_probabilities(PARAMS, DATA)
        assert probs.shape == (6, 2)
        assert np.allclose(probs.sum(axis=1), 1.0)
        assert probs[0, 0] > 0.9 and probs[-1, 1] > 0.99

    def test_gibbs_draw(self, rng):
        state = mixture_gibbs_allocations(MixtureState.from_params(PARAMS), DATA, rng)
        assert state.allocations.shape == DATA.shape
        assert set(state.allocations.tolist()) <= {0, 1}
        assert state.allocations[-1] == 1

    def test_sort_by_means_relabels(self):
        params = np.array([0.7, 0.3, 2.0, -1.0, 1.5, 0.5])
        ordered, z = sort_by_means(params, np.array([1, 1, 0, 0]))
        assert np.array_equal(ordered, PARAMS)
        assert z.tolist() == [0, 0, 1, 1]


class TestMixtureModel:
    """Ordered-means model with explicit allocations."""

    def test_unordered_means_have_no_mass(self):
        model = MixtureModel(2, MixtureHyper())
        assert model.log_prior(np.array([0.7, 0.3, 2.0, -1.0, 1.5, 0.5])) == -math.inf

    def test_ordering_factor(self):
        model = MixtureModel(2, MixtureHyper())
        assert model.log_prior(PARAMS) == pytest.approx(component_log_prior(PARAMS, MixtureHyper())
                                                        + math.log(2.0))

    def test_labels(self):
        assert MixtureModel(2, MixtureHyper()).parameter_names()[:3] == ['w[0]', 'w[1]', 'mu[0]']

    def test_prior_draws(self, rng, mixture_data):
        model = MixtureModel(3, MixtureHyper.from_data(mixture_data))
        params, z = model.sample_prior(rng, mixture_data)
        assert np.all(np.diff(params[3:6]) >= 0)
        assert z.shape == mixture_data.shape

    def test_gibbs_sweep(self, rng, mixture_data):
        model = MixtureModel(2, MixtureHyper.from_data(mixture_data, k_max=4))
        params, z = model.sample_prior(rng, mixture_data)
        state = model.evaluate(params, mixture_data, z)
        for _ in range(30):
            state = model.within_model_update(state, None, mixture_data, rng)
        assert state.is_finite()
        means = state.params[2:4]
        assert np.all(np.diff(means) >= 0)
        assert means == pytest.approx([-2.0, 3.0], abs=0.5)

    def test_k_out_of_range(self):
        with pytest.raises(ContractViolation):
            MixtureModel(4, MixtureHyper(k_max=3))


class TestMixtureMoves:
    """Split/merge and birth/death between k and k + 1 components."""

    def test_split_merge_round_trip_with_allocations(self):
        move = MixtureSplitMerge(2, DATA, MixtureHyper())
        state = ChainState(2, PARAMS, 0.0, 0.0, ALLOCATIONS)
        bits = np.array([0, 0, 1, 0, 1, 0], dtype=float)
        u = np.concatenate([[1.0], bits, [0.4, 0.3, 0.5]])
        params, latent, u_rev = move.forward(state, u)
        assert latent.tolist() == [0, 0, 2, 1, 2, 1]
        landed = ChainState(3, params, 0.0, 0.0, latent)
        back, back_latent, back_u = move.reverse(landed, u_rev)
        assert np.allclose(back, PARAMS)
        assert back_latent.tolist() == ALLOCATIONS.tolist()
        assert np.allclose(back_u, u)

    def test_split_bits_outside_the_component(self):
        move = MixtureSplitMerge(2, DATA, MixtureHyper())
        state = ChainState(2, PARAMS, 0.0, 0.0, ALLOCATIONS)
        u = np.concatenate([[1.0], [1, 0, 0, 0, 0, 0], [0.4, 0.3, 0.5]])
        assert move.log_forward_density(state, u) == -math.inf

    def test_birth_death_round_trip(self):
        move = MixtureBirthDeath(2, MixtureHyper())
        state = ChainState(2, PARAMS, 0.0, 0.0)
        result = check_move(move, state, np.array([0.2, 0.5, 1.0]))
        assert result.round_trip_error < 1e-12
        assert result.analytic_log_jacobian == pytest.approx(math.log(0.8))

    def test_birth_shifts_allocations(self):
        move = MixtureBirthDeath(2, MixtureHyper())
        state = ChainState(2, PARAMS, 0.0, 0.0, ALLOCATIONS)
        params, latent, u_rev = move.forward(state, np.array([0.1, 0.0, 1.0]))
        assert u_rev.tolist() == [1.0]
        assert latent.tolist() == [0, 0, 2, 2, 2, 2]

    def test_death_needs_an_empty_component(self, rng):
        move = MixtureBirthDeath(1, MixtureHyper())
        state = ChainState(2, PARAMS, 0.0, 0.0, ALLOCATIONS)
        with pytest.raises(MoveAborted):
            move.draw_reverse(state, rng)

    def test_space_rejects_unknown_moves(self, mixture_data):
        with pytest.raises(ContractViolation):
            build_mixture_space(mixture_data, moves=['swap'])

    @pytest.mark.slow
    @pytest.mark.parametrize('kernel', ['split-merge', 'delayed-rejection'])
    def test_prior_only_recovers_uniform_k(self, kernel):
        space, moves = build_mixture_space(np.zeros(0), MixtureHyper(k_max=5))
        if kernel == 'delayed-rejection':
            moves = [m for m in moves if not isinstance(m, MixtureSplitMerge)] + [
                DelayedRejectionMove(m, m) for m in moves if isinstance(m, MixtureSplitMerge)]
        config = SamplerConfig(iterations=200000, burn_in=5000, seed=13)
        visits = run_sampler(config, space, moves, np.zeros(0)).model_sequences()[0]
        estimate = posterior_model_probs(visits)
        for k in range(1, 6):
            assert abs(estimate.probabilities[k] - 0.2) < 3 * estimate.standard_errors[k]


@pytest.mark.slow
def test_recovers_three_components():
    truth = {'weights': [0.3, 0.4, 0.3], 'means': [-5.0, 0.0, 5.0], 'variances': [0.6, 0.6, 0.6]}
    data = simulate_dataset('mixture', truth, 245, np.random.default_rng(245))
    space, moves = build_mixture_space(data, MixtureHyper.from_data(data, k_max=10))
    config = SamplerConfig(iterations=20000, burn_in=5000, seed=31)
    estimate = posterior_model_probs(run_sampler(config, space, moves, data).model_sequences()[0])
    assert max(estimate.probabilities, key=estimate.probabilities.get) == 3
