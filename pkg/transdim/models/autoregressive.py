"""
Autoregressive models of unknown order.

Model k is AR(k) with parameters ``[noise_variance, a_1..a_k]``. Every order
uses the Gaussian likelihood of the series conditional on its first
``condition_on`` values (k_max by default), so nested orders share one
likelihood and a birth with a new zero coefficient leaves it unchanged.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from transdim.core.errors import ContractViolation, EvaluationError
from transdim.core.moves import ar_birth_scale
from transdim.core.sampler import JumpMove
from transdim.core.state import ModelDefinition, ModelSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ARHyper:
    sigma_a: float = 1.0
    alpha_eps: float = 2.0
    beta_eps: float = 1.0
    k_max: int = 8

    def __post_init__(self):
        if self.sigma_a <= 0 or self.alpha_eps <= 0 or self.beta_eps <= 0:
            raise ContractViolation("sigma_a, alpha_eps and beta_eps must be positive")
        if self.k_max < 1:
            raise ContractViolation("k_max must be >= 1")

    @classmethod
    def from_series(cls, series, **overrides) -> 'ARHyper':
        """Defaults with beta_eps set to the sample variance of the series."""
        series = np.asarray(series, dtype=float)
        defaults = {}
        if series.size > 1 and np.var(series) > 0:
            defaults['beta_eps'] = float(np.var(series))
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)


@dataclass(frozen=True)
class ARState:
    coefficients: np.ndarray
    noise_variance: float
    hyper: ARHyper = ARHyper()

    @property
    def order(self) -> int:
        return int(self.coefficients.shape[0])

    def to_params(self) -> np.ndarray:
        return np.concatenate([[self.noise_variance], self.coefficients])

    @classmethod
    def from_params(cls, params, hyper: Optional[ARHyper] = None) -> 'ARState':
        params = np.asarray(params, dtype=float)
        return cls(params[1:].copy(), float(params[0]), hyper or ARHyper())


def lagged_design(series: np.ndarray, order: int, condition_on: int) -> Tuple[np.ndarray, np.ndarray]:
    """Response x_t (t >= condition_on) and the matrix of its ``order`` lags."""
    series = np.asarray(series, dtype=float)
    if condition_on < order:
        raise ContractViolation(f"cannot condition on {condition_on} values for order {order}")
    if series.shape[0] <= condition_on:
        raise EvaluationError(
            f"series of length {series.shape[0]} is too short to condition on {condition_on} values"
        )
    response = series[condition_on:]
    lags = np.column_stack([series[condition_on - j:series.shape[0] - j] for j in range(1, order + 1)]) \
        if order else np.zeros((response.shape[0], 0))
    return response, lags


def ar_conditional_log_likelihood(coefficients, noise_variance: float, series,
                                  condition_on: int) -> float:
    if noise_variance <= 0:
        return -math.inf
    response, lags = lagged_design(series, len(coefficients), condition_on)
    residuals = response - lags @ np.asarray(coefficients, dtype=float)
    return float(np.sum(stats.norm.logpdf(residuals, scale=math.sqrt(noise_variance))))


def ar_parameter_log_prior(coefficients, noise_variance: float, hyper: ARHyper) -> float:
    if noise_variance <= 0:
        return -math.inf
    return float(
        np.sum(stats.norm.logpdf(coefficients, scale=hyper.sigma_a))
        + stats.invgamma.logpdf(noise_variance, hyper.alpha_eps, scale=hyper.beta_eps)
    )


def ar_log_posterior(state: ARState, series, condition_on: Optional[int] = None) -> float:
    """
    Unnormalised log posterior: conditional Gaussian likelihood given the
    first ``condition_on`` values (default: the order), N(0, sigma_a^2)
    coefficients, inverse-gamma noise variance and uniform order on 1..k_max.

    Raises:
        EvaluationError: If the series has no values beyond the conditioning set.
    """
    if not 1 <= state.order <= state.hyper.k_max:
        return -math.inf
    c = state.order if condition_on is None else condition_on
    log_prior = ar_parameter_log_prior(state.coefficients, state.noise_variance, state.hyper)
    if not math.isfinite(log_prior):
        return -math.inf
    return (log_prior - math.log(state.hyper.k_max)
            + ar_conditional_log_likelihood(state.coefficients, state.noise_variance, series, c))


class ARModel(ModelDefinition):
    """AR(k); params ``[noise_variance, a_1..a_k]``."""

    def __init__(self, k: int, hyper: ARHyper, condition_on: Optional[int] = None):
        if not 1 <= k <= hyper.k_max:
            raise ContractViolation(f"order {k} outside 1..{hyper.k_max}")
        self.index = int(k)
        self.dimension = int(k) + 1
        self.hyper = hyper
        self.condition_on = hyper.k_max if condition_on is None else int(condition_on)

    def parameter_labels(self):
        return [('sigma2', 0)] + [('a', j) for j in range(1, self.index + 1)]

    def log_prior(self, params, latent=None):
        return ar_parameter_log_prior(params[1:], params[0], self.hyper)

    def log_likelihood(self, params, data, latent=None):
        return ar_conditional_log_likelihood(params[1:], params[0], data, self.condition_on)

    def sample_prior(self, rng, data):
        h = self.hyper
        noise = float(stats.invgamma.rvs(h.alpha_eps, scale=h.beta_eps, random_state=rng))
        return np.concatenate([[noise], rng.normal(0.0, h.sigma_a, size=self.index)]), None

    def within_model_update(self, state, scale, data, rng):
        """Conjugate Gibbs: coefficients given the variance, then the variance."""
        h = self.hyper
        response, lags = lagged_design(data, self.index, self.condition_on)
        noise = state.params[0]
        precision = lags.T @ lags / noise + np.eye(self.index) / h.sigma_a ** 2
        chol = np.linalg.cholesky(precision)
        mean = np.linalg.solve(precision, lags.T @ response / noise)
        # z ~ N(0, I) mapped through L^{-T} has covariance precision^{-1}
        coefficients = mean + np.linalg.solve(chol.T, rng.standard_normal(self.index))
        residuals = response - lags @ coefficients
        noise = float(stats.invgamma.rvs(h.alpha_eps + 0.5 * response.shape[0],
                                         scale=h.beta_eps + 0.5 * float(residuals @ residuals),
                                         random_state=rng))
        return self.evaluate(np.concatenate([[noise], coefficients]), data)


class ARBirthDeath(JumpMove):
    """AR(k) -> AR(k+1) by appending a_{k+1} = scale * u, u ~ N(0, 1); death drops it."""

    def __init__(self, k: int, scale: float):
        if scale <= 0:
            raise ContractViolation("birth scale must be positive")
        self.source, self.target = int(k), int(k) + 1
        self.scale = float(scale)
        self.forward_dim = 1
        self.reverse_dim = 0

    def forward(self, state, u):
        return np.concatenate([state.params, [self.scale * u[0]]]), None, np.zeros(0)

    def reverse(self, state, u_rev):
        return state.params[:-1].copy(), None, np.array([state.params[-1] / self.scale])

    def draw_forward(self, state, rng):
        return rng.standard_normal(1)

    def draw_reverse(self, state, rng):
        return np.zeros(0)

    def log_forward_density(self, state, u):
        return float(stats.norm.logpdf(u[0]))

    def log_reverse_density(self, state, u_rev):
        return 0.0

    def log_jacobian(self, state, u):
        return math.log(self.scale)


def build_ar_space(series, hyper: Optional[ARHyper] = None,
                   birth_scale: Optional[float] = None) -> Tuple[ModelSpace, List[JumpMove]]:
    """
    Orders 1..k_max, uniform prior, nearest-neighbour jumps. Birth scales come
    from the zeroth-order centering solution unless ``birth_scale`` is given.
    """
    series = np.asarray(series, dtype=float)
    hyper = hyper or ARHyper.from_series(series)
    if series.shape[0] <= hyper.k_max:
        raise EvaluationError(f"series of length {series.shape[0]} is too short for k_max={hyper.k_max}")
    space = ModelSpace.from_models([ARModel(k, hyper) for k in range(1, hyper.k_max + 1)])
    moves: List[JumpMove] = []
    for k in range(1, hyper.k_max):
        scale = birth_scale or ar_birth_scale(hyper.sigma_a, space.jump_probability(k, k + 1),
                                              space.jump_probability(k + 1, k))
        moves.append(ARBirthDeath(k, scale))
    return space, moves
