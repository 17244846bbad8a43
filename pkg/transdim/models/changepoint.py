"""
Poisson processes with a piecewise-constant rate on (0, T).

Model k has k change points ``s_1 < ... < s_k`` and k + 1 heights; the
parameter vector is ``[s_1..s_k, h_0..h_k]``. Positions are distributed as the
even order statistics of 2k + 1 uniforms on (0, T), heights are
Gamma(a_h, rate b_h) and k is Poisson(nu) truncated to 0..k_max.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats
from scipy.special import gammaln

from transdim.core.errors import ContractViolation, EvaluationError
from transdim.core.sampler import JumpMove, acceptance_probability
from transdim.core.state import ModelDefinition, ModelSpace, nearest_neighbour_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChangePointHyper:
    horizon: float
    a_h: float = 1.0
    b_h: float = 1.0
    nu: float = 1.0
    k_max: int = 10

    def __post_init__(self):
        if self.horizon <= 0:
            raise ContractViolation("horizon must be positive")
        if self.a_h <= 0 or self.b_h <= 0 or self.nu <= 0:
            raise ContractViolation("a_h, b_h and nu must be positive")
        if self.k_max < 0:
            raise ContractViolation("k_max must be >= 0")

    @classmethod
    def from_events(cls, events, horizon: float, **overrides) -> 'ChangePointHyper':
        """Default b_h = T / n so that the prior mean height equals the empirical rate."""
        n = np.asarray(events).shape[0]
        defaults = dict(horizon=float(horizon), b_h=float(horizon) / n if n else 1.0)
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)

    def model_prior(self):
        """Poisson(nu) truncated to 0..k_max."""
        ks = np.arange(self.k_max + 1)
        log_p = stats.poisson.logpmf(ks, self.nu)
        p = np.exp(log_p - log_p.max())
        p /= p.sum()
        return {int(k): float(v) for k, v in zip(ks, p)}


@dataclass(frozen=True)
class ChangePointState:
    positions: np.ndarray
    heights: np.ndarray
    hyper: ChangePointHyper

    @property
    def k(self) -> int:
        return int(self.positions.shape[0])

    def to_params(self) -> np.ndarray:
        return np.concatenate([self.positions, self.heights])


def split_params(params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=float)
    if params.shape[0] % 2 != 1:
        raise ContractViolation(f"change-point parameter vector must have odd length, got {params.shape[0]}")
    k = params.shape[0] // 2
    return params[:k], params[k:]


def check_events(events, horizon: float) -> np.ndarray:
    events = np.asarray(events, dtype=float)
    if events.size and (events.min() < 0 or events.max() > horizon):
        raise EvaluationError(f"event times must lie in [0, {horizon}]")
    return events


def changepoint_log_likelihood(positions, heights, events, horizon: float) -> float:
    """sum_i log h(t_i) - integral of h over (0, T)."""
    events = check_events(events, horizon)
    if np.any(heights <= 0):
        return -math.inf
    edges = np.concatenate([[0.0], positions, [horizon]])
    steps = np.searchsorted(positions, events, side='right')
    return float(np.sum(np.log(heights[steps])) - np.sum(heights * np.diff(edges)))


def changepoint_parameter_log_prior(positions, heights, hyper: ChangePointHyper) -> float:
    k = positions.shape[0]
    edges = np.concatenate([[0.0], positions, [hyper.horizon]])
    gaps = np.diff(edges)
    if np.any(gaps <= 0) or np.any(heights <= 0):
        return -math.inf
    log_positions = (
        gammaln(2 * k + 2) - (2 * k + 1) * math.log(hyper.horizon) + float(np.sum(np.log(gaps)))
    )
    log_heights = float(np.sum(stats.gamma.logpdf(heights, hyper.a_h, scale=1.0 / hyper.b_h)))
    return log_positions + log_heights


def changepoint_log_posterior(state: ChangePointState, event_times, horizon: Optional[float] = None) -> float:
    """
    Unnormalised log posterior including the truncated Poisson prior on k.

    Raises:
        EvaluationError: If an event lies outside [0, T].
    """
    hyper = state.hyper
    horizon = hyper.horizon if horizon is None else horizon
    if not 0 <= state.k <= hyper.k_max:
        return -math.inf
    log_prior = changepoint_parameter_log_prior(state.positions, state.heights, hyper)
    if not math.isfinite(log_prior):
        check_events(event_times, horizon)
        return -math.inf
    return (math.log(hyper.model_prior()[state.k]) + log_prior
            + changepoint_log_likelihood(state.positions, state.heights, event_times, horizon))


def _reflect(x: float, lo: float, hi: float) -> float:
    width = hi - lo
    x = (x - lo) % (2.0 * width)
    return lo + (2.0 * width - x if x > width else x)


class ChangePointModel(ModelDefinition):
    """k change points; params ``[s_1..s_k, h_0..h_k]``."""

    def __init__(self, k: int, hyper: ChangePointHyper):
        if not 0 <= k <= hyper.k_max:
            raise ContractViolation(f"k={k} outside 0..{hyper.k_max}")
        self.index = int(k)
        self.dimension = 2 * int(k) + 1
        self.hyper = hyper

    def parameter_labels(self):
        return [('s', j) for j in range(1, self.index + 1)] + [('h', j) for j in range(self.index + 1)]

    def log_prior(self, params, latent=None):
        positions, heights = split_params(params)
        return changepoint_parameter_log_prior(positions, heights, self.hyper)

    def log_likelihood(self, params, data, latent=None):
        positions, heights = split_params(params)
        return changepoint_log_likelihood(positions, heights, data, self.hyper.horizon)

    def sample_prior(self, rng, data):
        h = self.hyper
        positions = np.sort(rng.uniform(0.0, h.horizon, size=2 * self.index + 1))[1::2]
        heights = rng.gamma(h.a_h, 1.0 / h.b_h, size=self.index + 1)
        return np.concatenate([positions, heights]), None

    def within_model_update(self, state, scale, data, rng):
        """
        One sweep: each position by a random walk reflected into the interval
        between its neighbours (step ``scale * T``), then each height by a
        log-scale random walk (step ``scale``).
        """
        k = self.index
        horizon = self.hyper.horizon
        for j in range(k):
            params = state.params.copy()
            lo = params[j - 1] if j > 0 else 0.0
            hi = params[j + 1] if j + 1 < k else horizon
            params[j] = _reflect(params[j] + scale[j] * horizon * rng.standard_normal(), lo, hi)
            state = self._metropolis(state, params, 0.0, data, rng)
        for j in range(k + 1):
            params = state.params.copy()
            step = scale[k + j] * rng.standard_normal()
            params[k + j] = params[k + j] * math.exp(step)
            # h'/h from proposing on the log scale
            state = self._metropolis(state, params, step, data, rng)
        return state

    def _metropolis(self, state, params, log_hastings, data, rng):
        candidate = self.evaluate(params, data)
        if not candidate.is_finite():
            return state
        log_r = candidate.log_density - state.log_density + log_hastings
        return candidate if rng.random() < acceptance_probability(log_r) else state


class ChangePointBirthDeath(JumpMove):
    """
    Birth of a change point at s* ~ U(0, T) splitting step j so that its
    integrated rate is preserved:

        h'_j = h_j D u / d1,  h'_{j+1} = h_j D (1 - u) / d2,  u ~ U(0, 1)

    with d1 = s* - s_j, d2 = s_{j+1} - s*, D = d1 + d2. Death removes a
    uniformly chosen change point and merges the two steps. u = [s*, u];
    u' = [index of the removed change point].
    """

    def __init__(self, k: int, hyper: ChangePointHyper):
        self.source, self.target = int(k), int(k) + 1
        self.hyper = hyper
        self.forward_dim = 2
        self.reverse_dim = 0
        self.reverse_discrete = 1

    def _locate(self, positions, s_star):
        j = int(np.searchsorted(positions, s_star))
        edges = np.concatenate([[0.0], positions, [self.hyper.horizon]])
        return j, s_star - edges[j], edges[j + 1] - s_star

    def forward(self, state, u):
        positions, heights = split_params(state.params)
        s_star, v = float(u[0]), float(u[1])
        j, d1, d2 = self._locate(positions, s_star)
        total = d1 + d2
        h_left = heights[j] * total * v / d1
        h_right = heights[j] * total * (1.0 - v) / d2
        new_positions = np.insert(positions, j, s_star)
        new_heights = np.concatenate([heights[:j], [h_left, h_right], heights[j + 1:]])
        return np.concatenate([new_positions, new_heights]), None, np.array([float(j)])

    def reverse(self, state, u_rev):
        positions, heights = split_params(state.params)
        i = int(u_rev[0])
        edges = np.concatenate([[0.0], positions, [self.hyper.horizon]])
        d1, d2 = positions[i] - edges[i], edges[i + 2] - positions[i]
        merged = (heights[i] * d1 + heights[i + 1] * d2) / (d1 + d2)
        v = heights[i] * d1 / (merged * (d1 + d2))
        params = np.concatenate([
            np.delete(positions, i),
            np.concatenate([heights[:i], [merged], heights[i + 2:]]),
        ])
        return params, None, np.array([positions[i], v])

    def draw_forward(self, state, rng):
        return np.array([rng.uniform(0.0, self.hyper.horizon), rng.random()])

    def draw_reverse(self, state, rng):
        return np.array([float(rng.integers(self.target))])

    def log_forward_density(self, state, u):
        if not (0.0 < u[0] < self.hyper.horizon and 0.0 < u[1] < 1.0):
            return -math.inf
        return -math.log(self.hyper.horizon)

    def log_reverse_density(self, state, u_rev):
        return -math.log(self.target) if 0 <= int(u_rev[0]) < self.target else -math.inf

    def log_jacobian(self, state, u):
        positions, heights = split_params(state.params)
        j, d1, d2 = self._locate(positions, float(u[0]))
        return math.log(heights[j]) + 2.0 * math.log(d1 + d2) - math.log(d1) - math.log(d2)


def build_changepoint_space(events, hyper: ChangePointHyper) -> Tuple[ModelSpace, List[JumpMove]]:
    """Models 0..k_max with the truncated Poisson prior and nearest-neighbour jumps."""
    check_events(events, hyper.horizon)
    models = {k: ChangePointModel(k, hyper) for k in range(hyper.k_max + 1)}
    space = ModelSpace(models=models, model_prior=hyper.model_prior(),
                       jump_graph=nearest_neighbour_graph(models))
    moves = [ChangePointBirthDeath(k, hyper) for k in range(hyper.k_max)]
    return space, moves
