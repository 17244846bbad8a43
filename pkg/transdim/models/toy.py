"""
Small targets with known answers, used to check samplers and estimators.

* ``two_model_toy``: models of dimension 1 and 2 joined by theta* +- u.
* ``gaussian_toy``: an exactly Gaussian target in each model with known
  model probabilities.
* ``discrete_toy``: two models on finite grids with a tabulated target.
* ``gaussian_mean_problem``: x_i ~ N(mu, 1) with mu = 0 (M1) against
  mu ~ N(0, tau^2) (M2), which has a closed-form Bayes factor.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from transdim.core.errors import ContractViolation
from transdim.core.sampler import JumpMove, VectorJumpMove
from transdim.core.state import ModelDefinition, ModelSpace


class GaussianTarget(ModelDefinition):
    """theta ~ N(mean, cov) as the whole within-model target; constant likelihood."""

    def __init__(self, index: int, mean, cov):
        self.index = int(index)
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.dimension = int(self.mean.shape[0])
        self.cov = np.asarray(cov, dtype=float).reshape(self.dimension, self.dimension)
        self._frozen = stats.multivariate_normal(self.mean, self.cov) if self.dimension else None

    def log_prior(self, params, latent=None):
        if self.dimension == 0:
            return 0.0
        return float(self._frozen.logpdf(params))

    def log_likelihood(self, params, data, latent=None):
        return 0.0

    def sample_prior(self, rng, data):
        if self.dimension == 0:
            return np.zeros(0), None
        return rng.multivariate_normal(self.mean, self.cov), None


# ------------------------------------------------------------ two-model toy
def plus_minus_forward(params, u):
    return np.array([params[0] + u[0], params[0] - u[0]]), np.zeros(0)


def plus_minus_reverse(params, u_rev):
    return np.array([0.5 * (params[0] + params[1])]), np.array([0.5 * (params[0] - params[1])])


def plus_minus_log_jacobian(params, u):
    return math.log(2.0)


def plus_minus_move(source: int = 1, target: int = 2) -> VectorJumpMove:
    """theta -> (theta + u, theta - u) with u ~ N(0, 1)."""
    return VectorJumpMove(source, target, plus_minus_forward, plus_minus_reverse,
                          plus_minus_log_jacobian, forward_dim=1, reverse_dim=0)


def two_model_toy(model_prior: Optional[Mapping[int, float]] = None) -> Tuple[ModelSpace, List[JumpMove]]:
    """
    Model 1: theta ~ N(0, 1); model 2: theta ~ N(0, I_2); constant
    likelihood, so posterior model probabilities equal ``model_prior``.
    """
    models = [GaussianTarget(1, [0.0], [[1.0]]), GaussianTarget(2, [0.0, 0.0], np.eye(2))]
    space = ModelSpace.from_models(models, model_prior=model_prior or {1: 0.5, 2: 0.5})
    return space, [plus_minus_move()]


# ------------------------------------------------------------ Gaussian toy
def gaussian_toy(means: Mapping[int, Sequence[float]], covariances: Mapping[int, Sequence],
                 model_prior: Mapping[int, float]) -> ModelSpace:
    """Per-model Gaussian targets; exact posterior model probabilities are ``model_prior``."""
    models = [GaussianTarget(k, means[k], covariances[k]) for k in sorted(means)]
    return ModelSpace.from_models(models, model_prior=dict(model_prior))


def default_gaussian_toy() -> ModelSpace:
    return gaussian_toy(
        means={1: [1.0], 2: [-0.5, 2.0]},
        covariances={1: [[0.5]], 2: [[1.0, 0.3], [0.3, 0.4]]},
        model_prior={1: 0.3, 2: 0.7},
    )


# ------------------------------------------------------------ discrete toy
DISCRETE_TOY_SIZE = 4


class DiscreteGridModel(ModelDefinition):
    """
    Parameters on the grid {0..size-1}^dimension with target proportional to
    ``weights``; the within-model proposal moves each coordinate by +-1 with
    wrap-around.
    """

    def __init__(self, index: int, weights: np.ndarray):
        self.index = int(index)
        self.weights = np.asarray(weights, dtype=float)
        self.dimension = self.weights.ndim
        self.size = self.weights.shape[0]
        self._log_table = np.log(self.weights / self.weights.sum())

    def _cell(self, params) -> Optional[Tuple[int, ...]]:
        cell = np.rint(params).astype(int)
        if np.any(np.abs(params - cell) > 1e-9) or np.any(cell < 0) or np.any(cell >= self.size):
            return None
        return tuple(cell)

    def log_prior(self, params, latent=None):
        cell = self._cell(params)
        return -math.inf if cell is None else float(self._log_table[cell])

    def log_likelihood(self, params, data, latent=None):
        return 0.0

    def sample_prior(self, rng, data):
        return rng.integers(self.size, size=self.dimension).astype(float), None

    def propose_within(self, params, scale, rng):
        steps = rng.choice(np.array([-1.0, 1.0]), size=self.dimension)
        return np.mod(params + steps, self.size)


class DiscreteShiftMove(JumpMove):
    """(i, u) -> (i, (i + u) mod size), u uniform on the grid."""

    def __init__(self, size: int, source: int = 1, target: int = 2):
        self.size = int(size)
        self.source, self.target = source, target
        self.forward_dim = 1
        self.reverse_dim = 0

    def forward(self, state, u):
        i = state.params[0]
        return np.array([i, (i + u[0]) % self.size]), None, np.zeros(0)

    def reverse(self, state, u_rev):
        i, j = state.params
        return np.array([i]), None, np.array([(j - i) % self.size])

    def draw_forward(self, state, rng):
        return np.array([float(rng.integers(self.size))])

    def draw_reverse(self, state, rng):
        return np.zeros(0)

    def log_forward_density(self, state, u):
        return -math.log(self.size)

    def log_reverse_density(self, state, u_rev):
        return 0.0

    def log_jacobian(self, state, u):
        return 0.0


class DiscreteSwapMove(DiscreteShiftMove):
    """(i, u) -> (u, i); a second proposal with the same u density."""

    def forward(self, state, u):
        return np.array([u[0], state.params[0]]), None, np.zeros(0)

    def reverse(self, state, u_rev):
        u, i = state.params
        return np.array([i]), None, np.array([u])


def swap_stage(u_first) -> JumpMove:
    """Second-stage move for delayed rejection on the default discrete toy."""
    return DiscreteSwapMove(DISCRETE_TOY_SIZE)


@dataclass(frozen=True)
class DiscreteToy:
    space: ModelSpace
    moves: List[JumpMove]
    tables: Dict[int, np.ndarray]

    def exact_probabilities(self) -> Dict[Tuple, float]:
        """Exact pi(k, theta) for every (k, *cell)."""
        total = sum(float(t.sum()) for t in self.tables.values())
        return {
            (k, *cell): float(table[cell]) / total
            for k, table in self.tables.items() for cell in np.ndindex(table.shape)
        }

    def exact_model_probabilities(self) -> Dict[int, float]:
        total = sum(float(t.sum()) for t in self.tables.values())
        return {k: float(t.sum()) / total for k, t in self.tables.items()}


def discrete_toy(size: int = DISCRETE_TOY_SIZE) -> DiscreteToy:
    """
    Model 1 on {0..size-1}, model 2 on {0..size-1}^2 with fixed unnormalised
    tables. p(k) is set to each table's share of the total mass, so the joint
    target is the concatenated table.
    """
    grid = np.arange(size, dtype=float)
    first = np.exp(-0.5 * (grid - 1.0) ** 2) + 0.2
    second = np.exp(-0.3 * (grid[:, None] - 2.0) ** 2 - 0.6 * (grid[None, :] - 1.0) ** 2) + 0.1
    total = first.sum() + second.sum()
    space = ModelSpace.from_models(
        [DiscreteGridModel(1, first), DiscreteGridModel(2, second)],
        model_prior={1: first.sum() / total, 2: 1.0 - first.sum() / total},
    )
    return DiscreteToy(space, [DiscreteShiftMove(size)], {1: first, 2: second})


# ---------------------------------------------------------- Gaussian mean
class NullMeanModel(ModelDefinition):
    """x_i ~ N(0, 1); no parameters."""

    index = 1
    dimension = 0

    def log_prior(self, params, latent=None):
        return 0.0

    def log_likelihood(self, params, data, latent=None):
        return float(np.sum(stats.norm.logpdf(np.asarray(data, dtype=float))))

    def sample_prior(self, rng, data):
        return np.zeros(0), None


class NormalMeanModel(ModelDefinition):
    """x_i ~ N(mu, 1), mu ~ N(0, tau^2); within-model update draws mu exactly."""

    index = 2
    dimension = 1

    def __init__(self, tau: float):
        if tau <= 0:
            raise ContractViolation("tau must be positive")
        self.tau = float(tau)

    def parameter_labels(self):
        return [('mu', 0)]

    def log_prior(self, params, latent=None):
        return float(stats.norm.logpdf(params[0], scale=self.tau))

    def log_likelihood(self, params, data, latent=None):
        return float(np.sum(stats.norm.logpdf(np.asarray(data, dtype=float), loc=params[0])))

    def sample_prior(self, rng, data):
        return np.array([rng.normal(0.0, self.tau)]), None

    def posterior(self, data) -> Tuple[float, float]:
        data = np.asarray(data, dtype=float)
        precision = data.shape[0] + 1.0 / self.tau ** 2
        return float(data.sum() / precision), float(1.0 / math.sqrt(precision))

    def within_model_update(self, state, scale, data, rng):
        mean, sd = self.posterior(data)
        return self.evaluate(np.array([rng.normal(mean, sd)]), data)


class ShiftedNormal:
    """Picklable N(mean, sd^2) sampler and log-density for one-dimensional u."""

    def __init__(self, mean: float, sd: float):
        self.mean, self.sd = float(mean), float(sd)

    def draw(self, params, rng):
        return np.array([rng.normal(self.mean, self.sd)])

    def log_density(self, params, u):
        return float(stats.norm.logpdf(u[0], self.mean, self.sd))


def insert_mean(params, u):
    return np.array([u[0]]), np.zeros(0)


def remove_mean(params, u_rev):
    return np.zeros(0), np.array([params[0]])


def zero_log_jacobian(params, u):
    return 0.0


def gaussian_mean_problem(data, tau: float = 1.0, inflation: float = 1.5,
                          model_prior: Optional[Mapping[int, float]] = None
                          ) -> Tuple[ModelSpace, List[JumpMove]]:
    """
    M1 (mu = 0) against M2 (mu ~ N(0, tau^2)). The jump into M2 proposes mu
    from the M2 posterior with its standard deviation scaled by ``inflation``.
    """
    alternative = NormalMeanModel(tau)
    space = ModelSpace.from_models([NullMeanModel(), alternative],
                                   model_prior=model_prior or {1: 0.5, 2: 0.5})
    mean, sd = alternative.posterior(data)
    proposal = ShiftedNormal(mean, inflation * sd)
    move = VectorJumpMove(1, 2, insert_mean, remove_mean, zero_log_jacobian, forward_dim=1,
                          forward_sampler=proposal.draw, forward_log_density=proposal.log_density)
    return space, [move]


def gaussian_mean_bayes_factor(data, tau: float = 1.0) -> float:
    """Exact B_21 = m(x | M2) / m(x | M1)."""
    data = np.asarray(data, dtype=float)
    n, total = data.shape[0], float(data.sum())
    shrink = 1.0 + n * tau ** 2
    return math.sqrt(1.0 / shrink) * math.exp(total ** 2 * tau ** 2 / (2.0 * shrink))
