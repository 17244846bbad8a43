"""
Univariate Gaussian mixtures with an unknown number of components.

The sampler works on the allocated form of the posterior: allocations ``z``
are explicit latent variables, weights have a symmetric Dirichlet prior,
means an N(xi, 1/kappa) prior restricted to increasing order, variances an
inverse-gamma prior, and k is uniform on 1..k_max. Within a model a Gibbs
sweep updates weights, means, variances and allocations; between models the
split/merge and birth/death moves change k by one.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from transdim.core.errors import ContractViolation, DegenerateSplitError, MoveAborted
from transdim.core.moves import (
    birth_death_component,
    birth_proposal_log_density,
    merge_components,
    mixture_components,
    pack_mixture,
    split_beta_params,
    split_component,
    split_log_jacobian,
)
from transdim.core.sampler import JumpMove
from transdim.core.state import ChainState, ModelDefinition, ModelSpace

logger = logging.getLogger(__name__)

_WEIGHT_TOL = 1e-10


@dataclass(frozen=True)
class MixtureHyper:
    delta: float = 1.0
    xi: float = 0.0
    kappa: float = 1.0
    alpha: float = 2.0
    beta: float = 0.02
    k_max: int = 30

    def __post_init__(self):
        if self.delta <= 0 or self.kappa <= 0 or self.alpha <= 0 or self.beta <= 0:
            raise ContractViolation("delta, kappa, alpha and beta must be positive")
        if self.k_max < 1:
            raise ContractViolation("k_max must be >= 1")

    @classmethod
    def from_data(cls, data, **overrides) -> 'MixtureHyper':
        """Data-dependent defaults: xi = midrange, kappa = 1/R^2, beta = 0.02 R^2."""
        data = np.asarray(data, dtype=float)
        if data.size:
            lo, hi = float(data.min()), float(data.max())
            span = hi - lo if hi > lo else 1.0
            defaults = dict(xi=0.5 * (lo + hi), kappa=1.0 / span ** 2, beta=0.02 * span ** 2)
        else:
            defaults = {}
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)


@dataclass(frozen=True)
class MixtureState:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    allocations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    hyper: MixtureHyper = field(default_factory=MixtureHyper)

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    def to_params(self) -> np.ndarray:
        return pack_mixture(self.weights, self.means, self.variances)

    @classmethod
    def from_params(cls, params, allocations=None, hyper: Optional[MixtureHyper] = None) -> 'MixtureState':
        w, mu, var = mixture_components(params)
        z = np.zeros(0, dtype=int) if allocations is None else np.asarray(allocations, dtype=int)
        return cls(w.copy(), mu.copy(), var.copy(), z, hyper or MixtureHyper())


# ------------------------------------------------------------------ densities
def _component_logpdf(data: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """n x k matrix of log phi(x_i | mu_j, var_j)."""
    return stats.norm.logpdf(data[:, None], means[None, :], np.sqrt(variances)[None, :])


def _valid_components(weights, variances) -> bool:
    return bool(
        np.all(weights > 0) and np.all(variances > 0)
        and abs(math.fsum(weights) - 1.0) <= _WEIGHT_TOL
    )


def marginal_log_likelihood(params: np.ndarray, data) -> float:
    """sum_i log sum_j w_j phi(x_i | mu_j, var_j)."""
    data = np.asarray(data, dtype=float)
    w, mu, var = mixture_components(params)
    if not _valid_components(w, var):
        return -math.inf
    if data.size == 0:
        return 0.0
    return float(np.sum(logsumexp(_component_logpdf(data, mu, var) + np.log(w)[None, :], axis=1)))


def allocated_log_likelihood(params: np.ndarray, data, allocations) -> float:
    """sum_i log phi(x_i | mu_{z_i}, var_{z_i})."""
    data = np.asarray(data, dtype=float)
    z = np.asarray(allocations, dtype=int)
    w, mu, var = mixture_components(params)
    if not _valid_components(w, var):
        return -math.inf
    if data.size == 0:
        return 0.0
    if z.shape != data.shape or z.min() < 0 or z.max() >= w.shape[0]:
        return -math.inf
    return float(np.sum(stats.norm.logpdf(data, mu[z], np.sqrt(var[z]))))


def component_log_prior(params: np.ndarray, hyper: MixtureHyper) -> float:
    """Dirichlet(delta) weights, N(xi, 1/kappa) means, IG(alpha, beta) variances (unordered)."""
    w, mu, var = mixture_components(params)
    if not _valid_components(w, var):
        return -math.inf
    k = w.shape[0]
    log_dirichlet = (
        gammaln(k * hyper.delta) - k * gammaln(hyper.delta)
        + (hyper.delta - 1.0) * float(np.sum(np.log(w)))
    )
    log_means = float(np.sum(stats.norm.logpdf(mu, hyper.xi, 1.0 / math.sqrt(hyper.kappa))))
    log_vars = float(np.sum(stats.invgamma.logpdf(var, hyper.alpha, scale=hyper.beta)))
    return float(log_dirichlet + log_means + log_vars)


def mixture_log_posterior(state: MixtureState, data, form: str = 'marginal') -> float:
    """
    Unnormalised log posterior of a mixture state.

    ``form='marginal'`` integrates the allocations out of the likelihood;
    ``form='allocation'`` conditions on ``state.allocations`` and adds
    sum_i log w_{z_i}. The prior is invariant to relabelling the components
    and includes the uniform prior on k over 1..k_max.
    """
    if form not in ('marginal', 'allocation'):
        raise ContractViolation(f"form must be 'marginal' or 'allocation', got {form!r}")
    if not 1 <= state.k <= state.hyper.k_max:
        return -math.inf
    params = state.to_params()
    log_prior = component_log_prior(params, state.hyper) - math.log(state.hyper.k_max)
    if not math.isfinite(log_prior):
        return -math.inf
    if form == 'marginal':
        return log_prior + marginal_log_likelihood(params, data)
    z = np.asarray(state.allocations, dtype=int)
    log_lik = allocated_log_likelihood(params, data, z)
    if not math.isfinite(log_lik):
        return -math.inf
    return log_prior + log_lik + float(np.sum(np.log(state.weights[z])))


def allocation_probabilities(params: np.ndarray, data) -> np.ndarray:
    """n x k matrix P[i, j] = P(z_i = j | x_i, theta); rows sum to one."""
    data = np.asarray(data, dtype=float)
    w, mu, var = mixture_components(params)
    if data.size == 0:
        return np.zeros((0, w.shape[0]))
    logits = _component_logpdf(data, mu, var) + np.log(w)[None, :]
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def _draw_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if probs.shape[0] == 0:
        return np.zeros(0, dtype=int)
    cumulative = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None]
    return np.minimum((cumulative < u).sum(axis=1), probs.shape[1] - 1).astype(int)


def mixture_gibbs_allocations(state: MixtureState, data, rng: np.random.Generator) -> MixtureState:
    """Redraw every allocation from its exact full conditional."""
    probs = allocation_probabilities(state.to_params(), data)
    return replace(state, allocations=_draw_categorical(probs, rng))


def sort_by_means(params: np.ndarray, allocations: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Reorder components by increasing mean, relabelling the allocations to match."""
    w, mu, var = mixture_components(params)
    order = np.argsort(mu, kind='stable')
    if np.array_equal(order, np.arange(order.shape[0])):
        return params, allocations
    sorted_params = pack_mixture(w[order], mu[order], var[order])
    if allocations is None:
        return sorted_params, None
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.shape[0])
    return sorted_params, relabel[np.asarray(allocations, dtype=int)]


# ---------------------------------------------------------------------- model
class MixtureModel(ModelDefinition):
    """k-component mixture; params [w_1..w_k, mu_1..mu_k, var_1..var_k], latent z."""

    def __init__(self, k: int, hyper: MixtureHyper):
        if not 1 <= k <= hyper.k_max:
            raise ContractViolation(f"k={k} outside 1..{hyper.k_max}")
        self.index = int(k)
        self.dimension = 3 * int(k)
        self.hyper = hyper

    def parameter_labels(self):
        k = self.index
        return ([('w', j) for j in range(k)] + [('mu', j) for j in range(k)]
                + [('sigma2', j) for j in range(k)])

    def log_prior(self, params, latent=None):
        _, mu, _ = mixture_components(params)
        if np.any(np.diff(mu) < 0):
            return -math.inf
        log_p = component_log_prior(params, self.hyper)
        if not math.isfinite(log_p):
            return -math.inf
        # ordered means: k! times the unordered density
        log_p += gammaln(self.index + 1)
        if latent is not None and len(latent):
            z = np.asarray(latent, dtype=int)
            if z.min() < 0 or z.max() >= self.index:
                return -math.inf
            log_p += float(np.sum(np.log(params[:self.index][z])))
        return float(log_p)

    def log_likelihood(self, params, data, latent=None):
        if latent is None:
            return marginal_log_likelihood(params, data)
        return allocated_log_likelihood(params, data, latent)

    def sample_prior(self, rng, data):
        h = self.hyper
        k = self.index
        w = rng.dirichlet(np.full(k, h.delta))
        mu = np.sort(rng.normal(h.xi, 1.0 / math.sqrt(h.kappa), size=k))
        var = stats.invgamma.rvs(h.alpha, scale=h.beta, size=k, random_state=rng)
        params = pack_mixture(w, mu, np.atleast_1d(var))
        z = _draw_categorical(allocation_probabilities(params, data), rng)
        return params, z

    def within_model_update(self, state, scale, data, rng):
        """Gibbs sweep: weights, means, variances, allocations; then sort by mean."""
        data = np.asarray(data, dtype=float)
        h = self.hyper
        k = self.index
        w, mu, var = (a.copy() for a in mixture_components(state.params))
        z = np.asarray(state.latent if state.latent is not None else np.zeros(data.shape[0]), dtype=int)
        counts = np.bincount(z, minlength=k).astype(float)
        sums = np.bincount(z, weights=data, minlength=k) if data.size else np.zeros(k)

        w = rng.dirichlet(h.delta + counts)
        precision = counts / var + h.kappa
        mu = rng.normal((sums / var + h.kappa * h.xi) / precision, 1.0 / np.sqrt(precision))
        squares = np.bincount(z, weights=(data - mu[z]) ** 2, minlength=k) if data.size else np.zeros(k)
        var = np.atleast_1d(stats.invgamma.rvs(h.alpha + 0.5 * counts, scale=h.beta + 0.5 * squares,
                                               random_state=rng))
        params = pack_mixture(w, mu, var)
        z = _draw_categorical(allocation_probabilities(params, data), rng)
        params, z = sort_by_means(params, z)
        return self.evaluate(params, data, z)

    def deviance(self, state, data):
        return -2.0 * marginal_log_likelihood(state.params, data)


def _pair_probabilities(params: np.ndarray, data: np.ndarray, members: np.ndarray, j: int) -> np.ndarray:
    """P(observation goes to component j+1 | it belongs to j or j+1)."""
    w, mu, var = mixture_components(params)
    x = data[members]
    first = math.log(w[j]) + stats.norm.logpdf(x, mu[j], math.sqrt(var[j]))
    second = math.log(w[j + 1]) + stats.norm.logpdf(x, mu[j + 1], math.sqrt(var[j + 1]))
    return np.exp(second - np.logaddexp(first, second))


class MixtureSplitMerge(JumpMove):
    """
    Split component j* of a k-component mixture into two adjacent components,
    or merge an adjacent pair of a (k+1)-component mixture.

    u = [j*, a_1..a_n, u1, u2, u3] with a_i = 1 sending observation i (when it
    belongs to j*) to the second child; u' = [j]. Splits whose children are
    not adjacent in mean order land outside the ordered prior and are
    rejected.
    """

    def __init__(self, k: int, data, hyper: MixtureHyper, centred_weight: bool = False):
        self.source, self.target = int(k), int(k) + 1
        self.data = np.asarray(data, dtype=float)
        self.hyper = hyper
        self.centred_weight = centred_weight
        self.forward_dim = 3
        self.reverse_dim = 0
        self.forward_discrete = 1 + self.data.shape[0]
        self.reverse_discrete = 1

    def _weight_shape(self, state: ChainState, j: int) -> Tuple[float, float]:
        if not self.centred_weight or state.latent is None:
            return 2.0, 2.0
        allocated = int(np.count_nonzero(np.asarray(state.latent) == j))
        return split_beta_params(self.hyper.delta, allocated)

    def _unpack(self, u) -> Tuple[int, np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        n = self.data.shape[0]
        return int(u[0]), u[1:1 + n].astype(int), u[1 + n:]

    def forward(self, state, u):
        j, bits, cont = self._unpack(u)
        params = split_component(state.params, j, cont)
        latent = None
        if state.latent is not None:
            z = np.asarray(state.latent, dtype=int).copy()
            z[z > j] += 1
            z[(z == j) & (bits == 1)] = j + 1
            latent = z
        return params, latent, np.array([float(j)])

    def reverse(self, state, u_rev):
        j = int(u_rev[0])
        merged = merge_components(state.params, j, j + 1)
        n = self.data.shape[0]
        bits = np.zeros(n)
        latent = None
        if state.latent is not None:
            z = np.asarray(state.latent, dtype=int).copy()
            bits[z == j + 1] = 1.0
            z[z == j + 1] = j
            z[z > j + 1] -= 1
            latent = z
        return merged.params, latent, np.concatenate([[float(j)], bits, merged.u])

    def draw_forward(self, state, rng):
        j = int(rng.integers(self.source))
        p, q = self._weight_shape(state, j)
        cont = np.array([rng.beta(p, q), rng.beta(2.0, 2.0), rng.beta(1.0, 1.0)])
        try:
            split = split_component(state.params, j, cont)
        except DegenerateSplitError as exc:
            raise MoveAborted(str(exc)) from None
        bits = np.zeros(self.data.shape[0])
        if state.latent is not None:
            members = np.flatnonzero(np.asarray(state.latent) == j)
            if members.size:
                probs = _pair_probabilities(split, self.data, members, j)
                bits[members] = (rng.random(members.size) < probs).astype(float)
        return np.concatenate([[float(j)], bits, cont])

    def draw_reverse(self, state, rng):
        return np.array([float(rng.integers(self.source))])

    def log_forward_density(self, state, u):
        j, bits, cont = self._unpack(u)
        if not 0 <= j < self.source or np.any((cont <= 0) | (cont >= 1)):
            return -math.inf
        p, q = self._weight_shape(state, j)
        log_q = (
            -math.log(self.source)
            + float(stats.beta.logpdf(cont[0], p, q))
            + float(stats.beta.logpdf(cont[1], 2.0, 2.0))
            + float(stats.beta.logpdf(cont[2], 1.0, 1.0))
        )
        if state.latent is None:
            return log_q
        z = np.asarray(state.latent, dtype=int)
        members = z == j
        if np.any(bits[~members] != 0):
            return -math.inf
        idx = np.flatnonzero(members)
        if idx.size:
            probs = _pair_probabilities(split_component(state.params, j, cont), self.data, idx, j)
            chosen = bits[idx] == 1
            with np.errstate(divide='ignore'):
                log_q += float(np.sum(np.log(probs[chosen])) + np.sum(np.log1p(-probs[~chosen])))
        return log_q

    def log_reverse_density(self, state, u_rev):
        j = int(u_rev[0])
        return -math.log(self.source) if 0 <= j < self.source else -math.inf

    def log_jacobian(self, state, u):
        j, _, cont = self._unpack(u)
        return split_log_jacobian(state.params, j, cont)


class MixtureBirthDeath(JumpMove):
    """
    Birth of a component with no observations (w ~ Beta(1, k); mean and
    variance from the prior) or death of a uniformly chosen empty component.
    u = [w, mu, var]; u' = [index of the removed component].
    """

    def __init__(self, k: int, hyper: MixtureHyper):
        self.source, self.target = int(k), int(k) + 1
        self.hyper = hyper
        self.forward_dim = 3
        self.reverse_dim = 0
        self.reverse_discrete = 1

    def forward(self, state, u):
        born = birth_death_component(state.params, 'birth', new=u)
        latent = None
        if state.latent is not None:
            z = np.asarray(state.latent, dtype=int).copy()
            z[z >= born.index] += 1
            latent = z
        return born.params, latent, np.array([float(born.index)])

    def reverse(self, state, u_rev):
        j = int(u_rev[0])
        dead = birth_death_component(state.params, 'death', component=j)
        latent = None
        if state.latent is not None:
            z = np.asarray(state.latent, dtype=int).copy()
            z[z > j] -= 1
            latent = z
        return dead.params, latent, dead.u

    def draw_forward(self, state, rng):
        h = self.hyper
        return np.array([
            rng.beta(1.0, self.source),
            rng.normal(h.xi, 1.0 / math.sqrt(h.kappa)),
            float(stats.invgamma.rvs(h.alpha, scale=h.beta, random_state=rng)),
        ])

    @staticmethod
    def _empty(state: ChainState) -> np.ndarray:
        k = state.dimension // 3
        if state.latent is None:
            return np.arange(k)
        return np.flatnonzero(np.bincount(np.asarray(state.latent, dtype=int), minlength=k) == 0)

    def draw_reverse(self, state, rng):
        empty = self._empty(state)
        if empty.size == 0:
            raise MoveAborted("no empty component to kill")
        return np.array([float(empty[rng.integers(empty.size)])])

    def log_forward_density(self, state, u):
        if not 0.0 < u[0] < 1.0 or u[2] <= 0:
            return -math.inf
        return birth_proposal_log_density(u, self.source, self.hyper)

    def log_reverse_density(self, state, u_rev):
        empty = self._empty(state)
        if int(u_rev[0]) not in empty:
            return -math.inf
        return -math.log(empty.size)

    def log_jacobian(self, state, u):
        return (self.source - 1) * math.log1p(-float(u[0]))


MIXTURE_MOVES = ('split-merge', 'birth-death')


def build_mixture_space(data, hyper: Optional[MixtureHyper] = None,
                        moves: Sequence[str] = MIXTURE_MOVES,
                        centred_weight: bool = False) -> Tuple[ModelSpace, List[JumpMove]]:
    """Models 1..k_max with a uniform prior, nearest-neighbour jumps and the chosen move types."""
    data = np.asarray(data, dtype=float)
    hyper = hyper or MixtureHyper.from_data(data)
    unknown = set(moves) - set(MIXTURE_MOVES)
    if unknown or not moves:
        raise ContractViolation(f"mixture moves must be a non-empty subset of {MIXTURE_MOVES}, "
                                f"got {list(moves)}")
    space = ModelSpace.from_models([MixtureModel(k, hyper) for k in range(1, hyper.k_max + 1)])
    kernels: List[JumpMove] = []
    for k in range(1, hyper.k_max):
        if 'split-merge' in moves:
            kernels.append(MixtureSplitMerge(k, data, hyper, centred_weight=centred_weight))
        if 'birth-death' in moves:
            kernels.append(MixtureBirthDeath(k, hyper))
    logger.debug("mixture space: k_max=%d, %d moves", hyper.k_max, len(kernels))
    return space, kernels
