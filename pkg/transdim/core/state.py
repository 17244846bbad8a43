"""
Core data types of the reversible jump sampler.

A chain moves over pairs ``(k, theta_k)``: ``k`` indexes a model of the
:class:`ModelSpace` and ``theta_k`` is that model's parameter vector, whose
length depends on ``k``. :class:`ChainState` carries the pair together with
cached log-densities so that acceptance ratios never re-evaluate the current
state.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from transdim.core.errors import ConfigError, ContractViolation

logger = logging.getLogger(__name__)

# Absolute slack allowed when checking that probability vectors sum to one.
_PROBABILITY_TOL = 1e-12

Labels = List[Tuple[str, int]]


@dataclass(frozen=True)
class ChainState:
    """One state of a chain: model index, parameters and cached log-densities."""
    model_index: int
    params: np.ndarray
    log_likelihood: float
    log_prior: float
    latent: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return int(self.params.shape[0])

    @property
    def log_density(self) -> float:
        """log p(theta | k) + log L, without the model prior p(k)."""
        return self.log_likelihood + self.log_prior

    def is_finite(self) -> bool:
        return math.isfinite(self.log_likelihood) and math.isfinite(self.log_prior)


class ModelDefinition(ABC):
    """
    One candidate model of a :class:`ModelSpace`.

    Subclasses declare ``index`` and ``dimension`` and provide the parameter
    prior, the likelihood and a prior sampler. Evaluations must be pure: the
    same arguments always give the same value and nothing is mutated, since
    replicate chains share model objects.
    """

    index: int
    dimension: int

    @abstractmethod
    def log_prior(self, params: np.ndarray, latent: Optional[np.ndarray] = None) -> float:
        """log p(theta_k | k); -inf outside the support."""

    @abstractmethod
    def log_likelihood(self, params: np.ndarray, data, latent: Optional[np.ndarray] = None) -> float:
        """log L(data | k, theta_k); -inf when not evaluable."""

    @abstractmethod
    def sample_prior(self, rng: np.random.Generator, data) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Draw ``(params, latent)`` from the prior of this model."""

    def parameter_labels(self) -> Labels:
        """(name, index) pairs naming each coordinate of ``params``."""
        return [('theta', i) for i in range(self.dimension)]

    def parameter_names(self) -> List[str]:
        """Flat names such as ``mu[2]``, in parameter order."""
        return [f"{name}[{i}]" for name, i in self.parameter_labels()]

    def evaluate(self, params: np.ndarray, data, latent: Optional[np.ndarray] = None) -> ChainState:
        """Build a ChainState with freshly computed caches."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dimension,):
            raise ContractViolation(
                f"model {self.index} expects {self.dimension} parameters, got shape {params.shape}"
            )
        log_prior = float(self.log_prior(params, latent))
        if not math.isfinite(log_prior):
            # No point evaluating the likelihood outside the support.
            return ChainState(self.index, params, -math.inf, log_prior, latent)
        log_lik = float(self.log_likelihood(params, data, latent))
        return ChainState(self.index, params, log_lik, log_prior, latent)

    def propose_within(self, params: np.ndarray, scale: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
        """Symmetric within-model proposal; componentwise Gaussian random walk."""
        return params + scale * rng.standard_normal(params.shape[0])

    def within_model_update(self, state: ChainState, scale: np.ndarray, data,
                            rng: np.random.Generator) -> ChainState:
        """One within-model sweep. Families override this with Gibbs or custom moves."""
        from transdim.core.sampler import mh_within_model_step
        return mh_within_model_step(state, scale, self, data, rng)

    def deviance(self, state: ChainState, data) -> float:
        return -2.0 * state.log_likelihood


class PriorOnlyModel(ModelDefinition):
    """Wraps a model with a constant (zero) log-likelihood."""

    def __init__(self, inner: ModelDefinition):
        self.inner = inner
        self.index = inner.index
        self.dimension = inner.dimension

    def log_prior(self, params, latent=None):
        return self.inner.log_prior(params, latent)

    def log_likelihood(self, params, data, latent=None):
        return 0.0

    def sample_prior(self, rng, data):
        return self.inner.sample_prior(rng, data)

    def parameter_labels(self):
        return self.inner.parameter_labels()

    def propose_within(self, params, scale, rng):
        return self.inner.propose_within(params, scale, rng)

    def deviance(self, state, data):
        return 0.0


def nearest_neighbour_graph(indices: Iterable[int]) -> Dict[int, Dict[int, float]]:
    """
    Default jump graph: k -> k-1 and k -> k+1 with probability 1/2 each.

    At either end of the index range the outward mass is folded into the
    inward move; a single model only jumps to itself.
    """
    ordered = sorted(set(int(k) for k in indices))
    if not ordered:
        raise ContractViolation("a model space needs at least one model")
    if len(ordered) == 1:
        return {ordered[0]: {ordered[0]: 1.0}}
    graph: Dict[int, Dict[int, float]] = {}
    last = len(ordered) - 1
    for pos, k in enumerate(ordered):
        if pos == 0:
            graph[k] = {ordered[1]: 1.0}
        elif pos == last:
            graph[k] = {ordered[pos - 1]: 1.0}
        else:
            graph[k] = {ordered[pos - 1]: 0.5, ordered[pos + 1]: 0.5}
    return graph


def uniform_prior(indices: Iterable[int]) -> Dict[int, float]:
    ordered = sorted(set(int(k) for k in indices))
    return {k: 1.0 / len(ordered) for k in ordered}


@dataclass(frozen=True)
class ModelSpace:
    """Models, model prior p(k) and jump proposal probabilities q(k -> k')."""
    models: Mapping[int, ModelDefinition]
    model_prior: Mapping[int, float]
    jump_graph: Mapping[int, Mapping[int, float]]

    def __post_init__(self):
        object.__setattr__(self, 'models', {int(k): m for k, m in self.models.items()})
        object.__setattr__(self, 'model_prior', {int(k): float(p) for k, p in self.model_prior.items()})
        object.__setattr__(self, 'jump_graph', {
            int(k): {int(j): float(q) for j, q in row.items()} for k, row in self.jump_graph.items()
        })
        self._validate()

    def _validate(self) -> None:
        for k, model in self.models.items():
            if model.index != k:
                raise ContractViolation(f"model registered under {k} declares index {model.index}")
        if set(self.model_prior) != set(self.models):
            raise ContractViolation("model_prior must cover exactly the declared models")
        if any(p < 0 for p in self.model_prior.values()):
            raise ContractViolation("model_prior has negative entries")
        total = math.fsum(self.model_prior.values())
        if abs(total - 1.0) > _PROBABILITY_TOL:
            raise ContractViolation(f"model_prior sums to {total!r}, expected 1")
        for k in self.models:
            row = self.jump_graph.get(k)
            if not row:
                raise ContractViolation(f"jump_graph has no moves leaving model {k}")
            unknown = set(row) - set(self.models)
            if unknown:
                raise ContractViolation(f"jump_graph[{k}] targets unknown models {sorted(unknown)}")
            row_total = math.fsum(row.values())
            if abs(row_total - 1.0) > 1e-10:
                raise ContractViolation(f"jump probabilities out of model {k} sum to {row_total!r}")
            for j, q in row.items():
                if q > 0 and self.jump_probability(j, k) <= 0:
                    raise ContractViolation(
                        f"jump {k}->{j} has no reverse jump {j}->{k}"
                    )

    @classmethod
    def from_models(cls, models: Sequence[ModelDefinition],
                    model_prior: Optional[Mapping[int, float]] = None,
                    jump_graph: Optional[Mapping[int, Mapping[int, float]]] = None) -> 'ModelSpace':
        """Build a space with a uniform prior and the nearest-neighbour graph by default."""
        by_index = {m.index: m for m in models}
        return cls(
            models=by_index,
            model_prior=model_prior if model_prior is not None else uniform_prior(by_index),
            jump_graph=jump_graph if jump_graph is not None else nearest_neighbour_graph(by_index),
        )

    @property
    def indices(self) -> List[int]:
        return sorted(self.models)

    def model(self, k: int) -> ModelDefinition:
        try:
            return self.models[k]
        except KeyError:
            raise ContractViolation(f"model {k} is not part of the model space") from None

    def log_model_prior(self, k: int) -> float:
        p = self.model_prior.get(k, 0.0)
        return math.log(p) if p > 0 else -math.inf

    def jump_probability(self, k: int, k_new: int) -> float:
        return self.jump_graph.get(k, {}).get(k_new, 0.0)

    def log_target(self, state: ChainState) -> float:
        """Unnormalised log pi(k, theta_k | x)."""
        return self.log_model_prior(state.model_index) + state.log_prior + state.log_likelihood

    def evaluate(self, k: int, params: np.ndarray, data, latent: Optional[np.ndarray] = None) -> ChainState:
        return self.model(k).evaluate(params, data, latent)

    def draw_jump(self, k: int, rng: np.random.Generator) -> int:
        """Sample k' with probability q(k -> k')."""
        row = self.jump_graph[k]
        targets = sorted(row)
        u = rng.random()
        cumulative = 0.0
        for target in targets:
            cumulative += row[target]
            if u < cumulative:
                return target
        return targets[-1]

    def prior_only(self) -> 'ModelSpace':
        """The same space with every likelihood replaced by a constant."""
        return ModelSpace(
            models={k: PriorOnlyModel(m) for k, m in self.models.items()},
            model_prior=dict(self.model_prior),
            jump_graph={k: dict(row) for k, row in self.jump_graph.items()},
        )


@dataclass(frozen=True)
class SamplerConfig:
    """Run-loop settings shared by every replicate."""
    iterations: int
    burn_in: int = 0
    thinning: int = 1
    replicates: int = 1
    seed: int = 0
    within_move_scales: Mapping[int, Sequence[float]] = field(default_factory=dict)
    default_scale: float = 0.1
    between_move_probability: float = 0.5
    start_model: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'within_move_scales', {
            int(k): tuple(float(s) for s in v) for k, v in self.within_move_scales.items()
        })
        if self.iterations < 1:
            raise ConfigError("must be a positive integer", field='sampler.iterations')
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"must satisfy 0 <= burn_in < iterations ({self.iterations})", field='sampler.burn_in'
            )
        if self.thinning < 1:
            raise ConfigError("must be >= 1", field='sampler.thinning')
        if self.replicates < 1:
            raise ConfigError("must be >= 1", field='sampler.replicates')
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("must be a 64-bit unsigned integer", field='sampler.seed')
        if not 0.0 <= self.between_move_probability <= 1.0:
            raise ConfigError("must lie in [0, 1]", field='sampler.between_move_probability')
        if not self.default_scale > 0:
            raise ConfigError("must be > 0", field='sampler.default_scale')

    def scale_for(self, k: int, dimension: int) -> np.ndarray:
        """Random-walk scales for model k (the default scale when none is configured)."""
        configured = self.within_move_scales.get(k)
        if configured is None:
            return np.full(dimension, self.default_scale)
        scale = np.asarray(configured, dtype=float)
        if scale.shape == (1,) and dimension != 1:
            scale = np.full(dimension, scale[0])
        return scale


class AcceptanceRecord(NamedTuple):
    """One attempted between-model move."""
    iteration: int
    k_from: int
    k_to: int
    alpha: float
    accepted: bool
    burn_in: bool = False


STATE_COLUMNS = ['replicate', 'iteration', 'k', 'log_likelihood', 'log_prior', 'deviance']
PARAM_COLUMNS = ['replicate', 'iteration', 'name', 'index', 'value']
ACCEPTANCE_COLUMNS = ['replicate', 'iteration', 'k_from', 'k_to', 'alpha', 'accepted', 'burnin_flag']


@dataclass
class ReplicateTrace:
    """Recorded output of one chain."""
    replicate: int
    iterations: List[int] = field(default_factory=list)
    model_indices: List[int] = field(default_factory=list)
    params: List[np.ndarray] = field(default_factory=list)
    latent: List[Optional[np.ndarray]] = field(default_factory=list)
    log_likelihood: List[float] = field(default_factory=list)
    log_prior: List[float] = field(default_factory=list)
    deviance: List[float] = field(default_factory=list)
    records: List[AcceptanceRecord] = field(default_factory=list)
    labels: Dict[int, Labels] = field(default_factory=dict)

    def record_state(self, iteration: int, state: ChainState, deviance: float,
                     labels: Labels) -> None:
        if self.iterations and iteration <= self.iterations[-1]:
            raise ContractViolation("trace iterations must be strictly increasing")
        self.iterations.append(iteration)
        self.model_indices.append(state.model_index)
        self.params.append(state.params)
        self.latent.append(state.latent)
        self.log_likelihood.append(state.log_likelihood)
        self.log_prior.append(state.log_prior)
        self.deviance.append(deviance)
        self.labels.setdefault(state.model_index, labels)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def model_sequence(self) -> np.ndarray:
        return np.asarray(self.model_indices, dtype=int)

    def move_counts(self) -> Dict[str, Dict[str, int]]:
        """Attempted / accepted between-model moves per 'k->k2' pair."""
        counts: Dict[str, Dict[str, int]] = {}
        for rec in self.records:
            key = f"{rec.k_from}->{rec.k_to}"
            entry = counts.setdefault(key, {'attempted': 0, 'accepted': 0})
            entry['attempted'] += 1
            entry['accepted'] += int(rec.accepted)
        return dict(sorted(counts.items()))


@dataclass
class Trace:
    """Output of :func:`transdim.core.sampler.run_sampler`, one entry per replicate."""
    replicates: List[ReplicateTrace] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.replicates)

    def model_sequences(self) -> List[np.ndarray]:
        return [rep.model_sequence for rep in self.replicates]

    def records(self) -> List[AcceptanceRecord]:
        return [rec for rep in self.replicates for rec in rep.records]

    def state_frame(self) -> pd.DataFrame:
        rows = []
        for rep in self.replicates:
            for i in range(len(rep)):
                rows.append((rep.replicate, rep.iterations[i], rep.model_indices[i],
                             rep.log_likelihood[i], rep.log_prior[i], rep.deviance[i]))
        return pd.DataFrame(rows, columns=STATE_COLUMNS)

    def params_frame(self) -> pd.DataFrame:
        rows = []
        for rep in self.replicates:
            for i in range(len(rep)):
                labels = rep.labels.get(rep.model_indices[i], [])
                for (name, idx), value in zip(labels, rep.params[i]):
                    rows.append((rep.replicate, rep.iterations[i], name, idx, float(value)))
        return pd.DataFrame(rows, columns=PARAM_COLUMNS)

    def acceptance_frame(self) -> pd.DataFrame:
        rows = [
            (rep.replicate, rec.iteration, rec.k_from, rec.k_to, rec.alpha,
             int(rec.accepted), int(rec.burn_in))
            for rep in self.replicates for rec in rep.records
        ]
        return pd.DataFrame(rows, columns=ACCEPTANCE_COLUMNS)

    @classmethod
    def from_frames(cls, states: pd.DataFrame, params: Optional[pd.DataFrame] = None,
                    acceptance: Optional[pd.DataFrame] = None) -> 'Trace':
        """Rebuild a Trace from frames with the CSV schemas (latent variables are not stored)."""
        trace = cls()
        by_state: Dict[Tuple[int, int], List[Tuple[str, int, float]]] = {}
        if params is not None and not params.empty:
            for rep, it, name, idx, value in params[PARAM_COLUMNS].itertuples(index=False):
                by_state.setdefault((int(rep), int(it)), []).append((str(name), int(idx), float(value)))
        for rep_id, group in states.groupby('replicate', sort=True):
            rep = ReplicateTrace(replicate=int(rep_id))
            for row in group.sort_values('iteration').itertuples(index=False):
                entries = by_state.get((int(rep_id), int(row.iteration)), [])
                rep.iterations.append(int(row.iteration))
                rep.model_indices.append(int(row.k))
                rep.params.append(np.array([v for _, _, v in entries], dtype=float))
                rep.latent.append(None)
                rep.log_likelihood.append(float(row.log_likelihood))
                rep.log_prior.append(float(row.log_prior))
                rep.deviance.append(float(row.deviance))
                rep.labels.setdefault(int(row.k), [(n, i) for n, i, _ in entries])
            if acceptance is not None and not acceptance.empty:
                rows = acceptance[acceptance['replicate'] == rep_id]
                rep.records = [
                    AcceptanceRecord(int(r.iteration), int(r.k_from), int(r.k_to), float(r.alpha),
                                     bool(r.accepted), bool(r.burnin_flag))
                    for r in rows.itertuples(index=False)
                ]
            trace.replicates.append(rep)
        return trace
