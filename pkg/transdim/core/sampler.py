"""
The reversible jump sampler.

Each iteration performs a within-model sweep on the current model and, with
probability ``between_move_probability``, one between-model attempt drawn from
the jump graph of the :class:`~transdim.core.state.ModelSpace`. Between-model
transitions are described by :class:`JumpMove` objects: a bijection between
``(theta_k, u)`` and ``(theta_k', u')`` with densities for the auxiliary
vectors and the log-Jacobian of the map.
"""

import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from transdim.core.errors import (
    ContractViolation,
    EvaluationError,
    MoveAborted,
    StartupError,
)
from transdim.core.rng import replicate_generator
from transdim.core.state import (
    AcceptanceRecord,
    ChainState,
    ModelDefinition,
    ModelSpace,
    ReplicateTrace,
    SamplerConfig,
    Trace,
)

logger = logging.getLogger(__name__)

Proposal = Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]


def acceptance_probability(log_ratio: float) -> float:
    """min(1, exp(log_ratio)) without exponentiating large ratios."""
    if math.isnan(log_ratio) or log_ratio == -math.inf:
        return 0.0
    return math.exp(min(0.0, log_ratio))


class BetweenModelKernel(ABC):
    """A transition between the models ``source`` and ``target`` (usable both ways)."""

    source: int
    target: int

    def connects(self, k: int, k_new: int) -> bool:
        return (k, k_new) in ((self.source, self.target), (self.target, self.source))

    @abstractmethod
    def transition(self, state: ChainState, k_new: int, space: ModelSpace, data,
                   rng: np.random.Generator, iteration: int = 0,
                   burn_in: bool = False) -> Tuple[ChainState, AcceptanceRecord]:
        """Attempt a move from ``state`` to model ``k_new``."""


class JumpMove(BetweenModelKernel):
    """
    Bijection ``(theta_k, u) <-> (theta_k', u')`` between two models.

    ``forward_dim`` / ``reverse_dim`` count the continuous coordinates of ``u``
    and ``u'``; ``forward_discrete`` / ``reverse_discrete`` count leading
    discrete coordinates (e.g. the index of the component being split), which
    enter the proposal densities but not the Jacobian.
    """

    forward_dim: int = 0
    reverse_dim: int = 0
    forward_discrete: int = 0
    reverse_discrete: int = 0

    @abstractmethod
    def forward(self, state: ChainState, u: np.ndarray) -> Proposal:
        """Map ``(theta_k, u)`` to ``(theta_k', latent', u')``."""

    @abstractmethod
    def reverse(self, state: ChainState, u_rev: np.ndarray) -> Proposal:
        """Map ``(theta_k', u')`` back to ``(theta_k, latent, u)``."""

    @abstractmethod
    def draw_forward(self, state: ChainState, rng: np.random.Generator) -> np.ndarray:
        """Draw ``u`` for a move leaving ``state``."""

    @abstractmethod
    def draw_reverse(self, state: ChainState, rng: np.random.Generator) -> np.ndarray:
        """Draw ``u'`` for the reverse move leaving ``state`` (in model ``target``)."""

    @abstractmethod
    def log_forward_density(self, state: ChainState, u: np.ndarray) -> float:
        """log q(u) given the source state."""

    @abstractmethod
    def log_reverse_density(self, state: ChainState, u_rev: np.ndarray) -> float:
        """log q(u') given the target state."""

    @abstractmethod
    def log_jacobian(self, state: ChainState, u: np.ndarray) -> float:
        """log |det d(theta_k', u') / d(theta_k, u)| at ``(state.params, u)``."""

    def reversed(self) -> 'JumpMove':
        """The same pair of maps seen from the target model."""
        return ReversedMove(self)

    def oriented(self, k: int) -> 'JumpMove':
        """This move, or its reverse, so that it departs from model ``k``."""
        if k == self.source:
            return self
        if k == self.target:
            return self.reversed()
        raise ContractViolation(f"move {self.source}<->{self.target} does not touch model {k}")

    def transition(self, state, k_new, space, data, rng, iteration=0, burn_in=False):
        move = self.oriented(state.model_index)
        if move.target != k_new:
            raise ContractViolation(
                f"move {self.source}<->{self.target} cannot jump from {state.model_index} to {k_new}"
            )
        try:
            proposed, u, u_rev = propose(move, state, space, data, rng)
        except MoveAborted as exc:
            logger.debug("move %d->%d aborted: %s", state.model_index, k_new, exc)
            return state, AcceptanceRecord(iteration, state.model_index, k_new, 0.0, False, burn_in)
        log_a = acceptance_log_ratio(state, proposed, move, u, u_rev, space)
        alpha = acceptance_probability(log_a)
        accepted = rng.random() < alpha
        record = AcceptanceRecord(iteration, state.model_index, k_new, alpha, accepted, burn_in)
        return (proposed if accepted else state), record


class ReversedMove(JumpMove):
    """View of a JumpMove from its target model; forward and reverse swap roles."""

    def __init__(self, inner: JumpMove):
        self.inner = inner
        self.source = inner.target
        self.target = inner.source
        self.forward_dim = inner.reverse_dim
        self.reverse_dim = inner.forward_dim
        self.forward_discrete = inner.reverse_discrete
        self.reverse_discrete = inner.forward_discrete

    def forward(self, state, u):
        return self.inner.reverse(state, u)

    def reverse(self, state, u_rev):
        return self.inner.forward(state, u_rev)

    def draw_forward(self, state, rng):
        return self.inner.draw_reverse(state, rng)

    def draw_reverse(self, state, rng):
        return self.inner.draw_forward(state, rng)

    def log_forward_density(self, state, u):
        return self.inner.log_reverse_density(state, u)

    def log_reverse_density(self, state, u_rev):
        return self.inner.log_forward_density(state, u_rev)

    def log_jacobian(self, state, u):
        params, latent, u_inner = self.inner.reverse(state, u)
        origin = ChainState(self.inner.source, params, math.nan, math.nan, latent)
        return -self.inner.log_jacobian(origin, u_inner)

    def reversed(self):
        return self.inner


class StandardNormalDraw:
    """Picklable sampler of a standard normal vector of fixed length."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __call__(self, params, rng):
        return rng.standard_normal(self.dim)


def standard_normal_log_density(params: np.ndarray, u: np.ndarray) -> float:
    return float(np.sum(stats.norm.logpdf(u))) if u.size else 0.0


class VectorJumpMove(JumpMove):
    """
    JumpMove over plain parameter vectors, assembled from callables.

    ``forward_fn(params, u) -> (params', u')`` and ``reverse_fn(params', u')
    -> (params, u)`` must be mutual inverses; ``log_jacobian_fn(params, u)``
    gives the log-Jacobian of ``forward_fn``. Random vectors default to
    independent standard normals. Pass module-level functions (or partials of
    them) when the move has to cross process boundaries.
    """

    def __init__(self, source: int, target: int,
                 forward_fn: Callable, reverse_fn: Callable, log_jacobian_fn: Callable,
                 forward_dim: int, reverse_dim: int = 0,
                 forward_sampler: Optional[Callable] = None,
                 forward_log_density: Optional[Callable] = None,
                 reverse_sampler: Optional[Callable] = None,
                 reverse_log_density: Optional[Callable] = None):
        self.source = int(source)
        self.target = int(target)
        self.forward_fn = forward_fn
        self.reverse_fn = reverse_fn
        self.log_jacobian_fn = log_jacobian_fn
        self.forward_dim = int(forward_dim)
        self.reverse_dim = int(reverse_dim)
        self.forward_sampler = forward_sampler or StandardNormalDraw(self.forward_dim)
        self.forward_log_density = forward_log_density or standard_normal_log_density
        self.reverse_sampler = reverse_sampler or StandardNormalDraw(self.reverse_dim)
        self.reverse_log_density = reverse_log_density or standard_normal_log_density

    def forward(self, state, u):
        params, u_rev = self.forward_fn(state.params, np.asarray(u, dtype=float))
        return np.asarray(params, dtype=float), None, np.asarray(u_rev, dtype=float)

    def reverse(self, state, u_rev):
        params, u = self.reverse_fn(state.params, np.asarray(u_rev, dtype=float))
        return np.asarray(params, dtype=float), None, np.asarray(u, dtype=float)

    def draw_forward(self, state, rng):
        return np.asarray(self.forward_sampler(state.params, rng), dtype=float)

    def draw_reverse(self, state, rng):
        return np.asarray(self.reverse_sampler(state.params, rng), dtype=float)

    def log_forward_density(self, state, u):
        return float(self.forward_log_density(state.params, np.asarray(u, dtype=float)))

    def log_reverse_density(self, state, u_rev):
        return float(self.reverse_log_density(state.params, np.asarray(u_rev, dtype=float)))

    def log_jacobian(self, state, u):
        return float(self.log_jacobian_fn(state.params, np.asarray(u, dtype=float)))


def propose(move: JumpMove, state: ChainState, space: ModelSpace, data,
            rng: np.random.Generator) -> Tuple[ChainState, np.ndarray, np.ndarray]:
    """Draw ``u``, apply the forward map and evaluate the proposed state."""
    u = np.asarray(move.draw_forward(state, rng), dtype=float)
    params, latent, u_rev = move.forward(state, u)
    target_model = space.model(move.target)
    if np.shape(params) != (target_model.dimension,):
        raise ContractViolation(
            f"move {move.source}->{move.target} produced {np.size(params)} parameters, "
            f"model {move.target} has {target_model.dimension}"
        )
    return target_model.evaluate(params, data, latent), u, np.asarray(u_rev, dtype=float)


def acceptance_log_ratio(current: ChainState, proposed: ChainState, move: JumpMove,
                         u: np.ndarray, u_rev: np.ndarray, space: ModelSpace) -> float:
    """
    log A for a reversible jump from ``current`` to ``proposed``.

    A = pi(k', theta') q(k' -> k) q(u') / [pi(k, theta) q(k -> k') q(u)] * |J|.
    The normalising constant of the posterior is never needed. A non-finite
    log-density at either state yields -inf (reject).
    """
    if current.model_index != move.source or proposed.model_index != move.target:
        raise ContractViolation(
            f"move {move.source}->{move.target} does not connect "
            f"{current.model_index} to {proposed.model_index}"
        )
    u = np.asarray(u, dtype=float)
    u_rev = np.asarray(u_rev, dtype=float)
    if u.shape[0] != move.forward_dim + move.forward_discrete:
        raise ContractViolation(f"u has length {u.shape[0]}, move expects "
                                f"{move.forward_dim + move.forward_discrete}")
    if u_rev.shape[0] != move.reverse_dim + move.reverse_discrete:
        raise ContractViolation(f"u' has length {u_rev.shape[0]}, move expects "
                                f"{move.reverse_dim + move.reverse_discrete}")
    n_from = space.model(move.source).dimension
    n_to = space.model(move.target).dimension
    if n_from + move.forward_dim != n_to + move.reverse_dim:
        raise ContractViolation(
            f"dimension mismatch: {n_from} + {move.forward_dim} != {n_to} + {move.reverse_dim}"
        )
    if current.dimension != n_from or proposed.dimension != n_to:
        raise ContractViolation("state dimension does not match its model")
    if not (current.is_finite() and proposed.is_finite()):
        return -math.inf

    k, k_new = current.model_index, proposed.model_index
    q_fwd = space.jump_probability(k, k_new)
    q_rev = space.jump_probability(k_new, k)
    if q_fwd <= 0 or q_rev <= 0:
        return -math.inf
    log_a = (
        space.log_target(proposed) - space.log_target(current)
        + math.log(q_rev) - math.log(q_fwd)
        + move.log_reverse_density(proposed, u_rev)
        - move.log_forward_density(current, u)
        + move.log_jacobian(current, u)
    )
    if math.isnan(log_a):
        return -math.inf
    return float(log_a)


def mh_within_model_step(state: ChainState, scale, model: ModelDefinition, data,
                         rng: np.random.Generator,
                         log_target: Optional[Callable[[ChainState], float]] = None) -> ChainState:
    """
    One random-walk Metropolis update inside the current model.

    Args:
        state: Current state (model ``model.index``).
        scale: Positive proposal scales, one per coordinate.
        model: The model of ``state``.
        data: Data passed to the likelihood.
        rng: Random generator.
        log_target: Optional density to target instead of log p(theta|k) + log L
            (used for tempered steps).

    Returns:
        The proposed state if accepted, otherwise ``state``.
    """
    if state.model_index != model.index:
        raise ContractViolation(f"state is in model {state.model_index}, not {model.index}")
    scale = np.asarray(scale, dtype=float)
    if scale.shape != (model.dimension,):
        raise ContractViolation(
            f"scale has shape {scale.shape}, model {model.index} has {model.dimension} parameters"
        )
    if model.dimension == 0:
        return state
    if np.any(scale <= 0):
        raise ContractViolation("random-walk scales must be positive")

    target = log_target or (lambda s: s.log_density)
    candidate = model.evaluate(model.propose_within(state.params, scale, rng), data, state.latent)
    log_new = target(candidate)
    if not math.isfinite(log_new):
        return state
    if rng.random() < acceptance_probability(log_new - target(state)):
        return candidate
    return state


def _kernels_from(moves: Sequence[BetweenModelKernel], k: int) -> List[BetweenModelKernel]:
    return [m for m in moves if k in (m.source, m.target)]


def rj_between_model_step(state: ChainState, space: ModelSpace,
                          moves: Sequence[BetweenModelKernel], data,
                          rng: np.random.Generator, iteration: int = 0,
                          burn_in: bool = False) -> Tuple[ChainState, AcceptanceRecord]:
    """
    Attempt one between-model transition.

    Draws k' ~ q(k -> .), picks a kernel connecting k and k' (uniformly when
    several do) and lets it propose and accept. A drawn self-jump without a
    dedicated kernel leaves the state unchanged and is recorded with alpha 1.
    """
    k = state.model_index
    departing = _kernels_from(moves, k)
    if not departing:
        raise ContractViolation(f"no between-model move departs from model {k}")
    k_new = space.draw_jump(k, rng)
    candidates = [m for m in departing if m.connects(k, k_new)]
    if not candidates:
        if k_new == k:
            return state, AcceptanceRecord(iteration, k, k, 1.0, True, burn_in)
        raise ContractViolation(f"no move connects model {k} to model {k_new}")
    kernel = candidates[0] if len(candidates) == 1 else candidates[int(rng.integers(len(candidates)))]
    return kernel.transition(state, k_new, space, data, rng, iteration=iteration, burn_in=burn_in)


def initial_state(space: ModelSpace, k: int, data, rng: np.random.Generator) -> ChainState:
    """Draw the starting state from the prior of model ``k``."""
    model = space.model(k)
    try:
        params, latent = model.sample_prior(rng, data)
        state = model.evaluate(params, data, latent)
    except (EvaluationError, ValueError, FloatingPointError) as exc:
        raise StartupError(f"model {k} could not be evaluated at the initial state: {exc}",
                           model_index=k) from exc
    if not state.is_finite():
        raise StartupError(
            f"model {k} has a non-finite log-density at the initial state "
            f"(log_prior={state.log_prior}, log_likelihood={state.log_likelihood})",
            model_index=k,
        )
    return state


def run_replicate(config: SamplerConfig, space: ModelSpace,
                  moves: Sequence[BetweenModelKernel], data, replicate: int) -> ReplicateTrace:
    """Run one chain; see :func:`run_sampler`."""
    rng = replicate_generator(config.seed, replicate)
    start = config.start_model if config.start_model is not None else space.indices[0]
    state = initial_state(space, start, data, rng)
    logger.info("replicate %d: start in model %d", replicate, start)

    trace = ReplicateTrace(replicate=replicate)
    scales: Dict[int, np.ndarray] = {}
    labels: Dict[int, list] = {}
    for iteration in range(1, config.iterations + 1):
        k = state.model_index
        model = space.model(k)
        if k not in scales:
            scales[k] = config.scale_for(k, model.dimension)
        state = model.within_model_update(state, scales[k], data, rng)

        if moves and rng.random() < config.between_move_probability:
            state, record = rj_between_model_step(
                state, space, moves, data, rng,
                iteration=iteration, burn_in=iteration <= config.burn_in,
            )
            trace.records.append(record)

        if iteration > config.burn_in and (iteration - config.burn_in) % config.thinning == 0:
            k = state.model_index
            model = space.model(k)
            if k not in labels:
                labels[k] = model.parameter_labels()
            trace.record_state(iteration, state, model.deviance(state, data), labels[k])

    logger.info("replicate %d: %d states recorded, %d between-model attempts",
                replicate, len(trace), len(trace.records))
    return trace


def _run_replicate_job(job) -> ReplicateTrace:
    return run_replicate(*job)


def run_sampler(config: SamplerConfig, space: ModelSpace,
                moves: Sequence[BetweenModelKernel], data, workers: int = 1) -> Trace:
    """
    Run ``config.replicates`` independent chains.

    Every replicate uses its own random sub-stream, so the result does not
    depend on ``workers``.

    Raises:
        StartupError: If the initial state cannot be evaluated.
    """
    if config.start_model is not None and config.start_model not in space.models:
        raise ContractViolation(f"start model {config.start_model} is not in the model space")
    jobs = [(config, space, moves, data, r) for r in range(config.replicates)]
    if workers > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.replicates)) as pool:
            replicates = list(pool.map(_run_replicate_job, jobs))
    else:
        replicates = [_run_replicate_job(job) for job in jobs]
    return Trace(replicates=replicates)


# --------------------------------------------------------------- move checks
def numerical_log_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                           step: float = 1e-6) -> float:
    """log |det J| of ``fn`` at ``x`` from central differences."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.shape[0]):
        h = step * max(1.0, abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        columns.append((np.asarray(fn(up)) - np.asarray(fn(down))) / (2.0 * h))
    jac = np.column_stack(columns) if columns else np.zeros((0, 0))
    sign, logdet = np.linalg.slogdet(jac)
    return float(logdet) if sign != 0 else -math.inf


@dataclass(frozen=True)
class MoveCheck:
    """Round-trip error and Jacobian comparison for one (state, u) point."""
    round_trip_error: float
    analytic_log_jacobian: float
    numeric_log_jacobian: float

    @property
    def jacobian_error(self) -> float:
        return abs(self.analytic_log_jacobian - self.numeric_log_jacobian)


def check_move(move: JumpMove, state: ChainState, u: np.ndarray, step: float = 1e-6) -> MoveCheck:
    """
    Verify a move at one point: reverse(forward(theta, u)) == (theta, u) and the
    analytic log-Jacobian against finite differences over the continuous
    coordinates (discrete coordinates of u and u' are held fixed).
    """
    u = np.asarray(u, dtype=float)
    params, latent, u_rev = move.forward(state, u)
    landed = ChainState(move.target, np.asarray(params, dtype=float), math.nan, math.nan, latent)
    back_params, _, back_u = move.reverse(landed, u_rev)
    error = max(
        float(np.max(np.abs(back_params - state.params), initial=0.0)),
        float(np.max(np.abs(np.asarray(back_u) - u), initial=0.0)),
    )
    n = state.dimension
    d_fwd, d_rev = move.forward_discrete, move.reverse_discrete

    def mapping(x):
        moved = replace(state, params=x[:n])
        out_params, _, out_u = move.forward(moved, np.concatenate([u[:d_fwd], x[n:]]))
        return np.concatenate([out_params, np.asarray(out_u)[d_rev:]])

    numeric = numerical_log_jacobian(mapping, np.concatenate([state.params, u[d_fwd:]]), step)
    return MoveCheck(error, float(move.log_jacobian(state, u)), numeric)
