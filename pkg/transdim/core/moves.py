"""
Between-model move library.

Split/merge moment matching and birth/death for Gaussian mixtures, centering
calibration of proposal parameters (zeroth and n-th order), delayed rejection,
annealed jumps and the moment-matched generic proposal (auto-RJ).

Mixture parameter vectors are laid out as ``[w_1..w_k, mu_1..mu_k,
var_1..var_k]``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, stats
from scipy.special import comb

from transdim.core.errors import (
    CalibrationError,
    ContractViolation,
    DegenerateSplitError,
    MoveAborted,
)
from transdim.core.sampler import (
    BetweenModelKernel,
    JumpMove,
    acceptance_log_ratio,
    acceptance_probability,
    mh_within_model_step,
    propose,
)
from transdim.core.state import AcceptanceRecord, ChainState, ModelSpace

logger = logging.getLogger(__name__)

# Floor for a merged variance that cancellation drove to zero or below.
MERGE_VARIANCE_FLOOR = 1e-12


# ----------------------------------------------------------------- mixtures
class MixtureComponent(NamedTuple):
    weight: float
    mean: float
    variance: float


def mixture_components(params: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a flat mixture vector into (weights, means, variances)."""
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.shape[0] % 3:
        raise ContractViolation(f"mixture parameter vector must have length 3k, got {params.shape}")
    k = params.shape[0] // 3
    return params[:k], params[k:2 * k], params[2 * k:]


def pack_mixture(weights, means, variances) -> np.ndarray:
    return np.concatenate([np.asarray(weights, dtype=float), np.asarray(means, dtype=float),
                           np.asarray(variances, dtype=float)])


def _check_component(params: np.ndarray, j: int) -> int:
    k = len(params) // 3
    if not 0 <= j < k:
        raise ContractViolation(f"component {j} out of range for k={k}")
    return k


def split_component(params: np.ndarray, j: int, u) -> np.ndarray:
    """
    Split component ``j`` into two preserving weight, mean and second moment.

    The first child takes position ``j`` and the second ``j + 1``.

    Raises:
        DegenerateSplitError: If any of u1, u2, u3 is not strictly inside (0, 1).
    """
    _check_component(params, j)
    u1, u2, u3 = (float(v) for v in u)
    if not all(0.0 < v < 1.0 for v in (u1, u2, u3)):
        raise DegenerateSplitError(f"split variables must lie in (0, 1), got {(u1, u2, u3)}")
    w, mu, var = mixture_components(params)
    w_star, mu_star, var_star = w[j], mu[j], var[j]
    sd_star = math.sqrt(var_star)
    w1, w2 = w_star * u1, w_star * (1.0 - u1)
    mu1 = mu_star - u2 * sd_star * math.sqrt(w2 / w1)
    mu2 = mu_star + u2 * sd_star * math.sqrt(w1 / w2)
    spread = (1.0 - u2 ** 2) * var_star * w_star
    var1 = u3 * spread / w1
    var2 = (1.0 - u3) * spread / w2
    return pack_mixture(
        np.concatenate([w[:j], [w1, w2], w[j + 1:]]),
        np.concatenate([mu[:j], [mu1, mu2], mu[j + 1:]]),
        np.concatenate([var[:j], [var1, var2], var[j + 1:]]),
    )


def split_component_limit(params: np.ndarray, j: int) -> np.ndarray:
    """Centering-point form of a split: both children at the parent, all weight on the first."""
    _check_component(params, j)
    w, mu, var = mixture_components(params)
    return pack_mixture(
        np.concatenate([w[:j], [w[j], 0.0], w[j + 1:]]),
        np.concatenate([mu[:j], [mu[j], mu[j]], mu[j + 1:]]),
        np.concatenate([var[:j], [var[j], var[j]], var[j + 1:]]),
    )


def split_log_jacobian(params: np.ndarray, j: int, u) -> float:
    """log |J| of :func:`split_component` at ``(params, u)``."""
    u1, u2, u3 = (float(v) for v in u)
    split = split_component(params, j, (u1, u2, u3))
    w, _, var = mixture_components(params)
    _, mu_new, var_new = mixture_components(split)
    return float(
        math.log(w[j]) + math.log(abs(mu_new[j] - mu_new[j + 1]))
        + math.log(var_new[j]) + math.log(var_new[j + 1])
        - math.log(u2) - math.log(1.0 - u2 ** 2) - math.log(u3) - math.log(1.0 - u3)
        - math.log(var[j])
    )


@dataclass(frozen=True)
class MergeResult:
    params: np.ndarray
    u: np.ndarray
    clamped: bool = False


def merge_components(params: np.ndarray, j1: int, j2: int) -> MergeResult:
    """
    Merge components ``j1`` and ``j2`` preserving the 0th, 1st and 2nd moments.

    The merged component takes position ``min(j1, j2)``; ``u`` is the split
    vector that recreates the pair (with ``j1`` as first child).
    """
    k = _check_component(params, j1)
    _check_component(params, j2)
    if j1 == j2:
        raise ContractViolation("cannot merge a component with itself")
    if k < 2:
        raise ContractViolation("merge needs at least two components")
    w, mu, var = mixture_components(params)
    wa, wb = w[j1], w[j2]
    w_new = wa + wb
    mu_new = (wa * mu[j1] + wb * mu[j2]) / w_new
    var_new = (wa * (mu[j1] ** 2 + var[j1]) + wb * (mu[j2] ** 2 + var[j2])) / w_new - mu_new ** 2
    clamped = False
    if not var_new > MERGE_VARIANCE_FLOOR:
        logger.warning("merged variance %.3g clamped to %g", var_new, MERGE_VARIANCE_FLOOR)
        var_new = MERGE_VARIANCE_FLOOR
        clamped = True
    u1 = wa / w_new
    u2 = (mu[j2] - mu[j1]) * math.sqrt(wa * wb) / (w_new * math.sqrt(var_new))
    u3 = wa * var[j1] / (w_new * var_new * (1.0 - u2 ** 2)) if abs(u2) < 1.0 else math.nan

    keep, drop = min(j1, j2), max(j1, j2)
    w_out, mu_out, var_out = w.copy(), mu.copy(), var.copy()
    w_out[keep], mu_out[keep], var_out[keep] = w_new, mu_new, var_new
    merged = pack_mixture(np.delete(w_out, drop), np.delete(mu_out, drop), np.delete(var_out, drop))
    return MergeResult(merged, np.array([u1, u2, u3]), clamped)


@dataclass(frozen=True)
class BirthDeathProposal:
    """
    Result of :func:`birth_death_component`.

    ``u`` holds (w, mu, var) of the born / killed component, ``index`` its
    position, ``log_jacobian`` the birth-direction sign convention applied to
    the move actually made, ``log_proposal`` the log-density of ``u`` under
    the birth proposal (0 when no hyperparameters were supplied).
    """
    params: np.ndarray
    u: np.ndarray
    index: int
    log_jacobian: float
    log_proposal: float = 0.0


def birth_proposal_log_density(u, k: int, hyper=None) -> float:
    """log density of a newborn (w, mu, var): Beta(1, k) weight, prior mean and variance."""
    w, m, v = (float(x) for x in u)
    log_q = float(stats.beta.logpdf(w, 1.0, k))
    if hyper is not None:
        log_q += float(stats.norm.logpdf(m, hyper.xi, 1.0 / math.sqrt(hyper.kappa)))
        log_q += float(stats.invgamma.logpdf(v, hyper.alpha, scale=hyper.beta))
    return log_q


def birth_death_component(params: np.ndarray, direction: str, *, new=None,
                          component: Optional[int] = None,
                          allocations: Optional[np.ndarray] = None,
                          hyper=None) -> BirthDeathProposal:
    """
    Add or remove one mixture component.

    Birth inserts ``new = (w, mu, var)`` at its sorted position by mean and
    scales the existing weights by ``1 - w``. Death removes ``component`` and
    renormalises. When ``allocations`` are given, death is only possible for a
    component with no observations allocated.

    Raises:
        MoveAborted: Death with no empty component to remove.
    """
    w, mu, var = mixture_components(params)
    k = w.shape[0]
    if direction == 'birth':
        if new is None:
            raise ContractViolation("birth needs the new component (w, mu, var)")
        w_new, mu_new, var_new = (float(x) for x in new)
        if not (0.0 < w_new < 1.0 and var_new > 0):
            raise ContractViolation(f"invalid newborn component {(w_new, mu_new, var_new)}")
        j = int(np.searchsorted(mu, mu_new, side='right'))
        born = pack_mixture(
            np.insert(w * (1.0 - w_new), j, w_new),
            np.insert(mu, j, mu_new),
            np.insert(var, j, var_new),
        )
        return BirthDeathProposal(
            params=born, u=np.array([w_new, mu_new, var_new]), index=j,
            log_jacobian=(k - 1) * math.log1p(-w_new),
            log_proposal=birth_proposal_log_density((w_new, mu_new, var_new), k, hyper),
        )
    if direction == 'death':
        if k < 2:
            raise MoveAborted("cannot kill the only component")
        if allocations is not None:
            counts = np.bincount(np.asarray(allocations, dtype=int), minlength=k)
            empty = np.flatnonzero(counts == 0)
            if component is None:
                if empty.size == 0:
                    raise MoveAborted("no empty component to kill")
                component = int(empty[0])
            elif counts[component] > 0:
                raise MoveAborted(f"component {component} has {counts[component]} observations")
        if component is None:
            raise ContractViolation("death needs a component index or allocations")
        _check_component(params, component)
        w_dead = w[component]
        survivors = np.delete(w, component) / (1.0 - w_dead)
        killed = pack_mixture(survivors, np.delete(mu, component), np.delete(var, component))
        return BirthDeathProposal(
            params=killed, u=np.array([w_dead, mu[component], var[component]]), index=component,
            log_jacobian=-(k - 2) * math.log1p(-w_dead),
            log_proposal=birth_proposal_log_density((w_dead, mu[component], var[component]),
                                                    k - 1, hyper),
        )
    raise ContractViolation(f"direction must be 'birth' or 'death', got {direction!r}")


# ---------------------------------------------------------------- centering
@dataclass(frozen=True)
class CenteringSolution:
    """Calibrated proposal parameters and how well the centering equations hold."""
    proposal_params: Dict[str, float]
    centering_point: Union[float, np.ndarray, None]
    residuals: Dict[str, float] = field(default_factory=dict)
    order: int = 0


@dataclass(frozen=True)
class ZerothOrderContext:
    """
    ``log_acceptance(sigma)`` is log A at the centering point as a function of
    the proposal scale; the root of it inside ``bracket`` is the calibration.
    """
    log_acceptance: Callable[[float], float]
    bracket: Tuple[float, float] = (1e-8, 1e8)
    centering_point: Union[float, np.ndarray, None] = 0.0
    name: str = 'sigma'


def zeroth_order_scale(context: ZerothOrderContext) -> CenteringSolution:
    """
    Solve A(c(theta)) = 1 for the proposal scale.

    Raises:
        CalibrationError: If log A does not change sign across the bracket.
    """
    lo, hi = context.bracket
    f_lo, f_hi = context.log_acceptance(lo), context.log_acceptance(hi)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise CalibrationError(
            f"log A has no sign change on [{lo:g}, {hi:g}]",
            residuals={f'log_A({lo:g})': f_lo, f'log_A({hi:g})': f_hi},
        )
    root = optimize.brentq(context.log_acceptance, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    return CenteringSolution(
        proposal_params={context.name: float(root)},
        centering_point=context.centering_point,
        residuals={'log_A': float(context.log_acceptance(root))},
        order=0,
    )


def ar_birth_scale(sigma_a: float, q_forward: float, q_reverse: float) -> float:
    """Scale of the AR birth proposal solving A = 1 at u = 0."""
    if sigma_a <= 0 or q_forward <= 0 or q_reverse <= 0:
        raise ContractViolation("sigma_a and jump probabilities must be positive")
    return sigma_a * q_forward / q_reverse


def ar_birth_log_acceptance(sigma: float, sigma_a: float, q_forward: float, q_reverse: float) -> float:
    """log A of an AR(k) -> AR(k+1) birth at the centering point u = 0."""
    return (
        float(stats.norm.logpdf(0.0, scale=sigma_a)) + math.log(q_reverse) + math.log(sigma)
        - math.log(q_forward) - float(stats.norm.logpdf(0.0))
    )


@dataclass(frozen=True)
class NthOrderContext:
    """
    ``log_acceptance(u, params)`` is log alpha as a function of the random
    variable and the proposal parameters being calibrated. Derivatives in
    ``u`` are taken at ``point`` by central differences of step ``step``.
    """
    log_acceptance: Callable[[float, np.ndarray], float]
    point: float
    initial: Sequence[float]
    names: Sequence[str]
    step: float = 1e-3
    tolerance: float = 1e-6


def finite_difference(fn: Callable[[float], float], x: float, order: int, step: float) -> float:
    """Central finite difference of the given order."""
    total = 0.0
    for i in range(order + 1):
        total += (-1) ** i * comb(order, i, exact=True) * fn(x + (order / 2.0 - i) * step)
    return total / step ** order


def nth_order_params(context: NthOrderContext, order: int) -> CenteringSolution:
    """
    Choose ``order`` proposal parameters so that the first ``order``
    u-derivatives of log alpha vanish at the evaluation point.

    Raises:
        CalibrationError: If the system has no solution (residuals attached).
    """
    if order < 1:
        raise ContractViolation("order must be >= 1")
    if len(context.initial) != order or len(context.names) != order:
        raise ContractViolation(f"order {order} needs {order} initial values and names")

    def equations(p):
        return np.array([
            finite_difference(lambda u: context.log_acceptance(u, p), context.point, n, context.step)
            for n in range(1, order + 1)
        ])

    solution = optimize.root(equations, np.asarray(context.initial, dtype=float), method='hybr')
    residual = equations(solution.x)
    named = {f'd{n}': float(r) for n, r in enumerate(residual, start=1)}
    if not solution.success or not np.all(np.isfinite(residual)) \
            or np.max(np.abs(residual)) > context.tolerance:
        raise CalibrationError(f"order-{order} centering failed: {solution.message}", residuals=named)
    return CenteringSolution(
        proposal_params={name: float(v) for name, v in zip(context.names, solution.x)},
        centering_point=context.point,
        residuals=named,
        order=order,
    )


def split_beta_params(delta: float, allocated: int) -> Tuple[float, float]:
    """Second-order Beta(p, q) for the split weight variable u1."""
    return delta + 2 * allocated, delta


def split_weight_log_acceptance(u1: float, p: float, q: float, delta: float,
                                allocated_first: int, allocated_second: int = 0) -> float:
    """
    The u1-dependent weight terms of log alpha for a split at its centering
    point: likelihood and Dirichlet weight factors less the Beta(p, q)
    proposal density.
    """
    return (
        (delta - 1 + 2 * allocated_first) * math.log(u1)
        + (delta - 1 + 2 * allocated_second) * math.log1p(-u1)
        - float(stats.beta.logpdf(u1, p, q))
    )


# --------------------------------------------------------- delayed rejection
StageTwo = Union[JumpMove, Callable[[np.ndarray], JumpMove]]


def _resolve_stage_two(stage1: JumpMove, stage2: StageTwo, u_first: np.ndarray) -> JumpMove:
    move = stage2 if isinstance(stage2, JumpMove) else stage2(u_first)
    if (move.source, move.target) != (stage1.source, stage1.target):
        raise ContractViolation("both delayed-rejection stages must connect the same models")
    if (move.forward_dim, move.reverse_dim) != (stage1.forward_dim, stage1.reverse_dim):
        raise ContractViolation("both delayed-rejection stages must use the same random vectors")
    return move


def _log_one_minus(alpha: float) -> float:
    return math.log1p(-alpha) if alpha < 1.0 else -math.inf


def delayed_rejection_step(state: ChainState, stage1: JumpMove, stage2: StageTwo,
                           space: ModelSpace, data, rng: np.random.Generator,
                           iteration: int = 0, burn_in: bool = False
                           ) -> Tuple[ChainState, AcceptanceRecord]:
    """
    Two-stage between-model step.

    Stage 1 is a plain reversible jump with ``stage1``. On rejection a second
    proposal is made with ``stage2`` (a move, or a callable of the rejected
    stage-1 random vector returning one) and accepted with

        min{1, A2 q1(u1 | y*) [1 - alpha1(z -> y*)] / (q1(u1 | x) [1 - alpha1(x -> y)])}

    where ``y*`` is the stage-1 reverse proposal from ``z`` and ``u1`` the
    rejected stage-1 random vector. The q1 factor is one whenever the
    stage-1 density does not depend on the state. The random
    vectors of both stages must have the same densities. The kernel works
    from either end of the move pair. The record carries the stage-1 alpha;
    ``accepted`` reports the outcome of the whole step.
    """
    k = state.model_index
    if k == stage1.source:
        return _delayed_rejection_forward(state, stage1, stage2, space, data, rng, iteration, burn_in)
    if k == stage1.target:
        return _delayed_rejection_reverse(state, stage1, stage2, space, data, rng, iteration, burn_in)
    raise ContractViolation(f"delayed-rejection pair {stage1.source}<->{stage1.target} "
                            f"does not touch model {k}")


def _delayed_rejection_forward(state, stage1, stage2, space, data, rng, iteration, burn_in):
    k, k_new = stage1.source, stage1.target
    try:
        y, a, u_rev1 = propose(stage1, state, space, data, rng)
    except MoveAborted:
        return state, AcceptanceRecord(iteration, k, k_new, 0.0, False, burn_in)
    alpha1 = acceptance_probability(acceptance_log_ratio(state, y, stage1, a, u_rev1, space))
    if rng.random() < alpha1:
        return y, AcceptanceRecord(iteration, k, k_new, alpha1, True, burn_in)

    second = _resolve_stage_two(stage1, stage2, a)
    try:
        z, b, u_rev2 = propose(second, state, space, data, rng)
    except MoveAborted:
        return state, AcceptanceRecord(iteration, k, k_new, alpha1, False, burn_in)
    log_a2 = acceptance_log_ratio(state, z, second, b, u_rev2, space)
    if log_a2 == -math.inf:
        return state, AcceptanceRecord(iteration, k, k_new, alpha1, False, burn_in)
    # stage-1 reverse proposal from z, reusing z's reverse random vector
    params, latent, a_star = stage1.reverse(z, u_rev2)
    y_star = space.evaluate(k, params, data, latent)
    alpha1_mirror = acceptance_probability(
        acceptance_log_ratio(z, y_star, stage1.reversed(), u_rev2, a_star, space)
    )
    # the mirror path redraws the stage-1 vector a from y*, not from x
    log_redraw = stage1.log_forward_density(y_star, a) - stage1.log_forward_density(state, a)
    log_alpha2 = (log_a2 + log_redraw
                  + _log_one_minus(alpha1_mirror) - _log_one_minus(alpha1))
    accepted = rng.random() < acceptance_probability(log_alpha2)
    return (z if accepted else state), AcceptanceRecord(iteration, k, k_new, alpha1, accepted, burn_in)


def _delayed_rejection_reverse(state, stage1, stage2, space, data, rng, iteration, burn_in):
    k, k_new = stage1.target, stage1.source
    back1 = stage1.reversed()
    try:
        y, v, a_tilde = propose(back1, state, space, data, rng)
    except MoveAborted:
        return state, AcceptanceRecord(iteration, k, k_new, 0.0, False, burn_in)
    alpha1 = acceptance_probability(acceptance_log_ratio(state, y, back1, v, a_tilde, space))
    if rng.random() < alpha1:
        return y, AcceptanceRecord(iteration, k, k_new, alpha1, True, burn_in)

    # the second-stage map depends on a fresh draw of the stage-1 random vector
    try:
        w = np.asarray(stage1.draw_forward(y, rng), dtype=float)
    except MoveAborted:
        return state, AcceptanceRecord(iteration, k, k_new, alpha1, False, burn_in)
    second = _resolve_stage_two(stage1, stage2, w)
    params, latent, b = second.reverse(state, v)
    z = space.evaluate(k_new, params, data, latent)
    log_a2 = acceptance_log_ratio(state, z, second.reversed(), v, b, space)
    if log_a2 == -math.inf:
        return state, AcceptanceRecord(iteration, k, k_new, alpha1, False, burn_in)
    params, latent, u_rev = stage1.forward(z, w)
    y_star = space.evaluate(k, params, data, latent)
    alpha1_mirror = acceptance_probability(acceptance_log_ratio(z, y_star, stage1, w, u_rev, space))
    # w was drawn from y; the mirror path draws it from z
    log_redraw = stage1.log_forward_density(z, w) - stage1.log_forward_density(y, w)
    log_alpha2 = (log_a2 + log_redraw
                  + _log_one_minus(alpha1_mirror) - _log_one_minus(alpha1))
    accepted = rng.random() < acceptance_probability(log_alpha2)
    return (z if accepted else state), AcceptanceRecord(iteration, k, k_new, alpha1, accepted, burn_in)


class DelayedRejectionMove(BetweenModelKernel):
    """Run-loop kernel for :func:`delayed_rejection_step`."""

    def __init__(self, stage1: JumpMove, stage2: StageTwo):
        self.stage1 = stage1
        self.stage2 = stage2
        self.source = stage1.source
        self.target = stage1.target

    def transition(self, state, k_new, space, data, rng, iteration=0, burn_in=False):
        return delayed_rejection_step(state, self.stage1, self.stage2, space, data, rng,
                                      iteration=iteration, burn_in=burn_in)


# ------------------------------------------------------------ annealed jumps
class _Tempered:
    def __init__(self, gamma: float):
        self.gamma = gamma

    def __call__(self, state: ChainState) -> float:
        return self.gamma * state.log_density


def _tempered_walk(state, model, scale, data, rng, gamma, kappa):
    target = _Tempered(gamma)
    for _ in range(kappa):
        state = mh_within_model_step(state, scale, model, data, rng, log_target=target)
    return state


def annealed_jump_step(state: ChainState, jump: JumpMove, gamma: float, kappa: int,
                       space: ModelSpace, data, rng: np.random.Generator,
                       scale=None, iteration: int = 0, burn_in: bool = False
                       ) -> Tuple[ChainState, AcceptanceRecord]:
    """
    Between-model jump followed (or, from the target side, preceded) by
    ``kappa`` random-walk steps on pi^gamma inside model ``jump.target``.
    ``kappa = 0`` reduces to a plain reversible jump.
    """
    if gamma < 1:
        raise ContractViolation(f"gamma must be >= 1, got {gamma}")
    if kappa < 0:
        raise ContractViolation(f"kappa must be >= 0, got {kappa}")
    walk_model = space.model(jump.target)
    scale = np.full(walk_model.dimension, 0.1) if scale is None else np.asarray(scale, dtype=float)
    k = state.model_index

    if k == jump.source:
        try:
            landed, u, u_rev = propose(jump, state, space, data, rng)
        except MoveAborted:
            return state, AcceptanceRecord(iteration, k, jump.target, 0.0, False, burn_in)
        log_plain = acceptance_log_ratio(state, landed, jump, u, u_rev, space)
        if log_plain == -math.inf:
            return state, AcceptanceRecord(iteration, k, jump.target, 0.0, False, burn_in)
        walked = _tempered_walk(landed, walk_model, scale, data, rng, gamma, kappa)
        log_a = log_plain + (1.0 - gamma) * (walked.log_density - landed.log_density)
        alpha = acceptance_probability(log_a)
        accepted = rng.random() < alpha
        return (walked if accepted else state), AcceptanceRecord(
            iteration, k, jump.target, alpha, accepted, burn_in)

    if k == jump.target:
        walked = _tempered_walk(state, walk_model, scale, data, rng, gamma, kappa)
        back = jump.reversed()
        try:
            landed, u_rev, u = propose(back, walked, space, data, rng)
        except MoveAborted:
            return state, AcceptanceRecord(iteration, k, jump.source, 0.0, False, burn_in)
        log_plain = acceptance_log_ratio(walked, landed, back, u_rev, u, space)
        if log_plain == -math.inf:
            return state, AcceptanceRecord(iteration, k, jump.source, 0.0, False, burn_in)
        log_a = log_plain - (1.0 - gamma) * (state.log_density - walked.log_density)
        alpha = acceptance_probability(log_a)
        accepted = rng.random() < alpha
        return (landed if accepted else state), AcceptanceRecord(
            iteration, k, jump.source, alpha, accepted, burn_in)

    raise ContractViolation(f"jump {jump.source}<->{jump.target} does not touch model {k}")


class AnnealedMove(BetweenModelKernel):
    """Run-loop kernel for :func:`annealed_jump_step`."""

    def __init__(self, jump: JumpMove, gamma: float = 1.0, kappa: int = 5, scale=None):
        if gamma < 1 or kappa < 0:
            raise ContractViolation("annealed moves need gamma >= 1 and kappa >= 0")
        self.jump = jump
        self.gamma = float(gamma)
        self.kappa = int(kappa)
        self.scale = None if scale is None else np.asarray(scale, dtype=float)
        self.source = jump.source
        self.target = jump.target

    def transition(self, state, k_new, space, data, rng, iteration=0, burn_in=False):
        return annealed_jump_step(state, self.jump, self.gamma, self.kappa, space, data, rng,
                                  scale=self.scale, iteration=iteration, burn_in=burn_in)


# ------------------------------------------------------------------ auto-RJ
Moments = Mapping[int, Tuple[np.ndarray, np.ndarray]]


def estimate_moments(samples) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and lower Cholesky factor of the sample covariance."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < samples.shape[1] + 1:
        raise ContractViolation(
            f"need more than {samples.shape[1]} samples to estimate a {samples.shape[1]}-d covariance"
        )
    mean = samples.mean(axis=0)
    cov = np.atleast_2d(np.cov(samples, rowvar=False))
    try:
        return mean, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ContractViolation(f"sample covariance is not positive definite: {exc}") from None


class _Affine:
    """theta = mu + B z for one model."""

    def __init__(self, k: int, mu, chol):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        n = self.mu.shape[0]
        self.chol = np.asarray(chol, dtype=float).reshape(n, n)
        if n == 0:
            self.inverse = np.zeros((0, 0))
            self.log_det = 0.0
            return
        sign, log_det = np.linalg.slogdet(self.chol)
        if sign == 0 or not math.isfinite(log_det):
            raise ContractViolation(f"scale matrix of model {k} is singular")
        self.inverse = np.linalg.inv(self.chol)
        self.log_det = float(log_det)

    def standardise(self, params):
        return self.inverse @ (np.asarray(params, dtype=float) - self.mu)

    def restore(self, z):
        return self.mu + self.chol @ z


class AutoRJTerms(NamedTuple):
    u: np.ndarray
    u_reverse: np.ndarray
    log_jacobian: float
    log_q_forward: float
    log_q_reverse: float


class AutoRJMove(JumpMove):
    """
    Moment-matched jump: standardise theta with model ``source``'s (mu, B),
    rotate with ``R`` and map through model ``target``'s (mu', B'). Going up
    in dimension pads with u ~ N(0, I); going down returns the dropped
    coordinates as u'. The pair shares one ``R`` of order max(n, n').
    """

    def __init__(self, source: int, target: int, moments: Moments, rotation=None):
        if source not in moments or target not in moments:
            raise ContractViolation(f"moments missing for model {source} or {target}")
        self.source, self.target = int(source), int(target)
        self._from = _Affine(source, *moments[source])
        self._to = _Affine(target, *moments[target])
        n, n_new = self._from.mu.shape[0], self._to.mu.shape[0]
        order = max(n, n_new)
        rotation = np.eye(order) if rotation is None else np.asarray(rotation, dtype=float)
        if rotation.shape != (order, order) or not np.allclose(rotation.T @ rotation, np.eye(order),
                                                               atol=1e-10):
            raise ContractViolation(f"R must be an orthogonal {order}x{order} matrix")
        self.rotation = rotation
        self.forward_dim = max(0, n_new - n)
        self.reverse_dim = max(0, n - n_new)

    def _map(self, params, u):
        z = self._from.standardise(params)
        n_new = self._to.mu.shape[0]
        if self.forward_dim:
            return self._to.restore(self.rotation @ np.concatenate([z, u])), np.zeros(0)
        v = self.rotation.T @ z if self.reverse_dim else self.rotation @ z
        return self._to.restore(v[:n_new]), v[n_new:]

    def _unmap(self, params, u_rev):
        z = self._to.standardise(params)
        n = self._from.mu.shape[0]
        if self.forward_dim:
            v = self.rotation.T @ z
            return self._from.restore(v[:n]), v[n:]
        if self.reverse_dim:
            return self._from.restore(self.rotation @ np.concatenate([z, u_rev])), np.zeros(0)
        return self._from.restore(self.rotation.T @ z), np.zeros(0)

    def forward(self, state, u):
        params, u_rev = self._map(state.params, np.asarray(u, dtype=float))
        return params, None, u_rev

    def reverse(self, state, u_rev):
        params, u = self._unmap(state.params, np.asarray(u_rev, dtype=float))
        return params, None, u

    def draw_forward(self, state, rng):
        return rng.standard_normal(self.forward_dim)

    def draw_reverse(self, state, rng):
        return rng.standard_normal(self.reverse_dim)

    def log_forward_density(self, state, u):
        return float(np.sum(stats.norm.logpdf(u))) if self.forward_dim else 0.0

    def log_reverse_density(self, state, u_rev):
        return float(np.sum(stats.norm.logpdf(u_rev))) if self.reverse_dim else 0.0

    def log_jacobian(self, state, u):
        return self._to.log_det - self._from.log_det


def autorj_proposal(state: ChainState, k_new: int, moments: Moments, rotation,
                    rng: np.random.Generator) -> Tuple[np.ndarray, AutoRJTerms]:
    """Propose theta' in model ``k_new`` with the moment-matched map."""
    move = AutoRJMove(state.model_index, k_new, moments, rotation)
    u = move.draw_forward(state, rng)
    params, _, u_rev = move.forward(state, u)
    return params, AutoRJTerms(
        u=u, u_reverse=u_rev,
        log_jacobian=move.log_jacobian(state, u),
        log_q_forward=move.log_forward_density(state, u),
        log_q_reverse=move.log_reverse_density(None, u_rev),
    )
