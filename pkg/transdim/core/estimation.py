"""
Posterior model probabilities and Bayes factors from sampler output.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from transdim.core.errors import ContractViolation, UndefinedEstimateError
from transdim.core.state import AcceptanceRecord

logger = logging.getLogger(__name__)

DEFAULT_BATCHES = 50


@dataclass(frozen=True)
class ModelProbabilityEstimate:
    """Visit-based posterior model probabilities with batch-means standard errors."""
    probabilities: Dict[int, float]
    standard_errors: Dict[int, float]
    visits: Dict[int, int]

    @property
    def total(self) -> int:
        return int(sum(self.visits.values()))

    def to_dict(self) -> dict:
        return {
            str(k): {
                'probability': self.probabilities[k],
                'standard_error': self.standard_errors[k],
                'visits': self.visits[k],
            }
            for k in sorted(self.probabilities)
        }


def _as_sequences(model_indices) -> List[np.ndarray]:
    if len(model_indices) and np.ndim(model_indices[0]) > 0:
        return [np.asarray(s, dtype=int) for s in model_indices]
    return [np.asarray(model_indices, dtype=int)]


def batch_means_variance(values: np.ndarray, batches: int = DEFAULT_BATCHES) -> float:
    """Variance of the mean of ``values`` estimated from non-overlapping batch means."""
    values = np.asarray(values, dtype=float)
    b = min(batches, values.shape[0])
    if b < 2:
        return 0.0
    means = np.array([chunk.mean() for chunk in np.array_split(values, b)])
    return float(np.var(means, ddof=1) / b)


def effective_sample_size(indicator, batches: int = DEFAULT_BATCHES) -> float:
    """n * var(x) / (n * Var(mean)); the chain length when either variance vanishes."""
    indicator = np.asarray(indicator, dtype=float)
    n = indicator.shape[0]
    if n < 2:
        return float(n)
    mean_variance = batch_means_variance(indicator, batches)
    sample_variance = float(np.var(indicator, ddof=1))
    if mean_variance <= 0 or sample_variance <= 0:
        return float(n)
    return sample_variance / mean_variance


def posterior_model_probs(model_indices, burn_in: int = 0,
                          batches: int = DEFAULT_BATCHES) -> ModelProbabilityEstimate:
    """
    Visit proportions of each model after ``burn_in`` recorded states.

    ``model_indices`` is one sequence or a list of sequences (replicates);
    replicates are pooled and their batch-means variances combined.
    """
    sequences = _as_sequences(model_indices)
    if burn_in < 0:
        raise ContractViolation("burn_in must be >= 0")
    if any(burn_in >= s.shape[0] for s in sequences):
        raise ContractViolation(f"burn_in={burn_in} leaves no recorded states")
    kept = [s[burn_in:] for s in sequences]
    n_total = sum(s.shape[0] for s in kept)
    pooled = np.concatenate(kept)
    models = sorted(int(k) for k in np.unique(pooled))
    probabilities, errors, visits = {}, {}, {}
    for k in models:
        count = int(np.count_nonzero(pooled == k))
        variance = sum(
            (s.shape[0] / n_total) ** 2 * batch_means_variance((s == k).astype(float), batches)
            for s in kept
        )
        probabilities[k] = count / n_total
        errors[k] = math.sqrt(variance)
        visits[k] = count
    return ModelProbabilityEstimate(probabilities, errors, visits)


def bayes_factor_visits(estimate: ModelProbabilityEstimate, k_new: int, k: int,
                        prior: Mapping[int, float]) -> float:
    """
    B(k', k) = (p(k' | x) / p(k | x)) * (p(k) / p(k')) from visit proportions.

    Raises:
        UndefinedEstimateError: If either model was never visited.
    """
    for model in (k_new, k):
        if estimate.visits.get(model, 0) == 0:
            raise UndefinedEstimateError(
                f"model {model} was never visited; use the bridge estimator instead"
            )
    if prior.get(k, 0) <= 0 or prior.get(k_new, 0) <= 0:
        raise ContractViolation("both models need positive prior probability")
    return (estimate.probabilities[k_new] / estimate.probabilities[k]) * (prior[k] / prior[k_new])


@dataclass(frozen=True)
class BridgeEstimate:
    value: float
    standard_error: float
    forward_attempts: int
    reverse_attempts: int
    mean_forward_alpha: float
    mean_reverse_alpha: float


def _alphas(records: Iterable[AcceptanceRecord], k_from: int, k_to: int, include_burn_in: bool) -> np.ndarray:
    return np.array([
        r.alpha for r in records
        if r.k_from == k_from and r.k_to == k_to and (include_burn_in or not r.burn_in)
    ], dtype=float)


def bridge_estimate(records: Sequence[AcceptanceRecord], k_new: int, k: int,
                    include_burn_in: bool = False,
                    model_prior: Optional[Mapping[int, float]] = None,
                    jump_graph: Optional[Mapping[int, Mapping[int, float]]] = None) -> BridgeEstimate:
    """
    Ratio of mean acceptance probabilities of k -> k' and k' -> k attempts.

    Without ``model_prior`` / ``jump_graph`` the ratio is returned as is (a
    Bayes factor when prior and jump probabilities are symmetric). With them
    it is multiplied by p(k)/p(k') and q(k -> k')/q(k' -> k). The standard
    error follows from the delta method.

    Raises:
        UndefinedEstimateError: If either direction was never attempted.
    """
    records = list(records)
    forward = _alphas(records, k, k_new, include_burn_in)
    reverse = _alphas(records, k_new, k, include_burn_in)
    if forward.size == 0 or reverse.size == 0:
        missing = f"{k}->{k_new}" if forward.size == 0 else f"{k_new}->{k}"
        raise UndefinedEstimateError(
            f"no {missing} attempts recorded; further manipulation is required"
        )
    a, b = float(forward.mean()), float(reverse.mean())
    if b == 0:
        raise UndefinedEstimateError(
            f"every {k_new}->{k} attempt had zero acceptance; further manipulation is required"
        )
    correction = 1.0
    if model_prior is not None:
        correction *= model_prior[k] / model_prior[k_new]
    if jump_graph is not None:
        correction *= jump_graph[k][k_new] / jump_graph[k_new][k]
    value = correction * a / b
    relative = 0.0
    if forward.size > 1 and a > 0:
        relative += float(np.var(forward, ddof=1)) / (forward.size * a ** 2)
    if reverse.size > 1:
        relative += float(np.var(reverse, ddof=1)) / (reverse.size * b ** 2)
    return BridgeEstimate(value, abs(value) * math.sqrt(relative), int(forward.size), int(reverse.size), a, b)


def bayes_factor_bridge(records: Sequence[AcceptanceRecord], k_new: int, k: int,
                        include_burn_in: bool = False,
                        model_prior: Optional[Mapping[int, float]] = None,
                        jump_graph: Optional[Mapping[int, Mapping[int, float]]] = None) -> float:
    """Point value of :func:`bridge_estimate`."""
    return bridge_estimate(records, k_new, k, include_burn_in, model_prior, jump_graph).value


def bayes_factor_table(model_sequences, records: Sequence[AcceptanceRecord],
                       model_prior: Mapping[int, float],
                       jump_graph: Mapping[int, Mapping[int, float]],
                       burn_in: int = 0, batches: int = DEFAULT_BATCHES) -> List[dict]:
    """
    Both Bayes factor estimates for every directly connected pair k < k'.

    Unavailable estimates are reported with a reason rather than raised.
    """
    estimate = posterior_model_probs(model_sequences, burn_in=burn_in, batches=batches)
    records = list(records)
    rows = []
    for k in sorted(jump_graph):
        for k_new in sorted(jump_graph[k]):
            if k_new <= k or jump_graph[k][k_new] <= 0:
                continue
            row = {'k': k, 'k_prime': k_new, 'available': True, 'notes': []}
            try:
                row['visits'] = bayes_factor_visits(estimate, k_new, k, model_prior)
            except UndefinedEstimateError as exc:
                row['visits'] = None
                row['notes'].append(str(exc))
            try:
                bridge = bridge_estimate(records, k_new, k, model_prior=model_prior, jump_graph=jump_graph)
                row.update(bridge=bridge.value, bridge_standard_error=bridge.standard_error,
                           attempts_forward=bridge.forward_attempts,
                           attempts_reverse=bridge.reverse_attempts)
            except UndefinedEstimateError as exc:
                row.update(bridge=None, bridge_standard_error=None,
                           attempts_forward=int(_alphas(records, k, k_new, False).size),
                           attempts_reverse=int(_alphas(records, k_new, k, False).size))
                row['notes'].append(str(exc))
            row['available'] = row['visits'] is not None or row['bridge'] is not None
            rows.append(row)
    return rows
