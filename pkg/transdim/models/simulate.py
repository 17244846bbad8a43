"""Synthetic datasets for the built-in model families."""

from typing import Any, Mapping, Optional

import numpy as np

from transdim.core.errors import ContractViolation

DATASET_KINDS = ('mixture', 'ar', 'changepoint', 'gaussian_mean')


def _mixture(params, size, rng):
    weights = np.asarray(params['weights'], dtype=float)
    means = np.asarray(params['means'], dtype=float)
    sds = np.sqrt(np.asarray(params['variances'], dtype=float))
    labels = rng.choice(weights.shape[0], size=size, p=weights / weights.sum())
    return rng.normal(means[labels], sds[labels])


def _ar(params, size, rng, warm_up: int = 200):
    coefficients = np.asarray(params['coefficients'], dtype=float)
    sd = float(np.sqrt(params.get('noise_variance', 1.0)))
    order = coefficients.shape[0]
    series = np.zeros(size + warm_up + order)
    noise = rng.normal(0.0, sd, size=series.shape[0])
    for t in range(order, series.shape[0]):
        series[t] = coefficients @ series[t - order:t][::-1] + noise[t]
    return series[-size:]


def _changepoint(params, size, rng):
    horizon = float(params['horizon'])
    positions = np.asarray(params.get('positions', []), dtype=float)
    heights = np.asarray(params['heights'], dtype=float)
    edges = np.concatenate([[0.0], positions, [horizon]])
    events = [rng.uniform(lo, hi, size=rng.poisson(h * (hi - lo)))
              for lo, hi, h in zip(edges[:-1], edges[1:], heights)]
    return np.sort(np.concatenate(events)) if events else np.zeros(0)


def _gaussian_mean(params, size, rng):
    return rng.normal(float(params.get('mean', 0.0)), 1.0, size=size)


def simulate_dataset(model_kind: str, true_params: Mapping[str, Any], size: Optional[int],
                     rng: np.random.Generator) -> np.ndarray:
    """
    Draw a dataset from a member of one of the model families.

    Args:
        model_kind: One of ``mixture``, ``ar``, ``changepoint``, ``gaussian_mean``.
        true_params: ``weights/means/variances`` (mixture), ``coefficients``
            and ``noise_variance`` (ar), ``horizon/positions/heights``
            (changepoint) or ``mean`` (gaussian_mean).
        size: Number of observations; ignored for change-point data, whose
            count is random.
        rng: Generator; the result is a deterministic function of its state.
    """
    if model_kind == 'mixture':
        return _mixture(true_params, size, rng)
    if model_kind == 'ar':
        return _ar(true_params, size, rng)
    if model_kind == 'changepoint':
        return _changepoint(true_params, size, rng)
    if model_kind == 'gaussian_mean':
        return _gaussian_mean(true_params, size, rng)
    raise ContractViolation(f"unknown dataset kind {model_kind!r}; expected one of {DATASET_KINDS}")
