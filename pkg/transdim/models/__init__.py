"""Built-in model families, toy targets and data simulators."""

from transdim.models.autoregressive import ARHyper, ARModel, ARState, ar_log_posterior, build_ar_space
from transdim.models.changepoint import (
    ChangePointHyper,
    ChangePointModel,
    ChangePointState,
    build_changepoint_space,
    changepoint_log_posterior,
)
from transdim.models.mixture import (
    MixtureHyper,
    MixtureModel,
    MixtureState,
    allocation_probabilities,
    build_mixture_space,
    mixture_gibbs_allocations,
    mixture_log_posterior,
)
from transdim.models.simulate import simulate_dataset

__all__ = [
    'ARHyper', 'ARModel', 'ARState', 'ar_log_posterior', 'build_ar_space',
    'ChangePointHyper', 'ChangePointModel', 'ChangePointState', 'build_changepoint_space',
    'changepoint_log_posterior',
    'MixtureHyper', 'MixtureModel', 'MixtureState', 'allocation_probabilities',
    'build_mixture_space', 'mixture_gibbs_allocations', 'mixture_log_posterior',
    'simulate_dataset',
]
