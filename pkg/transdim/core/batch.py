"""
Batch runs: turn a :class:`~transdim.core.config.RunConfig` into a model
space, a set of between-model kernels and data, run every replicate and write
the outputs.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from transdim.core.config import RunConfig, write_resolved_config
from transdim.core.errors import ConfigError, ContractViolation
from transdim.core.io import load_dataset, write_trace
from transdim.core.moves import AnnealedMove, AutoRJMove, DelayedRejectionMove, estimate_moments
from transdim.core.report import run_summary, save_report
from transdim.core.sampler import BetweenModelKernel, JumpMove, run_replicate, run_sampler
from transdim.core.state import ModelSpace, SamplerConfig, Trace
from transdim.models.autoregressive import ARHyper, build_ar_space
from transdim.models.changepoint import ChangePointHyper, build_changepoint_space
from transdim.models.mixture import MixtureHyper, MixtureSplitMerge, build_mixture_space
from transdim.models.simulate import simulate_dataset
from transdim.models.toy import (
    GaussianTarget,
    default_gaussian_toy,
    discrete_toy,
    gaussian_mean_problem,
    plus_minus_move,
    swap_stage,
    two_model_toy,
)

logger = logging.getLogger(__name__)

_SIMULATION_KINDS = {'mixture': 'mixture', 'ar': 'ar', 'changepoint': 'changepoint',
                     'gaussian-mean': 'gaussian_mean'}


@dataclass
class Problem:
    """Everything a run needs besides the sampler settings."""
    kind: str
    space: ModelSpace
    basic_moves: List[JumpMove]
    data: Any = None
    metadata: Dict[str, float] = field(default_factory=dict)
    kernels: List[BetweenModelKernel] = field(default_factory=list)
    stage_two: Any = None


def load_problem_data(config: RunConfig) -> Tuple[Optional[np.ndarray], Dict[str, float]]:
    """Read the configured dataset, or simulate one from ``[model.simulate]``."""
    section = config.model
    if section.dataset is not None:
        return load_dataset(section.dataset)
    if section.simulate is not None:
        params = section.simulate['params']
        rng = np.random.default_rng(section.simulate['seed'])
        data = simulate_dataset(_SIMULATION_KINDS[section.kind], params, section.simulate['size'], rng)
        metadata = {'horizon': float(params['horizon'])} if 'horizon' in params else {}
        logger.info("simulated %d observations for model kind %s", len(data), section.kind)
        return data, metadata
    return None, {}


def _horizon(config: RunConfig, metadata: Dict[str, float]) -> float:
    hyper = config.model.hyperparameters
    if 'horizon' in hyper:
        return float(hyper['horizon'])
    if 'horizon' in metadata:
        return float(metadata['horizon'])
    raise ConfigError("change-point data needs a horizon (a '# horizon: T' dataset header "
                      "or model.hyperparameters.horizon)", field='model.hyperparameters.horizon')


def build_problem(config: RunConfig) -> Problem:
    """
    Build the model space and the family's basic between-model moves.

    Raises:
        ConfigError: If the configuration cannot describe a runnable problem.
    """
    section = config.model
    hyper = dict(section.hyperparameters)
    data, metadata = load_problem_data(config)
    stage_two = None

    if section.kind == 'mixture':
        data = np.zeros(0) if section.prior_only or data is None else np.asarray(data, dtype=float)
        mixture_hyper = MixtureHyper.from_data(data, **hyper)
        wanted = [m for m in config.moves.selection if m in ('split-merge', 'birth-death')]
        if 'delayed-rejection' in config.moves.selection and 'split-merge' not in wanted:
            wanted.append('split-merge')
        space, moves = build_mixture_space(
            data, mixture_hyper, moves=wanted,
            centred_weight=bool(config.moves.option('split-merge', 'centred_weight')),
        )
        return Problem('mixture', space, moves, data, metadata)

    if section.kind == 'ar':
        series = np.asarray(data, dtype=float)
        space, moves = build_ar_space(series, ARHyper.from_series(series, **hyper),
                                      birth_scale=config.moves.option('birth-death', 'scale'))
        data = series
    elif section.kind == 'changepoint':
        events = np.asarray(data, dtype=float)
        horizon = _horizon(config, metadata)
        hyper.pop('horizon', None)
        space, moves = build_changepoint_space(events, ChangePointHyper.from_events(events, horizon, **hyper))
        data = events
        metadata = {**metadata, 'horizon': horizon}
    elif section.kind == 'gaussian-mean':
        data = np.asarray(data, dtype=float)
        space, moves = gaussian_mean_problem(data, tau=hyper.get('tau', 1.0),
                                             inflation=hyper.get('inflation', 1.5))
    elif section.variant == 'discrete':
        toy = discrete_toy()
        space, moves, stage_two = toy.space, list(toy.moves), swap_stage
    elif section.variant == 'gaussian':
        space, moves = default_gaussian_toy(), [plus_minus_move()]
    else:
        space, moves = two_model_toy()

    if section.prior_only:
        space = space.prior_only()
    return Problem(section.kind, space, list(moves), data, metadata, stage_two=stage_two)


def _exact_moments(space: ModelSpace) -> Optional[Dict[int, Tuple[np.ndarray, np.ndarray]]]:
    models = [getattr(m, 'inner', m) for m in space.models.values()]
    if not all(isinstance(m, GaussianTarget) for m in models):
        return None
    return {m.index: (m.mean, np.linalg.cholesky(m.cov)) for m in models}


def pilot_moments(problem: Problem, sampler: SamplerConfig,
                  iterations: int) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    """
    Per-model mean and Cholesky factor for auto-RJ moves.

    Exactly Gaussian targets use their own moments; otherwise each model is
    run on its own (no between-model moves) for ``iterations`` sweeps and the
    second half of the draws is summarised. Pilot chains use random streams
    past the last replicate, so they never share a stream with a replicate.
    """
    exact = _exact_moments(problem.space)
    if exact is not None:
        return exact
    moments = {}
    for offset, k in enumerate(problem.space.indices):
        model = problem.space.model(k)
        if model.dimension == 0:
            moments[k] = (np.zeros(0), np.zeros((0, 0)))
            continue
        pilot = SamplerConfig(
            iterations=iterations, burn_in=iterations // 2, seed=sampler.seed,
            within_move_scales=sampler.within_move_scales, default_scale=sampler.default_scale,
            between_move_probability=0.0, start_model=k,
        )
        trace = run_replicate(pilot, problem.space, [], problem.data, sampler.replicates + offset)
        moments[k] = estimate_moments(np.vstack(trace.params))
        logger.info("auto-RJ pilot for model %d: %d draws", k, len(trace))
    return moments


def build_kernels(config: RunConfig, problem: Problem) -> List[BetweenModelKernel]:
    """Between-model kernels for the configured move selection."""
    moves = config.moves
    if problem.kind == 'mixture':
        splits = [m for m in problem.basic_moves if isinstance(m, MixtureSplitMerge)]
        kernels = [m for m in problem.basic_moves
                   if 'split-merge' in moves.selection or not isinstance(m, MixtureSplitMerge)]
        if 'delayed-rejection' in moves.selection:
            kernels.extend(DelayedRejectionMove(m, m) for m in splits)
        return kernels
    kernels: List[BetweenModelKernel] = []
    if 'birth-death' in moves.selection:
        kernels.extend(problem.basic_moves)
    if 'delayed-rejection' in moves.selection:
        kernels.extend(
            DelayedRejectionMove(m, problem.stage_two if problem.stage_two is not None else m)
            for m in problem.basic_moves
        )
    if 'annealed' in moves.selection:
        kernels.extend(
            AnnealedMove(m, gamma=moves.option('annealed', 'gamma'), kappa=moves.option('annealed', 'kappa'),
                         scale=moves.option('annealed', 'scale'))
            for m in problem.basic_moves
        )
    if 'auto-rj' in moves.selection:
        moments = pilot_moments(problem, config.sampler, moves.option('auto-rj', 'pilot_iterations'))
        graph = problem.space.jump_graph
        kernels.extend(
            AutoRJMove(k, k_new, moments)
            for k in problem.space.indices for k_new in sorted(graph[k])
            if k < k_new and graph[k][k_new] > 0
        )
    if not kernels:
        raise ContractViolation("the move selection produced no between-model kernels")
    return kernels


class BatchRunner:
    """
    Runs a configured problem and writes its outputs.

    Typical use: ``BatchRunner(config).run()`` followed by ``write(directory)``.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.problem: Optional[Problem] = None
        self.trace: Optional[Trace] = None

    def prepare(self) -> Problem:
        if self.problem is None:
            problem = build_problem(self.config)
            problem.kernels = build_kernels(self.config, problem)
            self.problem = problem
            logger.info("model kind %s: %d models, %d kernels", problem.kind,
                        len(problem.space.models), len(problem.kernels))
        return self.problem

    def run(self) -> Trace:
        problem = self.prepare()
        self.trace = run_sampler(self.config.sampler, problem.space, problem.kernels, problem.data,
                                 workers=self.config.worker_count())
        return self.trace

    def write(self, directory: Optional[Path] = None) -> List[Path]:
        """Write replicate CSVs, ``resolved_config.json`` and ``run_summary.json``."""
        if self.trace is None:
            raise ContractViolation("run() must be called before write()")
        directory = Path(directory) if directory is not None else self.config.output_dir()
        directory.mkdir(parents=True, exist_ok=True)
        written = write_trace(self.trace, directory)
        written.append(write_resolved_config(self.config, directory))
        summary_path = directory / 'run_summary.json'
        save_report(run_summary(self.config, self.problem.space, self.trace), summary_path)
        written.append(summary_path)
        return written
