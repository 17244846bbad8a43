"""
Report generation for transdim runs.

Reports are plain dicts that serialise to JSON. They never carry timestamps,
so the same inputs always give byte-identical report files.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from transdim.core.diagnostics import (
    DiagnosticSeries,
    distance_psrf,
    mixture_events,
    model_indicator_chisq,
    model_indicator_ks,
    mpsrf,
)
from transdim.core.errors import ContractViolation
from transdim.core.estimation import (
    bayes_factor_table,
    effective_sample_size,
    posterior_model_probs,
)
from transdim.core.rng import replicate_seeds
from transdim.core.state import ModelSpace, Trace, nearest_neighbour_graph, uniform_prior

logger = logging.getLogger(__name__)

try:
    from transdim import __version__ as TRANSDIM_VERSION
except ImportError:
    TRANSDIM_VERSION = "0.1.0"

_MIXTURE_NAMES = {'w', 'mu', 'sigma2'}


def _float(value) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def _graph_to_json(graph: Mapping[int, Mapping[int, float]]) -> Dict[str, Dict[str, float]]:
    return {str(k): {str(j): float(q) for j, q in sorted(row.items())} for k, row in sorted(graph.items())}


def _graph_from_json(data: Mapping) -> Dict[int, Dict[int, float]]:
    return {int(k): {int(j): float(q) for j, q in row.items()} for k, row in data.items()}


def run_summary(config, space: ModelSpace, trace: Trace) -> Dict[str, Any]:
    """Summary written next to the replicate CSVs by ``transdim run``."""
    sampler = config.sampler
    return {
        'transdim_version': TRANSDIM_VERSION,
        'model_kind': config.model.kind,
        'moves': list(config.moves.selection),
        'seed': sampler.seed,
        'replicate_streams': replicate_seeds(sampler.seed, sampler.replicates),
        'iterations': sampler.iterations,
        'burn_in': sampler.burn_in,
        'thinning': sampler.thinning,
        'model_prior': {str(k): p for k, p in sorted(space.model_prior.items())},
        'jump_graph': _graph_to_json(space.jump_graph),
        'replicates': [
            {
                'replicate': rep.replicate,
                'recorded_states': len(rep),
                'final_model': int(rep.model_indices[-1]) if len(rep) else None,
                'move_counts': rep.move_counts(),
            }
            for rep in trace.replicates
        ],
        'warnings': [],
        'errors': [],
    }


def _panel(series: DiagnosticSeries) -> Dict[str, Any]:
    panel = series.to_dict()
    panel['final'] = {label: _float(v) for label, v in panel['final'].items()}
    if series.p_values is not None and len(series.checkpoints):
        panel['final_p_values'] = {
            label: _float(p) for label, p in zip(series.labels, series.p_values[-1])
        }
    if series.dof is not None and len(series.checkpoints):
        panel['final_dof'] = float(series.dof[-1])
    return panel


def _is_mixture(trace: Trace) -> bool:
    names = {name for rep in trace.replicates for labels in rep.labels.values() for name, _ in labels}
    return bool(names) and names <= _MIXTURE_NAMES


def _within_chain(trace: Trace, burn_in: int, batches: int) -> List[Dict[str, Any]]:
    rows = []
    for rep in trace.replicates:
        sequence = rep.model_sequence
        if len(sequence) <= burn_in:
            continue
        estimate = posterior_model_probs(sequence, burn_in=burn_in, batches=batches)
        kept = sequence[burn_in:]
        rows.append({
            'replicate': rep.replicate,
            'states': int(kept.shape[0]),
            'model_probabilities': estimate.to_dict(),
            'effective_sample_size': {
                str(k): effective_sample_size((kept == k).astype(float), batches)
                for k in sorted(estimate.probabilities)
            },
        })
    return rows


def diagnostic_report(trace: Trace, options: Mapping[str, Any],
                      rng: Optional[np.random.Generator] = None) -> Dict[str, Any]:
    """
    Run every applicable diagnostic panel on ``trace``.

    Args:
        trace: Sampler output (at least one replicate).
        options: ``lag``, ``checkpoints``, ``reference_points``, ``burn_in``
            and ``batches`` (see the ``[diagnostics]`` config section).
        rng: Generator for the distance-PSRF reference points.

    Returns:
        Report dict with ``panels``, ``within_chain``, ``warnings`` and
        ``errors``; ``series`` holds the DiagnosticSeries objects by panel
        name and is dropped before saving.
    """
    if not len(trace):
        raise ContractViolation("the trace has no replicates")
    lag, checkpoints = int(options['lag']), int(options['checkpoints'])
    report: Dict[str, Any] = {
        'transdim_version': TRANSDIM_VERSION,
        'replicates': len(trace),
        'states_per_replicate': [len(rep) for rep in trace.replicates],
        'options': dict(options),
        'panels': {},
        'within_chain': _within_chain(trace, int(options['burn_in']), int(options['batches'])),
        'warnings': [],
        'errors': [],
    }
    series: Dict[str, DiagnosticSeries] = {}
    if len(trace) < 2:
        report['warnings'].append(
            "a single replicate was supplied; between-chain panels were skipped"
        )
        logger.warning("single replicate: only within-chain outputs are produced")
        report['series'] = series
        return report

    sequences = trace.model_sequences()
    panels = {
        'ks': lambda: model_indicator_ks(sequences, lag=lag, checkpoints=checkpoints),
        'chisq': lambda: model_indicator_chisq(sequences, lag=lag, checkpoints=checkpoints),
        'mpsrf': lambda: mpsrf(sequences, [rep.deviance for rep in trace.replicates], checkpoints=checkpoints),
    }
    if _is_mixture(trace):
        panels['distance_psrf'] = lambda: distance_psrf(
            [[mixture_events(p) for p in rep.params] for rep in trace.replicates],
            reference_count=int(options['reference_points']),
            rng=rng if rng is not None else np.random.default_rng(0),
            checkpoints=checkpoints,
        )
    for name, compute in panels.items():
        try:
            series[name] = compute()
        except ContractViolation as exc:
            report['errors'].append(f"{name}: {exc}")
            continue
        report['panels'][name] = _panel(series[name])
        if series[name].skipped:
            report['warnings'].append(f"{name}: {len(series[name].skipped)} checkpoint(s) skipped")
        if series[name].excluded:
            report['warnings'].append(f"{name}: {series[name].excluded} value(s) excluded")
    report['series'] = series
    return report


def estimates_report(trace: Trace, model_prior: Optional[Mapping[int, float]] = None,
                     jump_graph: Optional[Mapping[int, Mapping[int, float]]] = None,
                     burn_in: int = 0, batches: int = 50) -> Dict[str, Any]:
    """
    Posterior model probabilities and the Bayes factor table.

    Without ``model_prior`` / ``jump_graph`` (no ``run_summary.json``) a
    uniform prior and the nearest-neighbour graph over the visited models are
    assumed and a warning is recorded.
    """
    warnings: List[str] = []
    sequences = trace.model_sequences()
    visited = sorted({int(k) for s in sequences for k in s})
    if model_prior is None or jump_graph is None:
        warnings.append("no run summary found; assuming a uniform model prior and "
                        "nearest-neighbour jumps over the visited models")
        model_prior = model_prior or uniform_prior(visited)
        jump_graph = jump_graph or nearest_neighbour_graph(visited)
    estimate = posterior_model_probs(sequences, burn_in=burn_in, batches=batches)
    table = bayes_factor_table(sequences, trace.records(), model_prior, jump_graph,
                               burn_in=burn_in, batches=batches)
    for row in table:
        if not row['available']:
            warnings.append(f"no Bayes factor estimate for {row['k_prime']} vs {row['k']}")
    return {
        'transdim_version': TRANSDIM_VERSION,
        'replicates': len(trace),
        'burn_in': burn_in,
        'batches': batches,
        'model_probabilities': estimate.to_dict(),
        'total_states': estimate.total,
        'bayes_factors': table,
        'warnings': warnings,
        'errors': [],
    }


def load_run_summary(directory: Union[str, Path]) -> Optional[Dict[str, Any]]:
    """``run_summary.json`` of a run directory with integer model keys, or None."""
    path = Path(directory) / 'run_summary.json'
    if not path.exists():
        return None
    summary = load_report(path)
    summary['model_prior'] = {int(k): float(p) for k, p in summary.get('model_prior', {}).items()}
    summary['jump_graph'] = _graph_from_json(summary.get('jump_graph', {}))
    return summary


def save_report(report: Dict, output_path: Union[str, Path]) -> None:
    """
    Save a report to a JSON file (keys sorted, ``\\n`` line endings).

    Entries that are not JSON data (the ``series`` of a diagnostic report)
    are left out.
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {k: v for k, v in report.items() if k != 'series'}
    with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')


def load_report(report_path: Union[str, Path]) -> Dict[str, Any]:
    """Load a report from a JSON file."""
    with open(report_path, 'r', encoding='utf-8') as f:
        return json.load(f)
