"""
Convergence diagnostics for multi-chain trans-dimensional output.

Model-indicator panels (Kolmogorov-Smirnov and chi-squared comparisons of
chains), the two-way (chain x model) variance decomposition of a scalar
functional such as the deviance, and a distance-based PSRF for point-set
states such as mixture components. Every panel is evaluated over a grid of
checkpoints so its trajectory can be inspected.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from transdim.core.errors import ContractViolation
from transdim.core.moves import mixture_components, pack_mixture

logger = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = 20
MIN_EXPECTED_COUNT = 5.0


@dataclass
class DiagnosticSeries:
    """One diagnostic evaluated at a grid of checkpoints (rows) for one or more curves (columns)."""
    kind: str
    checkpoints: np.ndarray
    values: np.ndarray
    labels: List[str]
    p_values: Optional[np.ndarray] = None
    dof: Optional[np.ndarray] = None
    skipped: List[int] = field(default_factory=list)
    excluded: int = 0

    def final(self) -> Dict[str, float]:
        """Values at the last checkpoint, by curve label."""
        if not len(self.checkpoints):
            return {}
        return {label: float(v) for label, v in zip(self.labels, self.values[-1])}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for i, checkpoint in enumerate(self.checkpoints):
            for j, label in enumerate(self.labels):
                rows.append({
                    'checkpoint': int(checkpoint),
                    'curve': label,
                    'value': float(self.values[i, j]),
                    'p_value': float(self.p_values[i, j]) if self.p_values is not None else math.nan,
                    'dof': float(self.dof[i]) if self.dof is not None else math.nan,
                    'skipped': int(checkpoint in self.skipped),
                })
        return pd.DataFrame(rows, columns=['checkpoint', 'curve', 'value', 'p_value', 'dof', 'skipped'])

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'checkpoints': [int(c) for c in self.checkpoints],
            'labels': list(self.labels),
            'final': self.final(),
            'skipped': [int(c) for c in self.skipped],
            'excluded': int(self.excluded),
        }


@dataclass(frozen=True)
class ReferencePoint:
    coords: np.ndarray
    scales: np.ndarray


def checkpoint_grid(length: int, count: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """Up to ``count`` strictly increasing checkpoints ending at ``length``."""
    if length < 1:
        raise ContractViolation("sequences are empty")
    if count < 1:
        raise ContractViolation("need at least one checkpoint")
    grid = np.unique(np.ceil(np.linspace(length / count, length, count)).astype(int))
    return grid[grid >= 1]


def _as_chains(sequences) -> List[np.ndarray]:
    chains = [np.asarray(s) for s in sequences]
    if len(chains) < 2:
        raise ContractViolation("between-chain diagnostics need at least two chains")
    return chains


def _check_lag(lag: int) -> None:
    if lag < 1:
        raise ContractViolation(f"lag must be >= 1, got {lag}")


def model_indicator_ks(sequences: Sequence[Sequence[int]], lag: int = 1,
                       checkpoints: int = DEFAULT_CHECKPOINTS) -> DiagnosticSeries:
    """
    Two-sample KS statistic of the model indicator for every chain pair.

    At each checkpoint c each chain contributes its first c values, thinned
    by ``lag``. Checkpoints where a thinned sample has fewer than two values
    are skipped (NaN) and listed in ``skipped``.
    """
    chains = _as_chains(sequences)
    _check_lag(lag)
    grid = checkpoint_grid(min(len(c) for c in chains), checkpoints)
    pairs = list(combinations(range(len(chains)), 2))
    values = np.full((len(grid), len(pairs)), math.nan)
    p_values = np.full_like(values, math.nan)
    skipped = []
    for i, c in enumerate(grid):
        thinned = [chain[:c][::lag] for chain in chains]
        if min(len(t) for t in thinned) < 2:
            skipped.append(int(c))
            continue
        for j, (a, b) in enumerate(pairs):
            result = stats.ks_2samp(thinned[a], thinned[b], method='asymp')
            values[i, j], p_values[i, j] = result.statistic, result.pvalue
    if skipped:
        logger.info("KS: %d checkpoints skipped (fewer than two thinned samples)", len(skipped))
    labels = [f"r{a}-r{b}" for a, b in pairs]
    return DiagnosticSeries('ks', grid, values, labels, p_values=p_values, skipped=skipped)


def pooled_contingency(table: np.ndarray) -> np.ndarray:
    """
    Merge model columns until every expected count is at least 5 (or one
    column is left). The smallest column is merged into the next smallest.
    """
    table = np.asarray(table, dtype=float)
    table = table[:, table.sum(axis=0) > 0]
    while table.shape[1] > 1:
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        if expected.min() >= MIN_EXPECTED_COUNT:
            break
        order = np.argsort(table.sum(axis=0), kind='stable')
        merged = table[:, order[0]] + table[:, order[1]]
        table = np.column_stack([merged, table[:, order[2:]]])
    return table


def model_indicator_chisq(sequences: Sequence[Sequence[int]], lag: int = 1,
                          checkpoints: int = DEFAULT_CHECKPOINTS) -> DiagnosticSeries:
    """Chi-squared test of homogeneity of model visits across chains at each checkpoint."""
    chains = _as_chains(sequences)
    _check_lag(lag)
    grid = checkpoint_grid(min(len(c) for c in chains), checkpoints)
    values = np.zeros((len(grid), 1))
    p_values = np.ones((len(grid), 1))
    dof = np.zeros(len(grid))
    for i, c in enumerate(grid):
        thinned = [chain[:c][::lag] for chain in chains]
        models = np.unique(np.concatenate(thinned))
        table = np.array([[np.count_nonzero(t == m) for m in models] for t in thinned])
        table = pooled_contingency(table)
        if table.shape[1] < 2:
            continue
        statistic, p_value, df, _ = stats.chi2_contingency(table, correction=False)
        values[i, 0], p_values[i, 0], dof[i] = statistic, p_value, df
    return DiagnosticSeries('chisq', grid, values, ['chisq'], p_values=p_values, dof=dof)


def _ss_around_group_means(values: np.ndarray, groups: np.ndarray) -> float:
    total = 0.0
    for g in np.unique(groups):
        part = values[groups == g]
        total += float(np.sum((part - part.mean()) ** 2))
    return total


def _ratio(numerator: float, denominator: float) -> float:
    if denominator > 0:
        return numerator / denominator
    return 1.0 if numerator <= 0 else math.inf


def mpsrf(model_sequences: Sequence[Sequence[int]], functionals: Sequence[Sequence[float]],
          checkpoints: int = DEFAULT_CHECKPOINTS) -> DiagnosticSeries:
    """
    Two-way (chain x model) variance decomposition of a scalar functional.

    Curves at each checkpoint (first c draws of each chain):
      * ``V/Wc``: total sum of squares over the within-chain sum of squares;
      * ``Wm/WmWc``: within-model over within-(chain, model) sum of squares.
    Cells are weighted by how often they are visited. Both curves equal 1
    when every chain is identical. Non-finite functional values are dropped
    and counted in ``excluded``.
    """
    models = _as_chains(model_sequences)
    values = [np.asarray(v, dtype=float) for v in functionals]
    if len(values) != len(models) or any(len(v) != len(m) for v, m in zip(values, models)):
        raise ContractViolation("model sequences and functionals must have matching shapes")
    grid = checkpoint_grid(min(len(m) for m in models), checkpoints)
    out = np.full((len(grid), 2), math.nan)
    excluded = 0
    for i, c in enumerate(grid):
        theta = np.concatenate([v[:c] for v in values])
        model = np.concatenate([m[:c] for m in models])
        chain = np.concatenate([np.full(c, r) for r in range(len(models))])
        keep = np.isfinite(theta)
        excluded = int(np.count_nonzero(~keep))
        theta, model, chain = theta[keep], model[keep], chain[keep]
        if theta.size == 0:
            continue
        total = float(np.sum((theta - theta.mean()) ** 2))
        within_chain = _ss_around_group_means(theta, chain)
        within_model = _ss_around_group_means(theta, model)
        cell = chain * (int(model.max()) - int(model.min()) + 1) + (model - model.min())
        within_cell = _ss_around_group_means(theta, cell)
        out[i] = _ratio(total, within_chain), _ratio(within_model, within_cell)
    if excluded:
        logger.warning("mPSRF: %d non-finite functional values excluded", excluded)
    return DiagnosticSeries('mpsrf', grid, out, ['V/Wc', 'Wm/WmWc'], excluded=excluded)


def psrf(chains) -> float:
    """
    Potential scale reduction factor sqrt((W + B/n) / W) of equal-length chains.

    Constant sequences (W = B = 0) give 1; W = 0 with B > 0 gives inf.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2 or chains.shape[1] < 2:
        raise ContractViolation("psrf needs at least two chains of length >= 2")
    n = chains.shape[1]
    within = float(np.mean(np.var(chains, axis=1, ddof=1)))
    between_over_n = float(np.var(chains.mean(axis=1), ddof=1))
    if within <= 0:
        return 1.0 if between_over_n <= 0 else math.inf
    return math.sqrt((within + between_over_n) / within)


def mixture_events(params: np.ndarray) -> np.ndarray:
    """Components of a mixture vector as rows (w, mu, var)."""
    w, mu, var = mixture_components(params)
    return np.column_stack([w, mu, var])


def reference_points(event_chains: Sequence[Sequence[np.ndarray]], count: int,
                     rng: np.random.Generator) -> List[ReferencePoint]:
    """Points drawn uniformly in the bounding box of all events, with pooled standard deviations as scales."""
    pooled = np.vstack([e for chain in event_chains for e in chain if len(e)])
    lo, hi = pooled.min(axis=0), pooled.max(axis=0)
    scales = pooled.std(axis=0)
    scales[scales <= 0] = 1.0
    return [ReferencePoint(rng.uniform(lo, hi), scales) for _ in range(count)]


def nearest_event_distance(events: np.ndarray, point: ReferencePoint) -> float:
    """Standardised Euclidean distance from ``point`` to the closest event; inf without events."""
    if len(events) == 0:
        return math.inf
    return float(np.min(np.sqrt(np.sum(((events - point.coords) / point.scales) ** 2, axis=1))))


def distance_psrf(event_chains: Sequence[Sequence[np.ndarray]], reference_count: int = 100,
                  rng: Optional[np.random.Generator] = None,
                  checkpoints: int = DEFAULT_CHECKPOINTS,
                  points: Optional[List[ReferencePoint]] = None) -> DiagnosticSeries:
    """
    PSRF of the nearest-event distance, one curve per reference point.

    ``event_chains[r][t]`` is the (n_events x d) array of events of state t
    in chain r. States without events have infinite distance; they are
    excluded and counted. At each checkpoint chains are cut to a common
    length of finite distances.
    """
    if len(event_chains) < 2:
        raise ContractViolation("distance PSRF needs at least two chains")
    if points is None:
        points = reference_points(event_chains, reference_count, rng or np.random.default_rng(0))
    distances = [
        np.array([[nearest_event_distance(e, p) for p in points] for e in chain]).reshape(len(chain), len(points))
        for chain in event_chains
    ]
    excluded = sum(int(np.count_nonzero(~np.isfinite(d[:, 0]))) for d in distances) if points else 0
    if excluded:
        logger.warning("distance PSRF: %d states without events excluded", excluded)
    grid = checkpoint_grid(min(len(c) for c in event_chains), checkpoints)
    values = np.full((len(grid), len(points)), math.nan)
    skipped = []
    for i, c in enumerate(grid):
        finite = [d[:c][np.isfinite(d[:c, 0])] for d in distances]
        n = min(len(f) for f in finite)
        if n < 2:
            skipped.append(int(c))
            continue
        stacked = np.stack([f[:n] for f in finite])
        for j in range(len(points)):
            values[i, j] = psrf(stacked[:, :, j])
    labels = [f"v{j}" for j in range(len(points))]
    return DiagnosticSeries('distance-psrf', grid, values, labels, skipped=skipped, excluded=excluded)


def relabel_by_constraint(params: np.ndarray, key: str = 'mu', allocations=None):
    """
    Order mixture components by ``key`` (``mu``, ``w`` or ``sigma2``), ties
    broken by the remaining two in the order w, mu, sigma2. Returns the
    reordered vector, plus relabelled allocations when given.
    """
    w, mu, var = mixture_components(params)
    columns = {'w': w, 'mu': mu, 'sigma2': var}
    if key not in columns:
        raise ContractViolation(f"key must be one of {sorted(columns)}, got {key!r}")
    secondary = [name for name in ('w', 'mu', 'sigma2') if name != key]
    # np.lexsort sorts by the last key first
    order = np.lexsort((columns[secondary[1]], columns[secondary[0]], columns[key]))
    relabelled = pack_mixture(w[order], mu[order], var[order])
    if allocations is None:
        return relabelled
    mapping = np.empty_like(order)
    mapping[order] = np.arange(order.shape[0])
    return relabelled, mapping[np.asarray(allocations, dtype=int)]


def deviance(state, data, model) -> float:
    """-2 log L at ``state`` (without saturated-model constants)."""
    return float(model.deviance(state, data))
