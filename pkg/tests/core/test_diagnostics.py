"""
Tests for transdim.core.diagnostics.
"""

import math

import numpy as np
import pytest

from transdim.core.diagnostics import (
    ReferencePoint,
    checkpoint_grid,
    distance_psrf,
    mixture_events,
    model_indicator_chisq,
    model_indicator_ks,
    mpsrf,
    nearest_event_distance,
    pooled_contingency,
    psrf,
    reference_points,
    relabel_by_constraint,
)
from transdim.core.errors import ContractViolation


class TestCheckpointGrid:

    def test_even_grid(self):
        assert checkpoint_grid(100, 5).tolist() == [20, 40, 60, 80, 100]

    def test_short_sequence_collapses_duplicates(self):
        assert checkpoint_grid(3, 20).tolist() == [1, 2, 3]

    @pytest.mark.parametrize('length,count', [(0, 5), (10, 0)])
    def test_invalid(self, length, count):
        with pytest.raises(ContractViolation):
            checkpoint_grid(length, count)


class TestModelIndicatorKS:
    """Pairwise KS statistics of model indicators."""

    def test_identical_chains(self):
        chain = [1, 2, 2, 3, 1] * 10
        series = model_indicator_ks([chain, chain], checkpoints=5)
        assert np.all(series.values == 0.0)
        assert np.allclose(series.p_values, 1.0)

    def test_disjoint_chains(self):
        series = model_indicator_ks([[1] * 50, [2] * 50], checkpoints=5)
        assert series.final() == {'r0-r1': 1.0}

    def test_pair_labels(self):
        series = model_indicator_ks([[1, 2] * 5] * 3, checkpoints=2)
        assert series.labels == ['r0-r1', 'r0-r2', 'r1-r2']

    def test_thin_checkpoints_are_skipped(self):
        chain = [1, 2] * 25
        series = model_indicator_ks([chain, chain], lag=10, checkpoints=10)
        assert series.skipped == [5, 10]
        assert np.all(np.isnan(series.values[:2]))
        assert not np.any(np.isnan(series.values[2:]))

    def test_needs_two_chains(self):
        with pytest.raises(ContractViolation):
            model_indicator_ks([[1, 2, 1]])

    def test_lag_must_be_positive(self):
        with pytest.raises(ContractViolation):
            model_indicator_ks([[1, 2], [1, 2]], lag=0)


class TestModelIndicatorChiSquared:
    """Homogeneity of model visits across chains."""

    def test_pooling_merges_the_sparsest_column(self):
        pooled = pooled_contingency(np.array([[10, 1, 30], [12, 2, 28]]))
        assert pooled.tolist() == [[11.0, 30.0], [14.0, 28.0]]

    def test_pooling_drops_empty_columns(self):
        pooled = pooled_contingency(np.array([[20, 0, 20], [20, 0, 20]]))
        assert pooled.shape == (2, 2)

    def test_identical_chains(self):
        chain = [1, 2] * 20
        series = model_indicator_chisq([chain, chain], checkpoints=4)
        assert np.allclose(series.values, 0.0)
        assert np.allclose(series.p_values, 1.0)

    def test_disjoint_chains(self):
        series = model_indicator_chisq([[1] * 100, [2] * 100], checkpoints=4)
        assert series.final()['chisq'] == pytest.approx(200.0)
        assert series.dof[-1] == 1
        assert series.p_values[-1, 0] < 1e-10


class TestMPSRF:
    """Chain x model variance decomposition."""

    def test_identical_chains_give_one(self, rng):
        models = rng.integers(1, 4, size=200)
        deviance = rng.normal(size=200) + models
        series = mpsrf([models, models], [deviance, deviance], checkpoints=4)
        assert series.labels == ['V/Wc', 'Wm/WmWc']
        assert np.allclose(series.values, 1.0)

    def test_separated_chains_exceed_one(self, rng):
        models = np.ones(200, dtype=int)
        series = mpsrf([models, models], [rng.normal(size=200), rng.normal(5.0, 1.0, size=200)],
                       checkpoints=4)
        assert series.final()['V/Wc'] > 2.0

    def test_shapes_must_match(self):
        with pytest.raises(ContractViolation):
            mpsrf([[1, 2], [1, 2]], [[0.0, 1.0]])

    def test_non_finite_values_are_excluded(self, rng):
        models = np.ones(50, dtype=int)
        values = rng.normal(size=50)
        values[-1] = math.nan
        series = mpsrf([models, models], [values, rng.normal(size=50)], checkpoints=2)
        assert series.excluded == 1
        assert np.all(np.isfinite(series.values))


class TestPSRF:

    def test_known_value(self):
        assert psrf([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]) == pytest.approx(math.sqrt(5.5))

    def test_constant_chains(self):
        assert psrf([[2.0, 2.0], [2.0, 2.0]]) == 1.0

    def test_constant_but_different_chains(self):
        assert psrf([[0.0, 0.0], [1.0, 1.0]]) == math.inf

    def test_needs_two_chains(self):
        with pytest.raises(ContractViolation):
            psrf([[1.0, 2.0, 3.0]])


class TestDistancePSRF:
    """Nearest-event distances for point-set states."""

    def test_nearest_event_distance(self):
        point = ReferencePoint(np.array([3.0, 0.0]), np.array([1.0, 1.0]))
        events = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert nearest_event_distance(events, point) == pytest.approx(3.0)
        assert nearest_event_distance(np.zeros((0, 2)), point) == math.inf

    def test_reference_points_lie_in_the_bounding_box(self, rng):
        chains = [[np.array([[0.0, 1.0]]), np.array([[2.0, 3.0]])], [np.array([[1.0, 2.0]])]]
        points = reference_points(chains, 25, rng)
        assert len(points) == 25
        for p in points:
            assert np.all(p.coords >= [0.0, 1.0]) and np.all(p.coords <= [2.0, 3.0])

    def test_identical_chains(self, rng):
        chain = [mixture_events(np.array([0.5, 0.5, rng.normal(), rng.normal() + 3, 1.0, 1.0]))
                 for _ in range(40)]
        chain[10] = np.zeros((0, 3))
        series = distance_psrf([chain, chain], reference_count=6, rng=rng, checkpoints=4)
        assert series.labels == [f'v{j}' for j in range(6)]
        assert series.excluded == 2
        assert np.allclose(series.values, 1.0)

    def test_needs_two_chains(self):
        with pytest.raises(ContractViolation):
            distance_psrf([[np.zeros((1, 3))]])


class TestRelabel:
    """Identifiability constraints on mixture labels."""

    PARAMS = np.array([0.3, 0.7, 2.0, -1.0, 1.0, 0.5])

    def test_orders_by_mean(self):
        relabelled, z = relabel_by_constraint(self.PARAMS, 'mu', allocations=[0, 1, 1])
        assert relabelled.tolist() == [0.7, 0.3, -1.0, 2.0, 0.5, 1.0]
        assert z.tolist() == [1, 0, 0]

    def test_idempotent(self):
        once = relabel_by_constraint(self.PARAMS, 'sigma2')
        assert np.array_equal(relabel_by_constraint(once, 'sigma2'), once)

    def test_orders_by_weight(self):
        relabelled = relabel_by_constraint(self.PARAMS, 'w')
        assert relabelled[:2].tolist() == [0.3, 0.7]

    def test_unknown_key(self):
        with pytest.raises(ContractViolation):
            relabel_by_constraint(self.PARAMS, 'sd')


class TestDiagnosticSeries:

    def test_frame_has_one_row_per_checkpoint_and_curve(self):
        series = model_indicator_ks([[1, 2] * 10] * 3, checkpoints=4)
        frame = series.to_frame()
        assert len(frame) == 4 * 3
        assert list(frame.columns) == ['checkpoint', 'curve', 'value', 'p_value', 'dof', 'skipped']

    def test_dict_summary(self):
        series = model_indicator_ks([[1, 2] * 10] * 2, checkpoints=4)
        summary = series.to_dict()
        assert summary['kind'] == 'ks'
        assert summary['checkpoints'] == [5, 10, 15, 20]
        assert summary['final'] == {'r0-r1': 0.0}


@pytest.mark.slow
class TestFalseRejection:
    """Indicator tests on chains drawn from one distribution reject at about their level."""

    REPETITIONS = 200

    def _rejection_rate(self, test, draw):
        rng = np.random.default_rng(2024)
        rejected = 0
        for _ in range(self.REPETITIONS):
            chains = [draw(rng), draw(rng)]
            rejected += test(chains, checkpoints=1).p_values[-1, 0] < 0.05
        return rejected / self.REPETITIONS

    def test_ks(self):
        rate = self._rejection_rate(model_indicator_ks, lambda rng: rng.integers(1, 5001, size=400))
        assert 0.02 <= rate <= 0.08

    def test_chisq(self):
        probs = [0.1, 0.2, 0.4, 0.2, 0.1]
        rate = self._rejection_rate(model_indicator_chisq,
                                    lambda rng: rng.choice(np.arange(1, 6), size=400, p=probs))
        assert 0.02 <= rate <= 0.08
