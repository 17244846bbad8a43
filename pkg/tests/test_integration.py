"""
Integration tests for transdim end-to-end workflows: configure, run, write,
read back and estimate, checked against targets with known answers.
"""

import numpy as np
import pytest

from transdim.core.batch import BatchRunner
from transdim.core.config import DIAGNOSTIC_DEFAULTS, build_config
from transdim.core.io import read_trace
from transdim.core.report import diagnostic_report, estimates_report, load_run_summary
from transdim.models.toy import discrete_toy, gaussian_mean_bayes_factor

pytestmark = pytest.mark.slow


def _runner(model, moves, iterations=8000, replicates=2, seed=17, **sampler):
    return BatchRunner(build_config({
        'model': model,
        'sampler': {'iterations': iterations, 'burn_in': 500, 'replicates': replicates,
                    'seed': seed, 'workers': 1, **sampler},
        'moves': {'selection': list(moves)},
    }))


def _probability(report, k):
    return report['model_probabilities'][str(k)]['probability']


class TestGaussianMeanWorkflow:
    """Point-null test for a normal mean, where the Bayes factor is exact."""

    def test_run_write_estimate(self, tmp_path):
        runner = _runner({
            'kind': 'gaussian-mean',
            'simulate': {'size': 30, 'seed': 4, 'params': {'mean': 0.4}},
        }, ['birth-death'])
        runner.run()
        runner.write(tmp_path)

        exact = gaussian_mean_bayes_factor(runner.problem.data)
        trace = read_trace([tmp_path])
        summary = load_run_summary(tmp_path)
        report = estimates_report(trace, summary['model_prior'], summary['jump_graph'])

        assert report['warnings'] == []
        assert _probability(report, 2) == pytest.approx(exact / (1.0 + exact), abs=0.04)
        (row,) = report['bayes_factors']
        assert (row['k'], row['k_prime']) == (1, 2)
        assert row['bridge'] == pytest.approx(exact, rel=0.25)
        assert row['visits'] == pytest.approx(exact, rel=0.35)

    def test_diagnostics_on_the_written_run(self, tmp_path):
        runner = _runner({
            'kind': 'gaussian-mean',
            'simulate': {'size': 30, 'seed': 4, 'params': {'mean': 0.4}},
        }, ['birth-death'], iterations=4000, replicates=3)
        runner.run()
        runner.write(tmp_path)
        options = {**DIAGNOSTIC_DEFAULTS, 'checkpoints': 10, 'reference_points': 20}
        report = diagnostic_report(read_trace([tmp_path]), options, rng=np.random.default_rng(0))
        assert report['errors'] == []
        assert report['panels']['mpsrf']['final']['V/Wc'] == pytest.approx(1.0, abs=0.1)


class TestToyWorkflows:
    """Wrapped moves on targets whose model probabilities are known."""

    def test_discrete_toy_with_delayed_rejection(self):
        runner = _runner({'kind': 'toy', 'variant': 'discrete'}, ['delayed-rejection'],
                         iterations=20000, replicates=1)
        trace = runner.run()
        expected = discrete_toy().exact_model_probabilities()
        report = estimates_report(trace, runner.problem.space.model_prior,
                                  runner.problem.space.jump_graph, burn_in=500)
        assert _probability(report, 1) == pytest.approx(expected[1], abs=0.03)

    def test_gaussian_toy_with_automatic_proposals(self):
        runner = _runner({'kind': 'toy', 'variant': 'gaussian'}, ['auto-rj'], iterations=20000,
                         replicates=1, default_scale=1.0)
        trace = runner.run()
        report = estimates_report(trace, runner.problem.space.model_prior,
                                  runner.problem.space.jump_graph, burn_in=500)
        assert _probability(report, 2) == pytest.approx(0.7, abs=0.03)

    def test_two_model_toy_with_annealed_jumps(self):
        runner = _runner({'kind': 'toy', 'variant': 'two-model'}, ['annealed'], iterations=20000,
                         replicates=1, default_scale=1.0)
        trace = runner.run()
        report = estimates_report(trace, runner.problem.space.model_prior,
                                  runner.problem.space.jump_graph, burn_in=500)
        assert _probability(report, 1) == pytest.approx(0.5, abs=0.04)
