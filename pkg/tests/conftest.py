"""
Pytest configuration and fixtures for transdim tests.
"""

import textwrap

import numpy as np
import pytest

from transdim.core.state import AcceptanceRecord, ReplicateTrace, Trace
from transdim.models.simulate import simulate_dataset


@pytest.fixture
def rng():
    """A seeded generator; every test that draws gets the same stream."""
    return np.random.default_rng(12345)


@pytest.fixture
def mixture_data():
    """120 draws from a well-separated two-component mixture."""
    params = {'weights': [0.4, 0.6], 'means': [-2.0, 3.0], 'variances': [0.5, 1.0]}
    return simulate_dataset('mixture', params, 120, np.random.default_rng(7))


@pytest.fixture
def ar_series():
    """An AR(2) series of length 300."""
    params = {'coefficients': [0.6, -0.3], 'noise_variance': 1.0}
    return simulate_dataset('ar', params, 300, np.random.default_rng(11))


@pytest.fixture
def changepoint_events():
    """Event times on (0, 100) with a rate change at t = 40."""
    params = {'horizon': 100.0, 'positions': [40.0], 'heights': [0.5, 2.0]}
    return simulate_dataset('changepoint', params, None, np.random.default_rng(3))


def _replicate(replicate, models, deviance=None, records=()):
    rep = ReplicateTrace(replicate=replicate)
    for i, k in enumerate(models):
        rep.iterations.append(i + 1)
        rep.model_indices.append(int(k))
        rep.params.append(np.zeros(0))
        rep.latent.append(None)
        rep.log_likelihood.append(0.0)
        rep.log_prior.append(0.0)
        rep.deviance.append(float(deviance[i]) if deviance is not None else float(k))
        rep.labels.setdefault(int(k), [])
    rep.records = list(records)
    return rep


@pytest.fixture
def make_trace():
    """Build a Trace from plain model-index sequences (no parameters)."""
    def build(*sequences, deviances=None, records=None):
        reps = []
        for r, models in enumerate(sequences):
            reps.append(_replicate(
                r, models,
                deviance=None if deviances is None else deviances[r],
                records=() if records is None else records[r],
            ))
        return Trace(replicates=reps)
    return build


@pytest.fixture
def alternating_records():
    """Symmetric 1 <-> 2 attempts: forward alpha 0.5, reverse alpha 0.25."""
    forward = [AcceptanceRecord(i, 1, 2, 0.5, i % 2 == 0) for i in range(1, 41)]
    reverse = [AcceptanceRecord(i, 2, 1, 0.25, i % 4 == 0) for i in range(41, 81)]
    return forward + reverse


@pytest.fixture
def write_config(tmp_path):
    """Write a TOML config into tmp_path and return its path."""
    def write(body, name='run.toml'):
        path = tmp_path / name
        path.write_text(textwrap.dedent(body), encoding='utf-8')
        return path
    return write


@pytest.fixture
def toy_config(write_config, tmp_path):
    """A small two-model toy run with three replicates."""
    out = tmp_path / 'out'
    return write_config(f"""
        [model]
        kind = "toy"
        variant = "two-model"

        [sampler]
        iterations = 400
        burn_in = 100
        thinning = 1
        replicates = 3
        seed = 42
        workers = 1

        [output]
        directory = "{out.as_posix()}"

        [diagnostics]
        checkpoints = 5
        reference_points = 10
    """)
