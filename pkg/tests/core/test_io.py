"""
Tests for transdim.core.io: replicate CSV files and datasets.
"""

import numpy as np
import pytest

from transdim.core.errors import ContractViolation
from transdim.core.io import (
    discover_trace_files,
    load_dataset,
    read_frame,
    read_trace,
    save_dataset,
    write_trace,
)
from transdim.core.sampler import run_sampler
from transdim.core.state import SamplerConfig, STATE_COLUMNS
from transdim.models.toy import two_model_toy


@pytest.fixture
def small_trace():
    space, moves = two_model_toy()
    return run_sampler(SamplerConfig(iterations=60, burn_in=10, replicates=2, seed=5), space, moves, None)


class TestTraceFiles:
    """One set of CSV files per replicate."""

    def test_file_names(self, small_trace, tmp_path):
        written = write_trace(small_trace, tmp_path)
        assert sorted(p.name for p in written) == [
            'acceptance_r00.csv', 'acceptance_r01.csv',
            'params_r00.csv', 'params_r01.csv',
            'trace_r00.csv', 'trace_r01.csv',
        ]

    def test_read_back(self, small_trace, tmp_path):
        write_trace(small_trace, tmp_path)
        again = read_trace([tmp_path])
        assert len(again.replicates) == 2
        for original, loaded in zip(small_trace.model_sequences(), again.model_sequences()):
            assert np.array_equal(original, loaded)
        assert again.records() == small_trace.records()
        assert np.allclose(again.replicates[1].params[-1], small_trace.replicates[1].params[-1],
                           rtol=0, atol=0)

    def test_rewrite_is_byte_identical(self, small_trace, tmp_path):
        write_trace(small_trace, tmp_path / 'a')
        write_trace(read_trace([tmp_path / 'a']), tmp_path / 'b')
        for name in ('params_r00.csv', 'params_r01.csv', 'acceptance_r00.csv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_unix_line_endings(self, small_trace, tmp_path):
        write_trace(small_trace, tmp_path)
        assert b'\r\n' not in (tmp_path / 'trace_r00.csv').read_bytes()

    def test_explicit_files(self, small_trace, tmp_path):
        write_trace(small_trace, tmp_path)
        files = discover_trace_files([tmp_path / 'trace_r01.csv'])
        assert [p.name for p in files['trace']] == ['trace_r01.csv']
        assert files['params'] == []

    def test_no_trace_files(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_trace([tmp_path])

    def test_missing_input(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            discover_trace_files([tmp_path / 'nope'])

    def test_missing_columns(self, tmp_path):
        path = tmp_path / 'trace_r00.csv'
        path.write_text("replicate,iteration\n0,1\n")
        with pytest.raises(ContractViolation, match="missing columns"):
            read_frame(path, STATE_COLUMNS)


class TestDatasets:
    """Single-column numeric data files."""

    def test_round_trip_with_header(self, tmp_path):
        values = np.array([0.5, 1.25, 3.0])
        path = save_dataset(values, tmp_path / 'events.txt', {'horizon': 10.0})
        loaded, metadata = load_dataset(path)
        assert np.array_equal(loaded, values)
        assert metadata == {'horizon': 10.0}

    def test_single_value(self, tmp_path):
        path = tmp_path / 'one.txt'
        path.write_text("4.5\n")
        values, _ = load_dataset(path)
        assert values.tolist() == [4.5]

    def test_comments_are_ignored(self, tmp_path):
        path = tmp_path / 'data.txt'
        path.write_text("# simulated\n1.0\n2.0\n")
        values, metadata = load_dataset(path)
        assert values.tolist() == [1.0, 2.0]
        assert metadata == {}

    def test_two_columns_rejected(self, tmp_path):
        path = tmp_path / 'wide.txt'
        path.write_text("1.0 2.0\n3.0 4.0\n")
        with pytest.raises(ContractViolation):
            load_dataset(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / 'bad.txt'
        path.write_text("1.0\nabc\n")
        with pytest.raises(ContractViolation):
            load_dataset(path)

    def test_missing_dataset(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / 'absent.txt')
