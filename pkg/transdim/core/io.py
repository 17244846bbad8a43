"""
Reading and writing sampler output and datasets.

Every table is a pandas DataFrame written with 17 significant digits and
``\\n`` line endings, so the same (config, seed) always produces byte-identical
files. Datasets are single-column numeric text files; change-point datasets
carry a ``# horizon: T`` header line.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from transdim.core.errors import ContractViolation
from transdim.core.state import ACCEPTANCE_COLUMNS, PARAM_COLUMNS, STATE_COLUMNS, Trace

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

# Output file stems, one file per replicate: ``trace_r00.csv`` etc.
TRACE_FILES = {
    "trace": STATE_COLUMNS,
    "params": PARAM_COLUMNS,
    "acceptance": ACCEPTANCE_COLUMNS,
}

_HEADER = re.compile(r"^#\s*(\w+)\s*:\s*(\S+)\s*$")
_REPLICATE_FILE = re.compile(r"^(trace|params|acceptance)_r(\d+)\.csv$")

PathLike = Union[str, Path]


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a DataFrame as CSV with the reproducible float format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_frame(path: PathLike, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Read a CSV written by :func:`write_frame`.

    Raises:
        ContractViolation: If ``columns`` are given and some are missing.
    """
    frame = pd.read_csv(path)
    if columns is not None:
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise ContractViolation(f"{path}: missing columns {missing}")
    return frame


def replicate_file(directory: PathLike, stem: str, replicate: int) -> Path:
    return Path(directory) / f"{stem}_r{replicate:02d}.csv"


def write_trace(trace: Trace, directory: PathLike) -> List[Path]:
    """
    Write ``trace_rNN.csv``, ``params_rNN.csv`` and ``acceptance_rNN.csv``
    for every replicate of ``trace``.

    Returns:
        The written paths, grouped by replicate.
    """
    frames = {
        "trace": trace.state_frame(),
        "params": trace.params_frame(),
        "acceptance": trace.acceptance_frame(),
    }
    written = []
    for rep in trace.replicates:
        for stem, frame in frames.items():
            part = frame[frame["replicate"] == rep.replicate]
            written.append(write_frame(part, replicate_file(directory, stem, rep.replicate)))
    return written


def discover_trace_files(paths: Sequence[PathLike]) -> Dict[str, List[Path]]:
    """
    Collect replicate files from directories and explicit file paths.

    Returns:
        ``{"trace": [...], "params": [...], "acceptance": [...]}``, each sorted
        by replicate number.
    """
    found: Dict[str, Dict[int, Path]] = {stem: {} for stem in TRACE_FILES}
    for entry in paths:
        entry = Path(entry)
        if not entry.exists():
            raise FileNotFoundError(f"input not found: {entry}")
        candidates = sorted(entry.iterdir()) if entry.is_dir() else [entry]
        for candidate in candidates:
            match = _REPLICATE_FILE.match(candidate.name)
            if match:
                found[match.group(1)][int(match.group(2))] = candidate
    return {stem: [files[r] for r in sorted(files)] for stem, files in found.items()}


def read_trace(paths: Sequence[PathLike]) -> Trace:
    """
    Rebuild a :class:`Trace` from replicate CSV files.

    Raises:
        FileNotFoundError: If no ``trace_rNN.csv`` file is found.
    """
    files = discover_trace_files(paths)
    if not files["trace"]:
        raise FileNotFoundError(f"no trace_rNN.csv files found in {[str(p) for p in paths]}")
    tables = {}
    for stem, columns in TRACE_FILES.items():
        frames = [read_frame(p, columns) for p in files[stem]]
        tables[stem] = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
    logger.info("read %d replicate(s)", len(files["trace"]))
    return Trace.from_frames(tables["trace"], tables["params"], tables["acceptance"])


def load_dataset(path: PathLike) -> Tuple[np.ndarray, Dict[str, float]]:
    """
    Load a single-column numeric dataset.

    Header lines of the form ``# name: value`` are returned as metadata
    (``horizon`` for change-point data); other ``#`` lines are ignored.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        ContractViolation: If the file has more than one column or a
            non-numeric value.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    metadata: Dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            match = _HEADER.match(line.strip())
            if match:
                try:
                    metadata[match.group(1)] = float(match.group(2))
                except ValueError:
                    raise ContractViolation(f"{path}: header {match.group(1)!r} is not numeric") from None
    try:
        values = np.loadtxt(path, comments="#", dtype=float, ndmin=1)
    except ValueError as exc:
        raise ContractViolation(f"{path}: {exc}") from None
    if values.ndim != 1:
        raise ContractViolation(f"{path}: expected a single column, got shape {values.shape}")
    return values, metadata


def save_dataset(values, path: PathLike, metadata: Optional[Dict[str, float]] = None) -> Path:
    """Write a dataset in the format read by :func:`load_dataset`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {value!r}\n")
        for value in np.asarray(values, dtype=float):
            fh.write(f"{FLOAT_FORMAT % value}\n")
    return path
