"""
Run configuration for transdim (the config-as-code layer).

A run is declared in a TOML, YAML or JSON file with the sections ``[model]``,
``[sampler]``, ``[moves]``, ``[output]`` and ``[diagnostics]``; the whole file
may also be wrapped in a ``[transdim]`` table. Unknown keys are rejected with
their dotted path so that a typo never silently falls back to a default.

TOML is parsed with the stdlib ``tomllib`` (Python 3.11+) or ``tomli``; YAML is
supported when ``PyYAML`` is installed.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from transdim.core.errors import ConfigError
from transdim.core.state import SamplerConfig

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised only on <3.11
    try:
        import tomli as _toml
    except ModuleNotFoundError:
        _toml = None


MODEL_KINDS = ('mixture', 'ar', 'changepoint', 'toy', 'gaussian-mean')
MOVE_KINDS = ('split-merge', 'birth-death', 'delayed-rejection', 'annealed', 'auto-rj')
TOY_VARIANTS = ('two-model', 'gaussian', 'discrete')

# Move selections that are valid for each model kind. 'birth-death' names the
# family's basic dimension-changing move; delayed rejection and annealed jumps
# wrap that move. For mixtures delayed rejection wraps split-merge.
VALID_MOVES: Dict[str, Tuple[str, ...]] = {
    'mixture': ('split-merge', 'birth-death', 'delayed-rejection'),
    'ar': ('birth-death', 'delayed-rejection', 'annealed', 'auto-rj'),
    'changepoint': ('birth-death', 'delayed-rejection', 'annealed'),
    'toy': ('birth-death', 'delayed-rejection', 'annealed', 'auto-rj'),
    'gaussian-mean': ('birth-death', 'delayed-rejection', 'annealed', 'auto-rj'),
}

DEFAULT_MOVES: Dict[str, Tuple[str, ...]] = {
    'mixture': ('split-merge', 'birth-death'),
    'ar': ('birth-death',),
    'changepoint': ('birth-death',),
    'toy': ('birth-death',),
    'gaussian-mean': ('birth-death',),
}

HYPERPARAMETERS: Dict[str, Tuple[str, ...]] = {
    'mixture': ('delta', 'xi', 'kappa', 'alpha', 'beta', 'k_max'),
    'ar': ('sigma_a', 'alpha_eps', 'beta_eps', 'k_max'),
    'changepoint': ('horizon', 'a_h', 'b_h', 'nu', 'k_max'),
    'toy': (),
    'gaussian-mean': ('tau', 'inflation'),
}

# Per-move option tables and their defaults.
MOVE_OPTIONS: Dict[str, Dict[str, Any]] = {
    'split-merge': {'centred_weight': False},
    'birth-death': {'scale': None},
    'delayed-rejection': {},
    'annealed': {'gamma': 1.0, 'kappa': 5, 'scale': None},
    'auto-rj': {'pilot_iterations': 2000},
}

DIAGNOSTIC_DEFAULTS: Dict[str, Any] = {
    'lag': 1,
    'checkpoints': 20,
    'reference_points': 100,
    'burn_in': 0,
    'batches': 50,
    'ks_p_value': 0.01,
    'chisq_p_value': 0.01,
    'psrf_threshold': 1.2,
}

OUTPUT_ROOT_ENV = 'TRANSDIM_OUTPUT_ROOT'

_SECTIONS = ('model', 'sampler', 'moves', 'output', 'diagnostics')
_MODEL_KEYS = ('kind', 'dataset', 'prior_only', 'variant', 'hyperparameters', 'simulate')
_SAMPLER_KEYS = ('iterations', 'burn_in', 'thinning', 'replicates', 'seed', 'within_move_scales',
                 'default_scale', 'between_move_probability', 'start_model', 'workers')
_SIMULATE_KEYS = ('size', 'seed', 'params')


@dataclass(frozen=True)
class ModelSection:
    kind: str = 'mixture'
    dataset: Optional[str] = None
    prior_only: bool = False
    variant: str = 'two-model'
    hyperparameters: Dict[str, float] = field(default_factory=dict)
    simulate: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class MovesSection:
    selection: Tuple[str, ...] = ()
    options: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def option(self, move: str, name: str):
        return self.options.get(move, {}).get(name, MOVE_OPTIONS[move][name])


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration."""
    model: ModelSection
    sampler: SamplerConfig
    moves: MovesSection
    output: str = 'transdim-output'
    diagnostics: Dict[str, Any] = field(default_factory=lambda: dict(DIAGNOSTIC_DEFAULTS))
    workers: int = 0
    source: Optional[str] = field(default=None, compare=False)

    def worker_count(self) -> int:
        """Process-pool size; 0 means one worker per CPU."""
        return self.workers or os.cpu_count() or 1

    def output_dir(self) -> Path:
        """The output directory, relative paths resolved against ``TRANSDIM_OUTPUT_ROOT``."""
        path = Path(self.output)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not path.is_absolute():
            return Path(root) / path
        return path


def _parse_file(path: Path) -> Dict:
    suffix = path.suffix.lower()
    if suffix in ('.yml', '.yaml'):
        try:
            import yaml
        except ModuleNotFoundError as e:  # pragma: no cover
            raise ConfigError(
                "YAML config requires PyYAML (pip install pyyaml), or use TOML"
            ) from e
        with open(path, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}
    if suffix == '.json':
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    if _toml is None:  # pragma: no cover
        raise ConfigError("TOML config requires Python 3.11+ or the 'tomli' package")
    with open(path, 'rb') as f:
        return _toml.load(f)


def _table(data: Mapping, key: str, path: str) -> Dict:
    value = data.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError("must be a table", field=path)
    return value


def _reject_unknown(table: Mapping, allowed, prefix: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        paths = [f"{prefix}.{key}" if prefix else key for key in unknown]
        raise ConfigError(
            f"unknown key(s) {', '.join(paths)} (expected one of {sorted(allowed)})",
            field=paths[0], unknown_keys=paths,
        )


def _number(value, path: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", field=path)
        return int(value)
    return float(value)


def _build_model(data: Dict, base_dir: Optional[Path]) -> ModelSection:
    _reject_unknown(data, _MODEL_KEYS, 'model')
    kind = str(data.get('kind', 'mixture'))
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r} (expected one of {list(MODEL_KINDS)})",
                          field='model.kind')
    variant = str(data.get('variant', 'two-model'))
    if variant not in TOY_VARIANTS:
        raise ConfigError(f"unknown toy variant {variant!r} (expected one of {list(TOY_VARIANTS)})",
                          field='model.variant')

    hyper = _table(data, 'hyperparameters', 'model.hyperparameters')
    _reject_unknown(hyper, HYPERPARAMETERS[kind], 'model.hyperparameters')
    hyper = {
        key: _number(value, f"model.hyperparameters.{key}", int if key == 'k_max' else float)
        for key, value in hyper.items()
    }

    simulate = data.get('simulate')
    if simulate is not None:
        if not isinstance(simulate, dict):
            raise ConfigError("must be a table", field='model.simulate')
        _reject_unknown(simulate, _SIMULATE_KEYS, 'model.simulate')
        if 'params' not in simulate:
            raise ConfigError("missing the true parameters", field='model.simulate.params')
        simulate = {
            'size': _number(simulate.get('size', 200), 'model.simulate.size', int),
            'seed': _number(simulate.get('seed', 0), 'model.simulate.seed', int),
            'params': dict(simulate['params']),
        }

    dataset = data.get('dataset')
    if dataset is not None:
        path = Path(str(dataset))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"dataset not found: {path}", field='model.dataset')
        dataset = str(path.resolve())
    prior_only = bool(data.get('prior_only', False))
    needs_data = kind in ('ar', 'changepoint', 'gaussian-mean') or (kind == 'mixture' and not prior_only)
    if needs_data and dataset is None and simulate is None:
        raise ConfigError(f"model kind {kind!r} needs a dataset or a [model.simulate] table",
                          field='model.dataset')
    return ModelSection(kind=kind, dataset=dataset, prior_only=prior_only, variant=variant,
                        hyperparameters=hyper, simulate=simulate)


def _build_sampler(data: Dict) -> Tuple[SamplerConfig, int]:
    _reject_unknown(data, _SAMPLER_KEYS, 'sampler')
    kwargs: Dict[str, Any] = {}
    for key in ('iterations', 'burn_in', 'thinning', 'replicates', 'seed'):
        if key in data:
            kwargs[key] = _number(data[key], f"sampler.{key}", int)
    kwargs.setdefault('iterations', 10000)
    for key in ('default_scale', 'between_move_probability'):
        if key in data:
            kwargs[key] = _number(data[key], f"sampler.{key}")
    if data.get('start_model') is not None:
        kwargs['start_model'] = _number(data['start_model'], 'sampler.start_model', int)
    scales = data.get('within_move_scales') or {}
    if not isinstance(scales, dict):
        raise ConfigError("must be a table of model index -> scales", field='sampler.within_move_scales')
    parsed = {}
    for k, value in scales.items():
        path = f"sampler.within_move_scales.{k}"
        try:
            index = int(k)
        except (TypeError, ValueError):
            raise ConfigError("keys must be model indices", field=path) from None
        values = value if isinstance(value, (list, tuple)) else [value]
        parsed[index] = [_number(v, path) for v in values]
        if any(v <= 0 for v in parsed[index]):
            raise ConfigError("scales must be > 0", field=path)
    kwargs['within_move_scales'] = parsed
    workers = _number(data.get('workers', 0), 'sampler.workers', int)
    if workers < 0:
        raise ConfigError("must be >= 0 (0 uses every CPU)", field='sampler.workers')
    return SamplerConfig(**kwargs), workers


def _build_moves(data: Dict, model: ModelSection) -> MovesSection:
    _reject_unknown(data, ('selection',) + MOVE_KINDS, 'moves')
    selection = data.get('selection')
    if selection is None:
        selection = DEFAULT_MOVES[model.kind]
    if isinstance(selection, str):
        selection = [selection]
    selection = tuple(str(s) for s in selection)
    if not selection:
        raise ConfigError("select at least one move", field='moves.selection')
    valid = VALID_MOVES[model.kind]
    if model.kind == 'toy' and model.variant == 'discrete':
        valid = tuple(m for m in valid if m != 'auto-rj')
    invalid = [s for s in selection if s not in valid]
    if invalid:
        raise ConfigError(
            f"move(s) {invalid} not available for model kind {model.kind!r} (expected a subset of {list(valid)})",
            field='moves.selection',
        )
    options: Dict[str, Dict[str, Any]] = {}
    for move in MOVE_KINDS:
        table = _table(data, move, f"moves.{move}")
        _reject_unknown(table, MOVE_OPTIONS[move], f"moves.{move}")
        resolved = dict(MOVE_OPTIONS[move])
        for key, value in table.items():
            path = f"moves.{move}.{key}"
            if key == 'centred_weight':
                resolved[key] = bool(value)
            elif key in ('kappa', 'pilot_iterations'):
                resolved[key] = _number(value, path, int)
            elif key == 'scale' and isinstance(value, (list, tuple)):
                resolved[key] = [_number(v, path) for v in value]
            else:
                resolved[key] = _number(value, path)
        if resolved.get('gamma', 1.0) < 1 or resolved.get('kappa', 0) < 0:
            raise ConfigError("annealed moves need gamma >= 1 and kappa >= 0", field=f"moves.{move}")
        if resolved.get('pilot_iterations', 2) < 2:
            raise ConfigError("must be >= 2", field=f"moves.{move}.pilot_iterations")
        options[move] = resolved
    return MovesSection(selection=selection, options=options)


def _build_diagnostics(data: Dict) -> Dict[str, Any]:
    _reject_unknown(data, DIAGNOSTIC_DEFAULTS, 'diagnostics')
    resolved = dict(DIAGNOSTIC_DEFAULTS)
    for key, value in data.items():
        kind = int if isinstance(DIAGNOSTIC_DEFAULTS[key], int) else float
        resolved[key] = _number(value, f"diagnostics.{key}", kind)
    for key in ('lag', 'checkpoints', 'reference_points', 'batches'):
        if resolved[key] < 1:
            raise ConfigError("must be >= 1", field=f"diagnostics.{key}")
    return resolved


def build_config(data: Dict, source: Optional[str] = None,
                 base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a parsed config mapping and fill in defaults."""
    # Allow either top-level sections or a [transdim] table wrapper.
    if 'transdim' in data and isinstance(data['transdim'], dict):
        data = data['transdim']
    _reject_unknown(data, _SECTIONS, '')
    model = _build_model(_table(data, 'model', 'model'), base_dir)
    sampler, workers = _build_sampler(_table(data, 'sampler', 'sampler'))
    moves = _build_moves(_table(data, 'moves', 'moves'), model)
    output = _table(data, 'output', 'output')
    _reject_unknown(output, ('directory',), 'output')
    diagnostics = _build_diagnostics(_table(data, 'diagnostics', 'diagnostics'))
    return RunConfig(
        model=model,
        sampler=sampler,
        moves=moves,
        output=str(output.get('directory', 'transdim-output')),
        diagnostics=diagnostics,
        workers=workers,
        source=source,
    )


def parse_config(path) -> RunConfig:
    """
    Load a RunConfig from a TOML, YAML or JSON file.

    Relative dataset paths are resolved against the directory of the file.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        ConfigError: On unknown keys or invalid values.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    return build_config(_parse_file(path), str(path), base_dir=path.parent)


def resolved_config(config: RunConfig) -> Dict[str, Any]:
    """Every setting of ``config`` with defaults filled in, as plain JSON data."""
    sampler = asdict(config.sampler)
    sampler['within_move_scales'] = {
        str(k): list(v) for k, v in sorted(config.sampler.within_move_scales.items())
    }
    sampler['workers'] = config.workers
    if sampler['start_model'] is None:
        del sampler['start_model']
    model: Dict[str, Any] = {
        'kind': config.model.kind,
        'prior_only': config.model.prior_only,
        'variant': config.model.variant,
        'hyperparameters': dict(sorted(config.model.hyperparameters.items())),
    }
    if config.model.dataset is not None:
        model['dataset'] = config.model.dataset
    if config.model.simulate is not None:
        model['simulate'] = config.model.simulate
    moves: Dict[str, Any] = {'selection': list(config.moves.selection)}
    for move in MOVE_KINDS:
        options = {k: v for k, v in config.moves.options.get(move, MOVE_OPTIONS[move]).items()
                   if v is not None}
        moves[move] = options
    return {
        'model': model,
        'sampler': sampler,
        'moves': moves,
        'output': {'directory': config.output},
        'diagnostics': dict(config.diagnostics),
    }


def write_resolved_config(config: RunConfig, directory) -> Path:
    """Write ``resolved_config.json``; parsing it again yields an identical RunConfig."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / 'resolved_config.json'
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(resolved_config(config), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """
    Apply command-line overrides (``seed``, ``replicates``, ``burn_in``,
    ``thinning``, ``workers``, ``output``); ``None`` values are ignored.
    """
    data = resolved_config(config)
    for key in ('seed', 'replicates', 'burn_in', 'thinning', 'workers'):
        if overrides.get(key) is not None:
            data['sampler'][key] = overrides[key]
    if overrides.get('output') is not None:
        data['output']['directory'] = str(overrides['output'])
    return build_config(data, config.source)