"""
Report contracts: the schema every diagnostics and estimates report must meet.

A contract lists required fields with their types plus a few semantic rules
(checkpoints strictly increasing, probabilities in [0, 1] and summing to one).
``check_report_contract`` returns structured violations; an empty list means
the report satisfies the contract.
"""

import math
from typing import Any, Dict, List

_PROBABILITY_TOL = 1e-9

DIAGNOSTIC_REPORT_CONTRACT: Dict[str, Any] = {
    'name': 'diagnostics',
    'required': {
        'transdim_version': str,
        'replicates': int,
        'states_per_replicate': list,
        'panels': dict,
        'within_chain': list,
        'warnings': list,
        'errors': list,
    },
    'panel_required': {
        'kind': str,
        'checkpoints': list,
        'labels': list,
        'final': dict,
        'skipped': list,
        'excluded': int,
    },
    'panels': ('ks', 'chisq', 'mpsrf', 'distance_psrf'),
}

ESTIMATES_REPORT_CONTRACT: Dict[str, Any] = {
    'name': 'estimates',
    'required': {
        'transdim_version': str,
        'replicates': int,
        'model_probabilities': dict,
        'bayes_factors': list,
        'warnings': list,
        'errors': list,
    },
    'row_required': ('k', 'k_prime', 'visits', 'bridge', 'bridge_standard_error',
                     'attempts_forward', 'attempts_reverse', 'available', 'notes'),
}


def _violation(rule, field, message):
    return {
        'rule': rule,
        'field': field,
        'message': message,
    }


def _check_fields(node: Dict, required: Dict[str, type], prefix: str) -> List[Dict]:
    violations = []
    for name, expected in required.items():
        path = f"{prefix}{name}"
        if name not in node:
            violations.append(_violation('required', path, f"missing field '{path}'"))
        elif isinstance(node[name], bool) or not isinstance(node[name], expected):
            violations.append(_violation(
                'type', path, f"'{path}' must be {expected.__name__}, got {type(node[name]).__name__}"
            ))
    return violations


def _in_unit_interval(value) -> bool:
    return value is None or (isinstance(value, (int, float)) and 0.0 <= value <= 1.0)


def _check_panels(report: Dict, contract: Dict) -> List[Dict]:
    violations: List[Dict] = []
    for name, panel in (report.get('panels') or {}).items():
        prefix = f"panels.{name}."
        if name not in contract['panels']:
            violations.append(_violation('unknown_panel', f"panels.{name}", f"unknown panel '{name}'"))
            continue
        if not isinstance(panel, dict):
            violations.append(_violation('type', f"panels.{name}", "a panel must be an object"))
            continue
        violations.extend(_check_fields(panel, contract['panel_required'], prefix))
        checkpoints = panel.get('checkpoints') or []
        if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
            violations.append(_violation(
                'increasing', f"{prefix}checkpoints", "checkpoints must be strictly increasing"
            ))
        if set(panel.get('final') or {}) - set(panel.get('labels') or []):
            violations.append(_violation(
                'labels', f"{prefix}final", "final values must be keyed by the panel's curve labels"
            ))
        for label, p in (panel.get('final_p_values') or {}).items():
            if not _in_unit_interval(p):
                violations.append(_violation(
                    'range', f"{prefix}final_p_values.{label}", f"p-value {p!r} outside [0, 1]"
                ))
    return violations


def _check_estimates(report: Dict, contract: Dict) -> List[Dict]:
    violations: List[Dict] = []
    probabilities = report.get('model_probabilities') or {}
    values = []
    for k, entry in probabilities.items():
        p = entry.get('probability') if isinstance(entry, dict) else None
        if not isinstance(p, (int, float)) or not _in_unit_interval(p):
            violations.append(_violation(
                'range', f"model_probabilities.{k}.probability", f"probability {p!r} outside [0, 1]"
            ))
        else:
            values.append(float(p))
    if values and abs(math.fsum(values) - 1.0) > _PROBABILITY_TOL:
        violations.append(_violation(
            'normalised', 'model_probabilities', f"probabilities sum to {math.fsum(values)!r}, expected 1"
        ))
    for i, row in enumerate(report.get('bayes_factors') or []):
        missing = [key for key in contract['row_required'] if key not in row]
        if missing:
            violations.append(_violation(
                'required', f"bayes_factors.{i}", f"row is missing {missing}"
            ))
        for key in ('visits', 'bridge'):
            value = row.get(key)
            if value is not None and not (isinstance(value, (int, float)) and value >= 0):
                violations.append(_violation(
                    'range', f"bayes_factors.{i}.{key}", f"Bayes factor {value!r} must be >= 0"
                ))
    return violations


def check_report_contract(report: Dict, contract: Dict) -> List[Dict]:
    """
    Validate a report against a contract.

    Args:
        report: A diagnostics or estimates report dict.
        contract: ``DIAGNOSTIC_REPORT_CONTRACT`` or ``ESTIMATES_REPORT_CONTRACT``.

    Returns:
        List of violation dicts: {rule, field, message}.
    """
    violations = _check_fields(report, contract['required'], '')
    if contract['name'] == 'diagnostics':
        violations.extend(_check_panels(report, contract))
    elif contract['name'] == 'estimates':
        violations.extend(_check_estimates(report, contract))
    return violations
