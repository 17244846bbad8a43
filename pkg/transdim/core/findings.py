"""
Findings: turn a diagnostics report into severity-tagged convergence findings.

This is the layer that turns panel values into a verdict. A finding with
severity ``error`` fails ``transdim diagnose``; with ``--strict`` warnings fail
it too.
"""

from typing import Any, Dict, List, Mapping, Optional

from transdim.core.config import DIAGNOSTIC_DEFAULTS

_SEVERITY_ORDER = {'error': 3, 'warning': 2, 'info': 1, 'off': 0}

DEFAULT_SEVERITIES: Dict[str, str] = {
    'ks_disagreement': 'warning',
    'chisq_heterogeneity': 'warning',
    'mpsrf_not_converged': 'warning',
    'distance_psrf_not_converged': 'warning',
    'single_replicate': 'warning',
    'skipped_checkpoints': 'info',
    'excluded_values': 'info',
    'contract': 'error',
    'panel_error': 'error',
}


def _finding(check_id, severity, message, count=1):
    return {
        'check_id': check_id,
        'severity': severity,
        'message': message,
        'count': int(count),
    }


def _finite(values) -> List[float]:
    return [float(v) for v in values if v is not None]


def collect_findings(report: Dict[str, Any], options: Optional[Mapping[str, Any]] = None,
                     severities: Optional[Mapping[str, str]] = None) -> List[Dict]:
    """
    Build the list of severity-tagged findings from a diagnostics report.

    Args:
        report: A report from :func:`transdim.core.report.diagnostic_report`
            (optionally with a ``contract`` list of violations).
        options: Thresholds ``ks_p_value``, ``chisq_p_value`` and
            ``psrf_threshold`` (defaults from the ``[diagnostics]`` section).
        severities: Per-check severity overrides.

    Returns:
        List of finding dicts, excluding any whose severity is 'off'.
    """
    options = {**DIAGNOSTIC_DEFAULTS, **(options or {})}
    levels = {**DEFAULT_SEVERITIES, **(severities or {})}
    findings: List[Dict] = []

    def add(check_id, message, count=1):
        if not count or levels.get(check_id, 'warning') == 'off':
            return
        findings.append(_finding(check_id, levels.get(check_id, 'warning'), message, count))

    panels = report.get('panels') or {}
    if report.get('replicates', 0) < 2:
        add('single_replicate', "only one replicate: between-chain diagnostics unavailable")

    ks_p = _finite((panels.get('ks') or {}).get('final_p_values', {}).values())
    low = [p for p in ks_p if p < options['ks_p_value']]
    add('ks_disagreement',
        f"{len(low)} chain pair(s) with KS p-value below {options['ks_p_value']} at the last checkpoint",
        len(low))

    chisq_p = _finite((panels.get('chisq') or {}).get('final_p_values', {}).values())
    if chisq_p and min(chisq_p) < options['chisq_p_value']:
        add('chisq_heterogeneity',
            f"model visits differ between chains (p = {min(chisq_p):.3g})")

    threshold = options['psrf_threshold']
    mpsrf_final = (panels.get('mpsrf') or {}).get('final', {})
    high = {label: v for label, v in mpsrf_final.items() if v is None or v > threshold}
    add('mpsrf_not_converged',
        "mPSRF above {}: {}".format(threshold, ", ".join(f"{k}={v}" for k, v in sorted(high.items()))),
        len(high))

    distance_final = (panels.get('distance_psrf') or {}).get('final', {})
    high_points = [v for v in distance_final.values() if v is None or v > threshold]
    add('distance_psrf_not_converged',
        f"{len(high_points)} of {len(distance_final)} reference points with PSRF above {threshold}",
        len(high_points))

    for name, panel in panels.items():
        add('skipped_checkpoints', f"{name}: {len(panel.get('skipped', []))} checkpoint(s) skipped",
            len(panel.get('skipped', [])))
        add('excluded_values', f"{name}: {panel.get('excluded', 0)} value(s) excluded",
            panel.get('excluded', 0))

    for message in report.get('errors') or []:
        add('panel_error', message)
    for violation in report.get('contract') or []:
        add('contract', f"{violation['field']}: {violation['message']}")
    return findings


def summarize(findings: List[Dict]) -> Dict[str, int]:
    """Count findings by severity."""
    summary = {'error': 0, 'warning': 0, 'info': 0, 'total': 0}
    for f in findings:
        sev = f.get('severity', 'warning')
        if sev in summary:
            summary[sev] += 1
        summary['total'] += 1
    return summary


def exit_code(findings: List[Dict], *, strict: bool = False) -> int:
    """
    Return 1 when the findings should fail the command, else 0.

    With ``strict``, warnings count as failures too.
    """
    threshold = 'warning' if strict else 'error'
    cutoff = _SEVERITY_ORDER[threshold]
    for f in findings:
        if _SEVERITY_ORDER.get(f.get('severity', 'warning'), 0) >= cutoff:
            return 1
    return 0
