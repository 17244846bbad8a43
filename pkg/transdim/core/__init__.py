"""
Sampler engine, moves, diagnostics, estimation and the run/report layer of transdim.
"""

from .state import (
    AcceptanceRecord,
    ChainState,
    ModelDefinition,
    ModelSpace,
    ReplicateTrace,
    SamplerConfig,
    Trace,
    nearest_neighbour_graph,
)
from .sampler import (
    JumpMove,
    VectorJumpMove,
    acceptance_log_ratio,
    check_move,
    mh_within_model_step,
    numerical_log_jacobian,
    rj_between_model_step,
    run_sampler,
)
from .moves import (
    AnnealedMove,
    AutoRJMove,
    DelayedRejectionMove,
    annealed_jump_step,
    autorj_proposal,
    delayed_rejection_step,
    merge_components,
    split_component,
)
from .diagnostics import (
    DiagnosticSeries,
    distance_psrf,
    model_indicator_chisq,
    model_indicator_ks,
    mpsrf,
    relabel_by_constraint,
)
from .estimation import (
    ModelProbabilityEstimate,
    bayes_factor_bridge,
    bayes_factor_table,
    bayes_factor_visits,
    posterior_model_probs,
)
from .config import RunConfig, parse_config, resolved_config, write_resolved_config
from .contracts import (
    DIAGNOSTIC_REPORT_CONTRACT,
    ESTIMATES_REPORT_CONTRACT,
    check_report_contract,
)
from .findings import collect_findings, exit_code, summarize

__all__ = [
    "AcceptanceRecord",
    "ChainState",
    "ModelDefinition",
    "ModelSpace",
    "ReplicateTrace",
    "SamplerConfig",
    "Trace",
    "nearest_neighbour_graph",
    "JumpMove",
    "VectorJumpMove",
    "acceptance_log_ratio",
    "check_move",
    "mh_within_model_step",
    "numerical_log_jacobian",
    "rj_between_model_step",
    "run_sampler",
    "AnnealedMove",
    "AutoRJMove",
    "DelayedRejectionMove",
    "annealed_jump_step",
    "autorj_proposal",
    "delayed_rejection_step",
    "merge_components",
    "split_component",
    "DiagnosticSeries",
    "distance_psrf",
    "model_indicator_chisq",
    "model_indicator_ks",
    "mpsrf",
    "relabel_by_constraint",
    "ModelProbabilityEstimate",
    "bayes_factor_bridge",
    "bayes_factor_table",
    "bayes_factor_visits",
    "posterior_model_probs",
    "RunConfig",
    "parse_config",
    "resolved_config",
    "write_resolved_config",
    "DIAGNOSTIC_REPORT_CONTRACT",
    "ESTIMATES_REPORT_CONTRACT",
    "check_report_contract",
    "collect_findings",
    "exit_code",
    "summarize",
]
