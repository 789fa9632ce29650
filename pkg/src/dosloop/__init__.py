"""Resilient sampled-data control loops under denial-of-service jamming.

The package simulates linear plants whose feedback runs over a jammable
channel and computes closed-form exponential-stability certificates that
survive both the jamming and the finite sampling rate of the channel.
"""

from .dos import (
    BudgetCheck,
    DosBudget,
    DosSequence,
    GenerationError,
    check_slow_average,
    gen_greedy_adversary,
    gen_periodic,
    gen_random_budgeted,
    is_jammed,
    n_of_t,
    periodic_budget,
    tau_last,
    xi_measure,
)
from .guarantees import (
    IDEAL_ROBUSTNESS,
    LyapunovConstants,
    SamplingRobustness,
    TrajectoryConstants,
    delta_n_of_t,
    dos_free_segments,
    format_report,
    ges_certificate_ideal,
    ges_certificate_lyapunov,
    ges_certificate_sampled,
    gronwall_bound,
    measure_robustness,
    rho_star,
    xi_bar_measure,
)
from .linalg import (
    DecayEnvelope,
    EnvelopeError,
    GrowthEnvelope,
    LyapunovError,
    decay_envelope,
    growth_envelope,
    log_norm,
    mat_exp,
    solve_lyapunov,
    spectral_norm,
)
from .plant import (
    InputMode,
    LoopState,
    LtiPlant,
    closed_loop_matrix,
    error_vector,
    exact_hold_step,
)
from .sim import (
    GesVerdict,
    OnsetSnapshot,
    RuleVerdict,
    SimConfig,
    Trace,
    check_lyapunov_decay,
    check_onset_amplification,
    check_update_rule,
    find_event_crossing,
    run,
    verify_ges,
)
from .triggers import (
    LogicKind,
    TriggerConfig,
    Varphi,
    next_update_event_time,
    next_update_pure_time,
    next_update_self_trigger,
    predict_state,
    predict_state_open_loop_hold,
    riccati_delta2,
    validate_trigger_for_plant,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetCheck",
    "DecayEnvelope",
    "DosBudget",
    "DosSequence",
    "EnvelopeError",
    "GenerationError",
    "GesVerdict",
    "GrowthEnvelope",
    "IDEAL_ROBUSTNESS",
    "InputMode",
    "LogicKind",
    "LoopState",
    "LtiPlant",
    "LyapunovConstants",
    "LyapunovError",
    "OnsetSnapshot",
    "RuleVerdict",
    "SamplingRobustness",
    "SimConfig",
    "Trace",
    "TrajectoryConstants",
    "TriggerConfig",
    "Varphi",
    "check_lyapunov_decay",
    "check_onset_amplification",
    "check_slow_average",
    "check_update_rule",
    "closed_loop_matrix",
    "decay_envelope",
    "delta_n_of_t",
    "dos_free_segments",
    "error_vector",
    "exact_hold_step",
    "find_event_crossing",
    "format_report",
    "gen_greedy_adversary",
    "gen_periodic",
    "gen_random_budgeted",
    "ges_certificate_ideal",
    "ges_certificate_lyapunov",
    "ges_certificate_sampled",
    "gronwall_bound",
    "growth_envelope",
    "is_jammed",
    "log_norm",
    "mat_exp",
    "measure_robustness",
    "n_of_t",
    "next_update_event_time",
    "next_update_pure_time",
    "next_update_self_trigger",
    "periodic_budget",
    "predict_state",
    "predict_state_open_loop_hold",
    "rho_star",
    "riccati_delta2",
    "run",
    "solve_lyapunov",
    "spectral_norm",
    "tau_last",
    "validate_trigger_for_plant",
    "verify_ges",
    "xi_bar_measure",
    "xi_measure",
]
