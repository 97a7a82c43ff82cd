"""Fidelity versus success-probability tradeoffs for two-party
entanglement distillation.

The package splits into layers: `qmath` (operators, layouts, Choi tools),
`states` (input families and their text mini-language), `protocols` (named
distillation schemes and achievable curves), `sdp_core` (the conic modeling
layer), `bounds` (semidefinite upper bounds and dual evaluation),
`certificates` (analytic dual solutions and block decompositions), `seesaw`
(alternating protocol improvement), and `cli` (the `distil` command).
"""

from .bounds import (
    BoundResult,
    DualCertificate,
    bse1_fidelity_bound,
    default_delta_grid,
    eval_fidelity_dual,
    eval_success_dual,
    extract_certificate,
    ppt_fidelity_bound,
    ppt_fidelity_bound_full,
    ppt_success_bound,
)
from .certificates import (
    BellParams,
    dejmps_fidelity_certificate,
    dejmps_success_certificate,
    epl_block_decomposition,
    relative_entropy,
    sep_guess_state,
)
from .protocols import (
    KrausProtocol,
    ProtocolOutcome,
    achievable_curve,
    bbpssw,
    dejmps,
    dejmps_circuit,
    epl_d,
    extrapolate_to_delta,
    extrapolate_up,
    filtering,
    modified_filtering_optimal,
)
from .qmath import (
    ChoiBranch,
    DensityMatrix,
    StructuredOperator,
    SubsystemLayout,
    fidelity_to_target,
    partial_trace,
    partial_transpose,
)
from .seesaw import SeesawState, seesaw_run, seesaw_step
from .states import (
    StateSpec,
    bell_diag,
    epl_integrated,
    isotropic,
    make_state,
    parse_state_spec,
    r_state,
    rotated_r,
    s_state,
)

__version__ = "0.1.0"

__all__ = [
    "BellParams",
    "BoundResult",
    "ChoiBranch",
    "DensityMatrix",
    "DualCertificate",
    "KrausProtocol",
    "ProtocolOutcome",
    "SeesawState",
    "StateSpec",
    "StructuredOperator",
    "SubsystemLayout",
    "achievable_curve",
    "bbpssw",
    "bell_diag",
    "bse1_fidelity_bound",
    "default_delta_grid",
    "dejmps",
    "dejmps_circuit",
    "dejmps_fidelity_certificate",
    "dejmps_success_certificate",
    "epl_block_decomposition",
    "epl_d",
    "epl_integrated",
    "eval_fidelity_dual",
    "eval_success_dual",
    "extract_certificate",
    "extrapolate_to_delta",
    "extrapolate_up",
    "fidelity_to_target",
    "filtering",
    "isotropic",
    "make_state",
    "modified_filtering_optimal",
    "parse_state_spec",
    "partial_trace",
    "partial_transpose",
    "ppt_fidelity_bound",
    "ppt_fidelity_bound_full",
    "ppt_success_bound",
    "r_state",
    "relative_entropy",
    "rotated_r",
    "s_state",
    "seesaw_run",
    "seesaw_step",
    "sep_guess_state",
    "__version__",
]
