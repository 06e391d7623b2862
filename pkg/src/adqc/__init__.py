"""Measurement-driven gate simulation with blind delegated execution."""

from .core import (
    AncillaSpec,
    BranchReport,
    CartanParams,
    Entangler,
    KrausPair,
    LocalFrame,
    MeasBasis,
    assemble_entangler,
    branch_analysis,
    kraus_pair,
    param_state,
    preset,
    preset_labels,
    rotation,
    weyl_interaction,
)
from .linalg import (
    DensityMatrix,
    PureState,
    equal_up_to_global_phase,
    partial_trace,
    tensor,
)
from .conditions import (
    ParamPoint,
    TableCase,
    classify_parameters,
    constraint_residual,
    fg_coefficients,
    l_hiding_residual,
    required_alpha_x,
    vw_form_check,
)
from .register import (
    AdaptiveAngle,
    AdqcStep,
    GatePattern,
    RegisterState,
    execute_step,
    init_register,
    run_pattern,
)
from .patterns import (
    CircuitDescription,
    CircuitGate,
    compile_circuit,
    standard_pattern,
    universal_tile,
    verify_pattern,
)
from .protocol import (
    AuditReport,
    Client,
    ClientSecret,
    Message,
    ProtocolTranscript,
    Server,
    audit_blindness,
    run_delegation,
)

__version__ = "0.1.0"
