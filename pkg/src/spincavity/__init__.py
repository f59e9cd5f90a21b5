"""spincavity: dense-matrix simulator for collective-spin gates on a cavity bus."""

from .hilbert import (
    DensityMatrix,
    HilbertLayout,
    LayoutError,
    Operator,
    StateVector,
    TruncationError,
    collective_jx,
    embed_site_op,
    fock_ops,
    thermal_weights,
)
from .model import (
    HamiltonianRecipe,
    LambdaParams,
    ModelError,
    SimParams,
    build_driven_hamiltonian,
    build_effective_hamiltonian,
    build_lambda_hamiltonian,
    build_neglected_terms,
    build_raman_hamiltonian,
    build_rotated_hamiltonian,
    effective_eta,
)
from .engine import (
    PropagationError,
    PropagationSettings,
    TrajectoryResult,
    analytic_A,
    analytic_B,
    analytic_propagator,
    closure_times,
    fit_jx2_angle,
    fit_state_jx2_angle,
    phase_aligned_distance,
    propagate,
    reduced_qubit_propagator,
    spin_jx2_exponential,
)
from .protocol import (
    BudgetReport,
    GateReport,
    ProtocolError,
    PulseSchedule,
    PulseSegment,
    commensurability_check,
    composite_fidelity,
    decoherence_budget,
    dyson_infidelity_oracle,
    echo_schedule,
    fidelity,
    gamma_of,
    ghz_target,
    ghz_target_state,
    infidelity_model,
    run_ghz_protocol,
    run_schedule,
)
from .config import ConfigError, PhysicsValidationError, RunConfig, resolve_config
from .presets import PRESETS, preset

__version__ = "0.1.0"
