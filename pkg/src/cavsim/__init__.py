"""Open-system simulator for a two-level atom crossing two lossy dispersive
cavities and a Ramsey zone, tracking pairwise entanglement of atom and fields.
"""

from .analytic import (
    Stage1Snapshot,
    branch_amplitudes,
    coherence_factor,
    concurrence_stage1,
    rho_stage1,
    stage1_snapshot,
)
from .entanglement import (
    EffectiveQubitReduction,
    PairwiseConcurrences,
    effective_two_qubit,
    monogamy_residual,
    pairwise_concurrences,
    wootters_concurrence,
)
from .evolution import (
    BranchState,
    ConcurrenceRecord,
    Scenario,
    StageKind,
    Trajectory,
    branch_run,
    default_truncation,
    dispersive_unitary,
    dispersive_validity,
    dissipative_map,
    initial_density,
    initial_state,
    ramsey_unitary,
    run_scenario,
    stage_step,
)
from .exceptions import (
    ConfigError,
    NonPhysicalState,
    StepUnderflow,
    TruncationTooSmall,
    UnsupportedInitialState,
)
from .hilbert import (
    DensityMatrix,
    PureState,
    SubsystemLayout,
    coherent_overlap,
    coherent_state,
    mean_photon_number,
    partial_trace,
    photon_number_distribution,
    standard_layout,
    tensor_product,
    trace_distance,
)
from .lindblad import IntegratorConfig, integrate, liouvillian_apply, run_oracle

__version__ = "0.1.0"
