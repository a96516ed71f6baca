"""Two-state-vector simulations: ABL probabilities, weak values, two-time decoherence, robustness."""

from .hilbert import (
    MAX_DIMENSION,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    LayoutError,
    NotHermitianError,
    NotUnitaryError,
    OperatorMatrix,
    PiecewiseHamiltonian,
    PureState,
    SubsystemLayout,
    apply,
    embed_operator,
    inner_product,
    partial_trace,
    tensor_all,
    tensor_product,
    time_ordered_unitary,
)
from .twostate import (
    ForbiddenTwoStateError,
    TwoState,
    TwoStateDensity,
    evolve_backward,
    evolve_two_state,
    make_two_state_density,
    reduce_two_state,
    weak_value,
)
from .rules import (
    DegenerateObservableError,
    OutcomeDistribution,
    abl_probability,
    born_probability,
    marginalize_final,
    sample_final_states,
)
from .measurement import (
    EnvironmentRegister,
    PointerBasis,
    backward_decohere,
    decohere_forward,
    run_sequential_measurement,
    run_signaling_demo,
    run_single_measurement,
    sequential_measurement_scenario,
    single_measurement_scenario,
    von_neumann_couple,
)
from .robustness import (
    DIVERGENT,
    CollapseRecord,
    DecayModel,
    ProductEnvironment,
    collapse_environment,
    decay_population,
    environment_overlap,
    robustness_ratio,
    sweep_robustness,
)
from .config import ConfigError, ScenarioConfig, load_config
from .report import ScenarioReport, emit_report, run

__version__ = "0.1.0"
