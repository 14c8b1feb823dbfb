"""Stochastic dynamical low-rank approximation of SDE ensembles and
Lindblad unravelings: a coupled frame ODE plus reduced ensemble SDE, a
dynamically orthogonal baseline, deterministic references and diagnostics.
"""

from .config import ExperimentConfig, load_config, parse_config, save_config, serialize_config
from .diagnostics import (
    TrajectoryRecord,
    moment_ode_oracle,
    pseudometric,
    relative_errors,
    spectrum_trajectory,
)
from .do_method import DoState, do_init, do_moments, do_step
from .ensemble import em_step, noise_for_step, stream_generator, thread_count
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    NumericError,
    RankError,
    SdlrError,
    SingularityError,
)
from .lindblad import (
    LindbladGenerator,
    LowRankQmeState,
    apply_generator,
    integrate_lindblad,
    integrate_lowrank_qme,
    make_damped_oscillator,
    superop_hs_norm,
)
from .linalg import (
    anticommutator,
    commutator,
    frame_defect,
    hermitize,
    hs_inner,
    hs_norm,
    pinv_psd,
    projectors,
    random_hermitian,
    random_stiefel,
    retract_to_stiefel,
    top_spectrum,
)
from .lowrank import (
    LowRankState,
    MomentSummary,
    ensemble_moments,
    gronwall_bound,
    growth_rate_bound,
    init_low_rank,
    residual_epsilon_sq,
    sdlr_step,
)
from .models import (
    DiscreteInitialMeasure,
    SdeModel,
    burgers_field,
    burgers_initial_measure,
    eval_model,
    gbm_initial_measure,
    make_burgers,
    make_gbm,
    make_lqsd,
    make_qsd,
    measure_moments,
    oscillator_initial_measure,
    poisson_weights,
    sample_initial,
    verify_unraveling,
)
from .experiments import ExperimentResult, MethodRun, read_csv, run_experiment, write_csv

__version__ = "0.1.0"
