"""Ball-in-bowl motor coordination workbench."""

from .anova import AnovaResult, CellData, EffectRow, gg_epsilon, mauchly_test, mixed_anova, rm_anova_2way
from .dynamics import (
    BallState,
    BowlState,
    ForceSample,
    SimParams,
    ball_angular_accel,
    ball_reaction_force,
    resonant_frequency,
    resonant_length,
    step_ball,
    step_bowl,
)
from .engine import TrialEvent, TrialLog, TrialRunner, run_simulation
from .players import ControllerParams, ForceController, control_profile, stroke_profile
from .spectral import (
    Spectrum,
    TrialMetrics,
    aggregate_spectra,
    compute_trial_metrics,
    fft_spectrum,
    high_low_ratio,
    peak_near_resonance,
    time_per_target,
)
from .task import (
    FlagDistribution,
    Protocol,
    TrialSpec,
    TrialState,
    Workspace,
    accrue_task_time,
    builtin_distributions,
    check_collection,
    generate_protocol,
    scale_distribution,
)

__version__ = "0.1.0"
