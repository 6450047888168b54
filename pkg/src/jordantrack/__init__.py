"""Jordan-center tracking and branching analytics for infection-grown trees."""

__version__ = "0.1.0"

from .tree import (  # noqa: F401
    CenterSnapshot,
    TreeArena,
    balancedness_center,
    distance,
    eccentricity,
    jordan_center_exact,
    neighbor_subtree_depths,
)
from .growth import (  # noqa: F401
    CSI,
    DSI,
    IC,
    PA,
    GrowthEvent,
    GrowthState,
    StopCondition,
    UnderlyingTreeSpec,
    is_dead,
    new_state,
    new_tree,
    run_csi,
    step_dsi,
    step_ic,
    step_pa,
    trial_rng,
    trial_seed,
)
from .branching import (  # noqa: F401
    BranchingSpec,
    FirstPassageSpec,
    estimate_front_speed,
    first_passage_windows,
    gw_extinction_prob,
    mu,
    mu_infimum,
    phi,
    time_constant_gamma,
)
from .tracking import (  # noqa: F401
    PersistenceReport,
    Transition,
    TrialTrace,
    VerificationVerdict,
    persistence_report,
    track,
    track_balancedness,
    verify_ic_specifics,
    verify_movement,
)
from .harness import (  # noqa: F401
    AggregateReport,
    ExperimentConfig,
    preset,
    run,
    run_trial,
    verify_suite,
)
