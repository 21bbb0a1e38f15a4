"""Controllability and steering of continuous-time FTRL learners in finite games."""

from .controllability import (
    ControllabilityReport,
    LieRankReport,
    NeutralizerCertificate,
    PeriodicityEvidence,
    VerdictOptions,
    drift_periodicity_probe,
    lie_rank_sample,
    multi_player_verdict,
    neutralizer_lp,
    projected_rank,
    two_player_verdict,
    uniform_neutralizer,
    verdict,
)
from .dynamics import (
    ControlSchedule,
    InteriorGuardError,
    IntegrationError,
    Trajectory,
    equivalence_check,
    simulate,
    simulate_batch,
    simulate_dual,
)
from .game import (
    FiniteGame,
    StrategyProfile,
    expected_payoff,
    make_builtin,
    payoff_block,
    stacked_payoff,
)
from .mirror import (
    RegularizerBundle,
    choice_map,
    choice_map_jacobian,
    eta_fields,
    make_regularizer,
    mirror_inverse,
    project_H,
)
from .reachability import (
    MonotoneWitness,
    PointCloud,
    attainable_cloud,
    coverage,
    monotone_witness,
    witness_monotonicity,
)
from .specfile import dump_spec, parse_spec
from .steering import SteeringPlan, greedy_steer_multi, plan_two_player, verify_plan

__version__ = "0.1.0"
