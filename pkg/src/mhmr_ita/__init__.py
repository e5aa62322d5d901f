"""Initial task assignment for multi-human multi-robot surveillance teams.

Learned hierarchical allocators (options over a cross-attribute attention
representation), their ablations and a random baseline, a deterministic
mission simulator with a human performance model, and an evaluation
harness with Welch-test comparisons.
"""

from .allocators import ALLOCATOR_KINDS, build_allocator, random_allocation
from .context import (
    Difficulty,
    HumanProfile,
    ImageQuality,
    MultiAttributeContext,
    RobotKind,
    RobotProfile,
    ScenarioSpec,
    TaskSpec,
    Tier,
    encode_context,
    sample_context,
    tier_of,
)
from .harness import EvalReport, TrainConfig, compare, evaluate, train
from .policy import AllocationModel, ModelConfig, OptionHierarchy, PpoHyper, build_hierarchy
from .simulator import (
    AllocationDecision,
    MissionOutcome,
    difficulty_factor,
    effective_speed_and_quality,
    fatigue_factor,
    human_classification_prob,
    mission_reward,
    robot_classification_prob,
    simulate_mission,
    workload_factor,
)
from .stats import welch_t_test

__version__ = "0.1.0"
