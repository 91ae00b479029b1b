"""Object-centered pick/place planning domains and signal-to-symbol grounding."""

from .model import (
    AIR,
    HAND,
    Atom,
    GroundAction,
    OperatorSchema,
    PhysicalObjectState,
    Plan,
    SymbolicState,
    atom,
    make_sample,
    opposite,
)
from .domains import DomainStyle, build_domain, build_o2o, check_consistency, encode_scenario, stack_goal
from .pddl import DomainFile, PddlError, ProblemFile, parse_domain, parse_problem, print_domain, print_problem
from .planner import GroundedTask, SolveResult, applicable, apply, ground, solve, validate_plan
from .simworld import GeometryConfig, Scenario, extract_relations, generate_scenario, label_oracle
from .grounding import (
    Estimate,
    EstimatorParams,
    KdeDensity,
    MixtureDensity,
    PredicateModel,
    abstraction_step,
    classify,
    default_params,
    estimate_counts,
    kde_estimate,
    probability,
    update,
)

__version__ = "0.1.0"
