"""Mini-batch optimal, unbalanced and partial transport."""

__version__ = "0.1.0"

from .apps import FlowTrajectory, ImageRGB, IterationError, batch_cost_gradient, color_transfer, gradient_flow
from .core import (
    CostMatrix,
    DiscreteMeasure,
    SolverParams,
    TransportPlan,
    build_cost,
    plan_cost,
    solve_ot_entropic,
    solve_ot_exact,
    wasserstein2,
)
from .diagnostics import (
    ConcentrationReport,
    MappingCensus,
    brute_force_plan,
    census_experiment,
    concentration_plan_experiment,
    concentration_value_experiment,
    mapping_census,
    reference_plan,
)
from .errors import (
    InvalidInputError,
    ResourceLimitError,
    SolverFailureError,
    TransportError,
    UnsupportedInstanceError,
)
from .minibatch import (
    AggregatedResult,
    Alignment,
    BatchSpec,
    SolverKind,
    full_mb_pot,
    full_mb_transport,
    mb_transport,
    sample_batches,
    two_stage_align,
)
from .partial import PartialParams, extend_with_dummy, solve_pot_entropic, solve_pot_exact
from .unbalanced import UotParams, kl_divergence, solve_uot_entropic, uot_objective
