"""Online learning with temporal feedback graphs.

Build a graph with :mod:`temporal_feedback.graph`, bracket its minimax regret
with :mod:`temporal_feedback.programs` (or :mod:`temporal_feedback.transitive`
for transitive graphs), and play learners against adversaries with
:mod:`temporal_feedback.harness`.
"""

from .errors import (
    ContractViolationError,
    DegenerateOptimumError,
    EnumerationLimitError,
    FeedbackGraphError,
    GraphFormatError,
    InfeasibleError,
    InvalidArgumentError,
    NotTransitiveError,
    SolverError,
)
from .graph import (
    TemporalFeedbackGraph,
    enumerate_independent_sets,
    enumerate_maximal_orders,
    make_batched,
    make_bounded_recall,
    make_delayed,
    make_empty,
    make_full_information,
)
from .programs import solve_ilb, solve_lb, solve_ub_dual_enumerative, solve_ub_primal_enumerative
from .transitive import solve_ub_dual_transitive, solve_ub_primal_transitive

__version__ = "0.1.0"
