"""Mean-field linear-quadratic social control toolkit.

Solves the backward Riccati system and the discounted algebraic Riccati
equations of mean-field LQ social control, certifies uniform stabilization,
synthesizes decentralized control laws, and verifies asymptotic social
optimality by N-agent Monte Carlo simulation.
"""

from . import control, cost, diagnostics, meanfield, model, riccati, simulator
from .control import (
    ControlLaw,
    centralized_law_finite,
    decentralized_law_finite,
    decentralized_law_infinite,
    legacy_law,
    representation_check,
)
from .cost import (
    analytic_social_cost,
    asymptotic_average_optimum,
    q_finite,
    q_infinite,
)
from .diagnostics import (
    hamiltonian_matrices,
    imaginary_axis_free,
    pbh_observable,
    pbh_stabilizable,
    stabilization_report,
)
from .meanfield import (
    MeanFieldPath,
    check_rho_integrable,
    solve_mean_field_path,
    solve_offset_finite,
    solve_offset_infinite,
)
from .model import (
    DerivedWeights,
    ProblemData,
    Signal,
    build_problem,
    derived_weights,
    signal_eval,
)
from .riccati import (
    AlgebraicSolution,
    FiniteRiccatiPath,
    are_residual,
    classify_solution,
    solve_are,
    solve_dre,
)
from .scenario import Scenario, parse_scenario, serialize_scenario
from .simulator import (
    SimulationConfig,
    SimulationResult,
    consistency_error,
    gap_epsilon,
    simulate,
    social_cost_mc,
)

__version__ = "0.1.0"
