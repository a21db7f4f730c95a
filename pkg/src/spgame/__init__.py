"""Singularly perturbed zero-sum linear-quadratic stochastic differential games.

The package solves the generalised Riccati system of a slow-fast LQ game
at fixed ``eps``, its reduced (``eps = 0``) differential-algebraic
counterpart and the terminal boundary layer, and checks the first-order
asymptotics between them by ``eps`` sweeps and Monte Carlo simulation.
"""

from .asymptotics import (
    RateFit, TikhonovReport, corollary44_integrals, fit_rate, l2_feedback_gap, sweep,
    tikhonov_errors,
)
from .boundary import (
    BoundaryLayerSolution, attraction_check, default_tau_max, gamma_margin, h_map, phi_map,
    select_delta, solve_boundary_layer,
)
from .errors import (
    AssumptionFailed, BlowUp, ConditionFailed, Delta2Singular, EnvelopeViolated, GridMismatch,
    InsufficientPoints, KindMismatch, LambdaSingular, NoStabilizingSolution, NotScalar,
    PathBlowUp, SpecError, SpGameError, StepLimitExceeded, StepTooLarge,
)
from .game import (
    FeedbackLaw, SaddleReport, SimBatch, ValueReport, approx_gap, closed_form_value,
    limiting_value, make_feedback, mc_objective, saddle_check, simulate_game, value_report,
)
from .integrate import ToleranceConfig
from .model import (
    CompactSystem, DeltaBlocks, GameSpec, assemble_compact, delta_blocks, fixture_s1,
    load_spec, make_spec, validate_spec,
)
from .reduced import (
    ReducedSolution, p12_bar, reduced_coefficients, solve_reduced, solve_reduced_are,
    solve_reduced_dre, verify_reduced_system,
)
from .riccati import RiccatiSolution, assemble_P, full_rhs, riccati_residual, solve_full
from .scalar import (
    ScalarConditions, scalar_are_roots, scalar_conditions, scalar_dre_oracle,
)

__version__ = "0.1.0"
