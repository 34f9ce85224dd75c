"""Robin function, critical parameter and single-bubble ansatz for -Laplace + lambda in 3D."""
from ._backend import BACKEND
from .bubble_energy import (BubbleAnsatz, build_ansatz, constants, constants_by_quadrature,
                            d0_closed_form, d0_solve, energy, energy_model, expansion_check,
                            pi_expansion_check)
from .critical import (bubble_prediction, lambda_star, lambda_star_ball, reduced_energy_profile,
                       verify_hypotheses)
from .domain import Ball, StarShaped, from_config
from .errors import (BracketError, ConfigError, ConstructionError, DomainError,
                     InvariantViolation, RobinBubbleError)
from .field_solver import HelmholtzField, NeumannSolver, build_solver, solve_neumann
from .kernels import BubbleParams, bubble_w, diag_limit, laplace_gamma, yukawa_phi
from .robin import RobinEvaluator, ball_robin, g_ball_analytic, sup_g

__version__ = "0.1.0"
