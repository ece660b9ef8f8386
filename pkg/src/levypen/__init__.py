"""Local-time penalization of recurrent one-dimensional Lévy processes.

Numerics (resolvent density, ``h``-functions, hitting probabilities,
penalization martingales) and a Monte Carlo engine to check them.
"""

__version__ = "0.1.0"

from .models import LevyModel, make_model, psi, check_condition_A  # noqa: E402
from .quadrature import QuadratureConfig  # noqa: E402
from .resolvent import HFunctionEvaluator, resolvent_density  # noqa: E402
from .hitting import (PointSet, HitOrderVector, hitting_laplace, two_point_hit_prob,  # noqa: E402
                      hit_order_probs, excursion_rate_one, excursion_rate_two, excursion_hit_split)
from .penalization import (PenalizationProblem, PenalizationSolution, PhiFunction,  # noqa: E402
                           J_matrix, I_vector, I_vector_zero_excursion, phi, phi_base,
                           phi_two_point_closed, martingale_density, final_local_time_law,
                           finite_hitting_expectation, unweighted_consistency, solve)
