"""Equilibrium distributions of charitable contributions.

Agents with Leontief preferences split their contributions over charities; the
equilibrium distribution is the unique point where no agent wants to move her own
money, and it coincides with the Nash-welfare maximiser.
"""

from .analysis import brute_force_nash, is_efficient, is_equilibrium, lindahl_prices
from .dynamics import SequenceSpec, best_response, potential, run_redistribution, run_spending
from .exact import charity_egalitarian, conditional_egalitarian, extract_decomposition, snap_to_rational
from .kernels import BACKEND
from .model import (
    AgentSpec,
    EquilibriumResult,
    Profile,
    WelfareSpec,
    critical_set,
    g_welfare,
    leontief_utility,
    nash_welfare,
    utilities,
)
from .solver import SolveConfig, solve_cobb_douglas_equilibrium, solve_equilibrium

__all__ = [
    "AgentSpec",
    "BACKEND",
    "EquilibriumResult",
    "Profile",
    "SequenceSpec",
    "SolveConfig",
    "WelfareSpec",
    "best_response",
    "brute_force_nash",
    "charity_egalitarian",
    "conditional_egalitarian",
    "critical_set",
    "extract_decomposition",
    "g_welfare",
    "is_efficient",
    "is_equilibrium",
    "leontief_utility",
    "lindahl_prices",
    "nash_welfare",
    "potential",
    "run_redistribution",
    "run_spending",
    "snap_to_rational",
    "solve_cobb_douglas_equilibrium",
    "solve_equilibrium",
    "utilities",
]

__version__ = "0.1.0"
