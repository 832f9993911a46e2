"""Two-tier peering market: equilibrium solver, sensitivities and optimal pricing."""

from peerflow.config import RunConfig
from peerflow.equilibrium import Equilibrium, SolverSettings, solve_equilibrium
from peerflow.market import MarketModel, Strategy
from peerflow.objectives import evaluate, profit, welfare
from peerflow.optimize import Regime, check_conditions, maximize_profit, maximize_welfare, maximize_welfare_constrained

__all__ = [
    "Equilibrium", "MarketModel", "Regime", "RunConfig", "SolverSettings", "Strategy",
    "check_conditions", "evaluate", "maximize_profit", "maximize_welfare", "maximize_welfare_constrained",
    "profit", "solve_equilibrium", "welfare",
]
