"""Search cost for nearly optimal paths in a Bernoulli-labelled binary tree.

Submodules:

* ``tree_oracle`` -- seeded lazy tree, labels and the query ledger
* ``rates`` -- entropy/rate functions, critical slope, explicit bounds
* ``survival`` -- barrier survival probabilities (DP, Monte Carlo, recursions)
* ``search`` -- IDFS, greedy look-ahead and lower-bound bookkeeping
* ``experiments``, ``report``, ``plot``, ``verify``, ``cli`` -- the harness
"""
from .rates import critical_slope, entropy_rate, kappa, lambda_star, p_crit
from .search import SearchOutcome, greedy_lookahead, idfs, red_blue_color, t33_budget, t34_budget
from .survival import gw_allones_survival, periodic_gw_survival, rho_dp, rho_mc
from .tree_oracle import LabelOracle, QueryLedger, VertexId, derive_trial_oracle

__version__ = "0.1.0"

__all__ = [
    "LabelOracle", "QueryLedger", "SearchOutcome", "VertexId", "critical_slope", "derive_trial_oracle",
    "entropy_rate", "greedy_lookahead", "gw_allones_survival", "idfs", "kappa", "lambda_star", "p_crit",
    "periodic_gw_survival", "red_blue_color", "rho_dp", "rho_mc", "t33_budget", "t34_budget",
]
