"""Survival probabilities of the branching random walk above a linear barrier.

rho(p; eps, n) is the probability that some length-n path from the root keeps
S(v_j) >= (c(p) - eps) j at every level.  It is computed exactly by a dynamic
program over (level, partial sum), estimated by Monte Carlo on seeded trees,
and, at p = 1/2, bracketed through generating-function recursions.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rates import search_slope
from .tree_oracle import (
    AUDIT,
    CHARGED,
    CHILD_SALT,
    LabelOracle,
    VertexId,
    derive_trial_oracle,
    mix64,
)

KNIFE_EDGE = 1e-9
RHO_DP_MAX_N = 10_000


class ConvergenceError(ArithmeticError):
    def __init__(self, msg: str, iterations: int):
        super().__init__(f"{msg} after {iterations} iterations")
        self.iterations = iterations


def level_thresholds(slope: float, n: int) -> list[int]:
    """Integer cut-offs t_k = ceil(slope*k - 1e-9): a sum j at level k survives iff j >= t_k."""
    return [math.ceil(slope * k - KNIFE_EDGE) for k in range(n + 1)]


@dataclass(frozen=True)
class Barrier:
    p: float
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be non-negative")

    @property
    def c(self) -> float:
        return search_slope(self.p)

    @property
    def slope(self) -> float:
        return self.c - self.eps

    def thresholds(self, n: int) -> list[int]:
        return level_thresholds(self.slope, n)


@dataclass(frozen=True)
class SurvivalEstimate:
    value: float
    method: str
    trials: int = 0
    stderr: float = 0.0

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> SurvivalEstimate:
        v = successes / trials
        return cls(v, "mc", trials, math.sqrt(v * (1.0 - v) / trials))


def rho_dp(p: float, eps: float, n: int) -> SurvivalEstimate:
    """Exact rho(p; eps, n) by backward induction over (level k, sum j)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if not 0 <= n <= RHO_DP_MAX_N:
        raise ValueError(f"n must lie in [0, {RHO_DP_MAX_N}], got {n}")
    t = Barrier(p, eps).thresholds(n)
    g = np.ones(n + 1)
    g[: max(0, min(t[n], n + 1))] = 0.0
    for k in range(n - 1, -1, -1):
        # g currently holds level k+1, indexed by j = 0..k+1
        q = p * g[1 : k + 2] + (1.0 - p) * g[: k + 1]
        g = q * (2.0 - q)  # 1 - (1 - q)^2 without cancellation
        g[: max(0, min(t[k], k + 1))] = 0.0
    return SurvivalEstimate(float(g[0]), "dp")


def barrier_witness(
    oracle: LabelOracle,
    start: VertexId,
    slope: float,
    depth: int,
    mode: str = CHARGED,
) -> list[int] | None:
    """Lexicographically least relative path of length ``depth`` below ``start``
    whose every prefix z has S(z) - S(start) >= t_{|z| - |start|}, or None.

    Search is depth-first in lexicographic order, pruning at the first level a
    partial path drops below the barrier.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth == 0:
        return []
    if mode not in (CHARGED, AUDIT):
        raise ValueError(f"unknown mode {mode!r}")
    t = level_thresholds(slope, depth)
    thr = oracle.threshold
    salt0, salt1 = CHILD_SALT
    charged = mode == CHARGED
    if charged:
        led = oracle.ledger
        start_node = led.node_for(start)
    else:
        led = None
        start_node = -1
    path: list[int] = []
    # entries: (relative depth, bit, parent's relative sum, parent's ledger node);
    # states[i] holds the state of the current path vertex at relative depth i
    stack = [(1, 1, 0, start_node), (1, 0, 0, start_node)]
    states = [oracle.state(start)]
    while stack:
        k, bit, rel_parent, pnode = stack.pop()
        del path[k - 1 :]
        del states[k:]
        st = mix64(states[k - 1] ^ (salt1 if bit else salt0))
        rel = rel_parent + (1 if (st >> 11) < thr else 0)
        if charged:
            node = led.child_node(pnode, bit)
            led.charge_node(node)
        else:
            node = -1
        if rel < t[k]:
            continue
        path.append(bit)
        if k == depth:
            return path
        states.append(st)
        stack.append((k + 1, 1, rel, node))
        stack.append((k + 1, 0, rel, node))
    return None


def _mc_chunk(args) -> int:
    p, slope, n, seed, lo, hi = args
    root = VertexId.root()
    hits = 0
    for k in range(lo, hi):
        oracle = derive_trial_oracle(seed, k, p)
        if barrier_witness(oracle, root, slope, n, AUDIT) is not None:
            hits += 1
    return hits


def rho_mc(
    p: float,
    eps: float,
    n: int,
    trials: int,
    master_seed: int,
    jobs: int = 1,
) -> SurvivalEstimate:
    """Fraction of independent seeded trees that contain a surviving length-n path."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    slope = Barrier(p, eps).slope
    if jobs <= 1:
        hits = _mc_chunk((p, slope, n, master_seed, 0, trials))
    else:
        step = -(-trials // (4 * jobs))
        chunks = [(p, slope, n, master_seed, lo, min(trials, lo + step)) for lo in range(0, trials, step)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            hits = sum(ex.map(_mc_chunk, chunks))
    return SurvivalEstimate.from_counts(hits, trials)


def _allones_step(s: float) -> float:
    # 1 - f(1 - s) with f(z) = ((1 + z) / 2)^2, expanded to avoid cancellation
    return s - 0.25 * s * s


def _doubling_step(s: float) -> float:
    # 1 - f(1 - s) with f(z) = z^2
    return s * (2.0 - s)


def gw_allones_survival(n: int) -> float:
    """P(some all-ones path of length n) at p = 1/2, i.e. rho(1/2; 0, n).

    The all-ones vertices form a critical Galton-Watson tree with Binomial(2, 1/2)
    offspring; this iterates its survival recursion.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    s = 1.0
    for _ in range(n):
        s = _allones_step(s)
    return s


def periodic_gw_survival(n: int, tol: float = 1e-14, max_iter: int = 1_000_000) -> float:
    """Survival probability of the period-n process that forces ones except at multiples of n.

    Offspring generating function f1 = ((1+z)/2)^2 on transitions into levels
    not divisible by n and f2 = z^2 into levels divisible by n.  The per-period
    map on survival probabilities is applied from s = 1 and decreases
    monotonically to the survival probability, which lower-bounds
    rho(1/2; 1/n, infinity).
    """
    if n < 2:
        raise ValueError("period must be >= 2")
    s = 1.0
    for it in range(1, max_iter + 1):
        nxt = _doubling_step(s)
        for _ in range(n - 1):
            nxt = _allones_step(nxt)
        if abs(nxt - s) <= tol:
            return nxt
        s = nxt
    raise ConvergenceError("periodic survival iteration did not converge", max_iter)


def reciprocal_period(eps: float, tol: float = 1e-9) -> int:
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = round(1.0 / eps)
    if m < 2 or abs(m * eps - 1.0) > tol:
        raise ValueError(f"eps={eps} is not 1/m for an integer m >= 2")
    return m


def rho_infinity_bracket(eps: float) -> tuple[float, float]:
    """(lower, upper) bounds on rho(1/2; eps, infinity) for eps = 1/m."""
    m = reciprocal_period(eps)
    return periodic_gw_survival(m), gw_allones_survival(m - 1)


def rho_gf(p: float, eps: float, n: int) -> SurvivalEstimate:
    """Generating-function route, available at p = 1/2 only.

    eps = 0 gives rho(1/2; 0, n) exactly; eps = 1/m gives the periodic lower
    bound on rho(1/2; eps, infinity), which lower-bounds every finite n.
    """
    if p != 0.5:
        raise ValueError("the generating-function method requires p = 1/2")
    if eps == 0:
        return SurvivalEstimate(gw_allones_survival(n), "gf")
    return SurvivalEstimate(periodic_gw_survival(reciprocal_period(eps)), "gf")
