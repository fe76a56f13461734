"""Search for nearly optimal depth-n paths, and the lower-bound bookkeeping.

The engines charge every label they read to the oracle's ledger, so
``SearchOutcome.queries`` is the search time.  The root is examined without a
charge: its label never enters a path sum.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .rates import critical_slope, search_slope
from .survival import KNIFE_EDGE, level_thresholds, rho_dp
from .tree_oracle import (
    AUDIT,
    CHILD_SALT,
    LabelOracle,
    VertexId,
    child_state_array,
    labels_from_states,
    mix64,
)

DEFAULT_BUDGET = 10**9

SUCCESS = "success"
EXHAUSTED = "exhausted"
BUDGET = "budget"


class BudgetExhausted(RuntimeError):
    """A depth-first segment ran out of query budget before finishing."""

    def __init__(self, outcome: SearchOutcome, frontier: list[VertexId]):
        super().__init__(f"query budget {outcome.budget} exhausted")
        self.outcome = outcome
        self.frontier = frontier


@dataclass
class SearchOutcome:
    success: bool
    witness: VertexId | None
    witness_sum: int | None
    queries: int
    restarts: int
    budget: int
    target: int
    stop_reason: str = SUCCESS
    last_restart: VertexId | None = None
    examined_order: list[VertexId] | None = field(default=None, repr=False)

    def witness_labels(self, oracle: LabelOracle) -> list[int]:
        if self.witness is None:
            raise ValueError("no witness")
        return oracle.path_labels(self.witness, AUDIT)


def success_threshold(c: float, eps: float, n: int) -> int:
    return math.ceil((c - eps) * n - KNIFE_EDGE)


class _Engine:
    """Shared state for lexicographic depth-first segments on one oracle.

    Pending vertices are tuples ``(depth, bits, parent_node, parent_state,
    parent_sum)``; they hold everything needed to examine the vertex later.
    """

    def __init__(self, oracle: LabelOracle, slope: float, n: int, target: int,
                 budget: int, frontier_cap: int, record: bool):
        self.oracle = oracle
        self.ledger = oracle.ledger
        self.rel_t = level_thresholds(slope, n)
        self.n = n
        self.target = target
        self.budget = budget
        self.frontier_cap = min(frontier_cap, n)
        self.record: list[VertexId] | None = [] if record else None
        self.pruned: list[tuple] = []
        self.witness: tuple[int, int, int] | None = None  # (depth, bits, sum)

    def examine(self, item: tuple) -> tuple[int, int, int] | None:
        """Charge a pending vertex; returns (node, state, S) or None when over budget."""
        depth, bits, pnode, pstate, psum = item
        led = self.ledger
        bit = bits & 1
        node = led.child_node(pnode, bit)
        if not led._charged[node]:
            if led.count >= self.budget:
                return None
            led._charged[node] = 1
            led.count += 1
        st = mix64(pstate ^ CHILD_SALT[bit])
        if self.record is not None:
            self.record.append(VertexId(depth, bits))
        return node, st, psum + (1 if (st >> 11) < self.oracle.threshold else 0)

    def segment(self, depth0: int, bits0: int, node0: int, state0: int, sum0: int) -> str:
        """Depth-first search of W(start) below an already examined start vertex."""
        n = self.n
        if depth0 == n:
            if sum0 >= self.target:
                self.witness = (depth0, bits0, sum0)
                return SUCCESS
            return EXHAUSTED
        t = self.rel_t
        target = self.target
        cap = self.frontier_cap
        pruned = self.pruned
        led = self.ledger
        charged = led._charged
        budget = self.budget
        thr = self.oracle.threshold
        salt0, salt1 = CHILD_SALT
        rec = self.record
        b0 = bits0 << 1
        stack = [(depth0 + 1, b0 | 1, node0, state0, sum0), (depth0 + 1, b0, node0, state0, sum0)]
        pop, push = stack.pop, stack.append
        while stack:
            item = pop()
            depth, bits, pnode, pstate, psum = item
            # examine: inlined copy of _Engine.examine for speed
            if bits & 1:
                node = led.child_node(pnode, 1)
                st = mix64(pstate ^ salt1)
            else:
                node = led.child_node(pnode, 0)
                st = mix64(pstate ^ salt0)
            if not charged[node]:
                if led.count >= budget:
                    return BUDGET
                charged[node] = 1
                led.count += 1
            if rec is not None:
                rec.append(VertexId(depth, bits))
            s = psum + 1 if (st >> 11) < thr else psum
            if s - sum0 < t[depth - depth0]:
                if depth < cap:
                    cb = bits << 1
                    pruned.append((depth + 1, cb, node, st, s))
                    pruned.append((depth + 1, cb | 1, node, st, s))
                continue
            if depth == n:
                if s >= target:
                    self.witness = (depth, bits, s)
                    return SUCCESS
                continue
            cb = bits << 1
            push((depth + 1, cb | 1, node, st, s))
            push((depth + 1, cb, node, st, s))
        return EXHAUSTED


def _outcome(eng: _Engine, status: str, restarts: int, last_restart: VertexId | None) -> SearchOutcome:
    w = eng.witness
    return SearchOutcome(
        success=status == SUCCESS,
        witness=VertexId(w[0], w[1]) if w else None,
        witness_sum=w[2] if w else None,
        queries=eng.ledger.count,
        restarts=restarts,
        budget=eng.budget,
        target=eng.target,
        stop_reason=status,
        last_restart=last_restart,
        examined_order=eng.record,
    )


def dfs_w(
    oracle: LabelOracle,
    start: VertexId,
    slope: float,
    n_global: int,
    success_threshold: int,
    budget: int = DEFAULT_BUDGET,
    record: bool = False,
) -> tuple[SearchOutcome, list[VertexId]]:
    """One depth-first search of W(start), truncated at global depth ``n_global``.

    Vertices are examined in lexicographic order; a vertex z is expanded only
    while S(z) - S(start) stays on or above the relative barrier.  Depth-n
    vertices succeed when S(z) >= ``success_threshold``.  Returns the outcome
    and the unexamined children of pruned vertices (restart candidates).
    Raises :class:`BudgetExhausted` if the budget runs out first.
    """
    if start.depth >= n_global:
        raise ValueError("start must lie above the target depth")
    eng = _Engine(oracle, slope, n_global, success_threshold, budget, n_global, record)
    if start.depth == 0:
        sum0 = 0
    else:
        if oracle.ledger.count >= budget and start not in oracle.ledger:
            raise BudgetExhausted(_outcome(eng, BUDGET, 0, start), [])
        sum0 = oracle.path_sum(start)
        if record:
            eng.record.append(start)
    status = eng.segment(start.depth, start.bits, oracle.ledger.node_for(start), oracle.state(start), sum0)
    frontier = [VertexId(d, b) for d, b, *_ in eng.pruned]
    out = _outcome(eng, status, 0, start)
    if status == BUDGET:
        raise BudgetExhausted(out, frontier)
    return out, frontier


def idfs(
    oracle: LabelOracle,
    eps: float,
    r: float,
    n: int,
    budget: int = DEFAULT_BUDGET,
    record: bool = False,
    c: float | None = None,
) -> SearchOutcome:
    """Iterated depth-first search IDFS(r*eps) for a depth-n vertex with S >= (c - eps) n.

    Each segment searches W_{r eps}(v) from a restart vertex v; when a segment
    exhausts its subtree the search restarts at the leftmost unexamined vertex
    of minimal depth.  The oracle's ledger should be fresh.

    The restart queue only keeps vertices of depth <= log2(budget + 1): the
    minimal unexamined depth can never exceed that before the budget is spent.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    if c is None:
        c = search_slope(oracle.p)
    target = success_threshold(c, eps, n)
    cap = int(math.floor(math.log2(budget + 1)))
    eng = _Engine(oracle, c - r * eps, n, target, budget, cap, record)
    led = oracle.ledger

    status = eng.segment(0, 0, 0, oracle.root_state, 0)
    restarts = 0
    last = VertexId.root()
    frontier: list[tuple] = []
    while status == EXHAUSTED:
        for item in eng.pruned:
            heapq.heappush(frontier, item)
        eng.pruned.clear()
        while frontier:
            item = heapq.heappop(frontier)
            node = led.find_child(item[2], item[1] & 1)
            if node < 0 or not led.node_charged(node):
                break
        else:
            break
        examined = eng.examine(item)
        if examined is None:
            status = BUDGET
            break
        node, st, s = examined
        restarts += 1
        last = VertexId(item[0], item[1])
        status = eng.segment(item[0], item[1], node, st, s)
    return _outcome(eng, status, restarts, last)


def greedy_lookahead(
    oracle: LabelOracle,
    lookahead_depth: int,
    n: int,
    eps: float | None = None,
    c: float | None = None,
) -> SearchOutcome:
    """Walk down by exhaustively scoring the depth-d subtree below the current vertex.

    At every step the walk moves to the child starting the best depth-d path
    (ties broken lexicographically).  Without ``eps`` any depth-n endpoint
    counts as success; with it the usual (c - eps) n threshold applies.
    """
    d = lookahead_depth
    if d < 1:
        raise ValueError("lookahead depth must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if c is None:
        c = search_slope(oracle.p)
    target = success_threshold(c, eps, n) if eps is not None else 0
    led = oracle.ledger
    p = oracle.p

    def grow(states, sums, nodes):
        child_states = child_state_array(np.repeat(states, 2), np.tile([0, 1], len(states)))
        child_sums = np.repeat(sums, 2) + labels_from_states(child_states, p)
        child_nodes = []
        for pn in nodes:
            for bit in (0, 1):
                node = led.child_node(pn, bit)
                led.charge_node(node)
                child_nodes.append(node)
        return child_states, child_sums, child_nodes

    # levels[k-1] describes the subtree level k below the current vertex, indexed MSB-first
    levels = []
    cur = (np.array([oracle.root_state], dtype=np.uint64), np.zeros(1, dtype=np.int64), [0])
    for _ in range(min(d, n)):
        cur = grow(*cur)
        levels.append(cur)
    depth, bits, total = 0, 0, 0
    while depth < n:
        horizon = min(d, n - depth)
        best = int(np.argmax(levels[horizon - 1][1]))  # first maximum is the lexicographically least
        bit = best >> (horizon - 1)
        top_states, top_sums, top_nodes = levels[0]
        here = (top_states[bit: bit + 1], top_sums[bit: bit + 1], [top_nodes[bit]])
        depth += 1
        bits = (bits << 1) | bit
        total = int(top_sums[bit])
        levels = [
            (st[bit << k: (bit + 1) << k], sm[bit << k: (bit + 1) << k], nd[bit << k: (bit + 1) << k])
            for k, (st, sm, nd) in enumerate(levels[1:], start=1)
        ]
        if len(levels) < min(d, n - depth):
            levels.append(grow(*(levels[-1] if levels else here)))
    witness = VertexId(depth, bits)
    return SearchOutcome(
        success=total >= target,
        witness=witness,
        witness_sum=total,
        queries=led.count,
        restarts=0,
        budget=n * ((1 << (d + 1)) - 2),
        target=target,
        stop_reason=SUCCESS if total >= target else EXHAUSTED,
    )


# -- lower-bound bookkeeping ------------------------------------------------

def _longest_ones_chain(oracle: LabelOracle, state: int, limit: int) -> int:
    """Length (<= limit) of the longest all-ones descending path strictly below a vertex."""
    best = 0
    stack = [(state, 0)]
    thr = oracle.threshold
    while stack and best < limit:
        st, k = stack.pop()
        for salt in CHILD_SALT:
            cs = mix64(st ^ salt)
            if (cs >> 11) < thr:
                if k + 1 > best:
                    best = k + 1
                if k + 1 < limit:
                    stack.append((cs, k + 1))
    return best


def audit_good_sets(oracle: LabelOracle, examined_order: list[VertexId], b: int) -> list[int]:
    """Sizes |A(t)| of the first-discovery sets of vertices heading an all-ones run of length b.

    x is in A(t) when x is v(t) or one of its b-1 nearest ancestors, a descending
    path of b ones starts at x and passes through v(t), and x was not counted
    earlier.  All label reads are audit-mode.  The root is never a candidate;
    its label is not part of any path sum.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    thr = oracle.threshold
    cache: dict[VertexId, int] = {VertexId.root(): oracle.root_state}
    marked: set[VertexId] = set()
    sizes = []

    def state_of(v: VertexId) -> int:
        st = cache.get(v)
        if st is None:
            par = cache.get(v.parent()) if v.depth else None
            st = mix64(par ^ CHILD_SALT[v.bits & 1]) if par is not None else oracle.state(v)
            cache[v] = st
        return st

    for v in examined_order:
        st = state_of(v)
        if v.depth == 0 or (st >> 11) >= thr:
            sizes.append(0)
            continue
        below = _longest_ones_chain(oracle, st, b - 1)
        count = 0
        for j in range(min(b, v.depth)):
            y = v.ancestor(j)
            if j and (state_of(y) >> 11) >= thr:
                break
            if b - 1 - j <= below and y not in marked:
                marked.add(y)
                count += 1
        sizes.append(count)
    return sizes


def snap_eps(eps: float) -> tuple[int, float]:
    """Block length b = round(eps^-3/2) and the matching eps = b^-2/3."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    b = max(1, round(eps ** -1.5))
    snapped = b ** (-2.0 / 3.0)
    if abs(snapped - eps) < 1e-12:
        snapped = eps
    return b, snapped


@dataclass
class ColoringReport:
    tau: list[int]
    segment_colors: list[str]
    good_count: int
    b: int
    eps: float
    snapped: bool


def red_blue_color(labels, p: float, s: float, eps: float) -> ColoringReport:
    """Split a labelled path into runs that dip under slope c(p) - s*eps and full-length blue blocks.

    tau_{j+1} = tau_j + k for the least k < b whose partial sum falls to or
    below the slope line started at tau_j, else tau_j + b.  A segment is red
    when it ends early before n, blue otherwise; blue segments of full length
    starting at or before n - b are counted as good.
    """
    if not s > 1:
        raise ValueError("s must exceed 1")
    x = [int(v) for v in labels]
    n = len(x)
    b, e = snap_eps(eps)
    slope = critical_slope(p) - s * e
    prefix = [0]
    for v in x:
        prefix.append(prefix[-1] + v)
    tau = [0]
    colors: list[str] = []
    good = 0
    while tau[-1] < n:
        t0 = tau[-1]
        nxt = t0 + b
        for k in range(1, min(b - 1, n - t0) + 1):
            if prefix[t0 + k] - prefix[t0] <= k * slope + KNIFE_EDGE:
                nxt = t0 + k
                break
        red = nxt < n and nxt < t0 + b
        colors.append("red" if red else "blue")
        if not red and nxt == t0 + b and t0 <= n - b:
            good += 1
        tau.append(nxt)
    return ColoringReport(tau, colors, good, b, e, e != eps)


def coloring_lower_bound(p: float, s: float, eps: float, n: int) -> int:
    """floor((s-1)/(2(1-c)) n eps^(5/2)): guaranteed good blocks on a (c - eps)n path, p < 1/2."""
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    if not s > 1:
        raise ValueError("s must exceed 1")
    return math.floor((s - 1) / (2 * (1 - critical_slope(p))) * n * eps ** 2.5)


def t33_budget(eps: float, n: int, kappa_param: float) -> int:
    """floor(kappa n / eps): the query horizon in the p = 1/2 lower bound."""
    if not 0 < kappa_param < 0.5:
        raise ValueError("kappa must lie in (0, 1/2)")
    if eps <= 0 or n < 1:
        raise ValueError("need eps > 0 and n >= 1")
    return math.floor(kappa_param * n / eps)


def t34_budget(p: float, s: float, eps: float, n: int) -> float:
    """(s-1)/(4(1-c)) eps^(11/2) n / rho(p; s eps, ceil(eps^-3/2))."""
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    if not s > 1:
        raise ValueError("s must exceed 1")
    c = critical_slope(p)
    if not c - s * eps > p:
        raise ValueError("eps too large: need c(p) - s*eps > p")
    depth = math.ceil(eps ** -1.5 - KNIFE_EDGE)
    rho = rho_dp(p, s * eps, depth).value
    if rho == 0.0:
        raise ZeroDivisionError("survival probability underflowed to 0")
    return (s - 1) / (4 * (1 - c)) * eps ** 5.5 * n / rho
