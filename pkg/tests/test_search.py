from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsl import search as sr
from bsl.rates import critical_slope, search_slope
from bsl.survival import level_thresholds
from bsl.tree_oracle import AUDIT, LabelOracle, VertexId, derive_trial_oracle, lex_compare


# -- naive reference implementations (explicit vertex sets, audit reads) -----

class _Stop(Exception):
    pass


def ref_idfs(oracle, eps, r, n, budget):
    c = search_slope(oracle.p)
    t = level_thresholds(c - r * eps, n)
    target = math.ceil((c - eps) * n - 1e-9)
    S = lambda v: oracle.path_sum(v, AUDIT)  # noqa: E731
    root = VertexId.root()
    order, seen = [], {root}
    frontier = {root.child(0), root.child(1)}  # unexamined children of examined vertices

    def examine(v):
        assert v not in seen
        if len(order) >= budget:
            raise _Stop
        seen.add(v)
        frontier.discard(v)
        order.append(v)
        if v.depth < n:
            frontier.update((v.child(0), v.child(1)))

    def segment(v):
        if v.depth == n:
            return v if S(v) >= target else None
        base = S(v)
        stack = [v.child(1), v.child(0)]
        while stack:
            z = stack.pop()
            examine(z)
            if S(z) - base < t[z.depth - v.depth]:
                continue
            if z.depth == n:
                if S(z) >= target:
                    return z
                continue
            stack += [z.child(1), z.child(0)]
        return None

    found = None
    try:
        found = segment(root)
        while found is None and frontier:
            v = min(frontier, key=lambda w: (w.depth, w.bits))
            examine(v)
            found = segment(v)
    except _Stop:
        pass
    return found, order


def ref_greedy(oracle, d, n):
    v = VertexId.root()
    while v.depth < n:
        h = min(d, n - v.depth)
        best, best_path = -1, None
        for k in range(1 << h):  # increasing k = lexicographic order
            w = v.extend([(k >> (h - 1 - i)) & 1 for i in range(h)])
            s = oracle.path_sum(w, AUDIT)
            if s > best:
                best, best_path = s, w
        v = v.child(best_path.bit(v.depth))
    return v


# -- dfs_w --------------------------------------------------------------------

def test_dfs_w_all_ones_oracle():
    o = LabelOracle(1, 1.0)
    out, frontier = sr.dfs_w(o, VertexId.root(), 1.0, 12, 12)
    assert out.success and str(out.witness) == "0" * 12 and out.queries == 12
    assert frontier == []


def test_dfs_w_all_zeros_oracle():
    o = LabelOracle(1, 0.0)
    out, frontier = sr.dfs_w(o, VertexId.root(), 0.5, 12, 6)
    assert not out.success and out.stop_reason == sr.EXHAUSTED and out.queries == 2
    assert [str(v) for v in frontier] == ["00", "01", "10", "11"]
    o2 = LabelOracle(1, 0.0)
    out2, _ = sr.dfs_w(o2, VertexId.from_str("1"), 0.5, 12, 6)
    assert out2.queries == 3  # both children plus the start vertex


@pytest.mark.parametrize("seed", range(8))
def test_dfs_w_order_matches_enumeration(seed):
    n, slope = 8, 0.9
    o = LabelOracle(seed, 0.5)
    t = level_thresholds(slope, n)
    # a vertex is examined iff every proper non-root ancestor passed the barrier
    expected = []
    for d in range(1, n + 1):
        for b in range(1 << d):
            v = VertexId(d, b)
            labels = o.path_labels(v, AUDIT)
            if all(sum(labels[:k]) >= t[k] for k in range(1, d)):
                expected.append(v)
    expected.sort(key=str)  # preorder = string order with prefixes first
    out, _ = sr.dfs_w(o, VertexId.root(), slope, n, n + 1, record=True)
    assert not out.success
    assert out.examined_order == expected
    assert out.queries == len(expected)


def test_dfs_w_budget_exhaustion_is_distinct():
    o = LabelOracle(3, 0.5)
    with pytest.raises(sr.BudgetExhausted) as ei:
        sr.dfs_w(o, VertexId.root(), 0.9, 40, 40, budget=25)
    assert ei.value.outcome.stop_reason == sr.BUDGET
    assert ei.value.outcome.queries == 25


# -- idfs ---------------------------------------------------------------------

def test_idfs_all_ones_oracle():
    for eps in (0.01, 0.3):
        out = sr.idfs(LabelOracle(5, 1.0), eps, 0.5, 40)
        assert out.success and out.queries == 40 and out.restarts == 0


@pytest.mark.parametrize("p,eps,r,n,seed", [
    (0.5, 0.2, 0.5, 20, 0), (0.5, 0.2, 0.5, 20, 1), (0.5, 0.1, 0.5, 16, 2),
    (0.5, 0.3, 0.8, 24, 3), (0.3, 0.15, 0.5, 18, 4), (0.3, 0.1, 0.3, 14, 5),
])
def test_idfs_matches_naive_reference(p, eps, r, n, seed):
    budget = 5000
    o = LabelOracle(seed, p)
    out = sr.idfs(o, eps, r, n, budget=budget, record=True)
    found, order = ref_idfs(LabelOracle(seed, p), eps, r, n, budget)
    assert out.examined_order == order
    assert out.success == (found is not None)
    if found is not None:
        assert out.witness == found


def test_idfs_invariants_on_recorded_runs():
    eps, r, n = 0.1, 0.5, 300
    for k in range(5):
        o = derive_trial_oracle(17, k, 0.5)
        out = sr.idfs(o, eps, r, n, record=True)
        order = out.examined_order
        assert out.success and out.witness.depth == n
        assert out.witness_sum == o.path_sum(out.witness, AUDIT) >= out.target
        assert len(order) == len(set(order)) == out.queries == o.ledger.count
        # within each segment the examined vertices increase lexicographically
        seg = []
        for v in order + [None]:
            if v is None or (seg and not seg[0].is_ancestor_of(v)):
                assert all(lex_compare(a, b) < 0 for a, b in zip(seg, seg[1:]))
                seg = [v]
            else:
                seg.append(v)
        # witness stays above the r*eps barrier below the last restart vertex
        v0 = out.last_restart
        rel = o.path_labels(out.witness, AUDIT)[v0.depth:]
        t = level_thresholds(1.0 - r * eps, n - v0.depth)
        assert all(sum(rel[:j]) >= t[j] for j in range(len(rel) + 1))


def test_idfs_deterministic():
    a = sr.idfs(LabelOracle(2024, 0.5), 0.1, 0.5, 500)
    b = sr.idfs(LabelOracle(2024, 0.5), 0.1, 0.5, 500)
    assert a == b


def test_idfs_budget():
    o = LabelOracle(8, 0.5)
    out = sr.idfs(o, 0.05, 0.5, 2000, budget=1000)
    assert not out.success and out.stop_reason == sr.BUDGET
    assert out.queries <= 1000


def test_idfs_validation():
    with pytest.raises(ValueError):
        sr.idfs(LabelOracle(1, 0.5), 0.0, 0.5, 10)
    with pytest.raises(ValueError):
        sr.idfs(LabelOracle(1, 0.5), 0.1, 1.0, 10)


def test_idfs_cost_scales_like_n_over_eps():
    ratios = []
    for eps in (0.1, 0.2):
        qs = [sr.idfs(derive_trial_oracle(5, k, 0.5), eps, 0.5, 1000).queries for k in range(10)]
        ratios.append(sum(qs) / len(qs) / (1000 / eps))
    assert max(ratios) / min(ratios) <= 3


# -- greedy -------------------------------------------------------------------

def test_greedy_all_ones():
    out = sr.greedy_lookahead(LabelOracle(1, 1.0), 1, 30)
    assert out.witness_sum == 30 and out.success


@pytest.mark.parametrize("d,n,seed", [(1, 10, 0), (2, 9, 1), (3, 12, 2), (4, 7, 3), (5, 5, 4)])
def test_greedy_matches_naive(d, n, seed):
    out = sr.greedy_lookahead(LabelOracle(seed, 0.5), d, n)
    assert out.witness == ref_greedy(LabelOracle(seed, 0.5), d, n)
    assert out.queries <= n * ((1 << (d + 1)) - 2)


@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_greedy_query_bound(d, n, seed):
    o = LabelOracle(seed, 0.3)
    out = sr.greedy_lookahead(o, d, n)
    assert out.queries == o.ledger.count <= n * ((1 << (d + 1)) - 2)
    assert out.witness_sum == o.path_sum(out.witness, AUDIT)


def test_more_lookahead_helps():
    n = 2000
    s2 = [sr.greedy_lookahead(derive_trial_oracle(77, k, 0.5), 2, n).witness_sum for k in range(4)]
    s8 = [sr.greedy_lookahead(derive_trial_oracle(77, k, 0.5), 8, n).witness_sum for k in range(4)]
    assert sum(s8) / 4 > sum(s2) / 4


# -- good-vertex accounting ------------------------------------------------------

def ref_good_sets(oracle, order, b):
    marked, sizes = set(), []
    X = lambda v: oracle.label(v, AUDIT)  # noqa: E731
    for v in order:
        count = 0
        for j in range(b):
            if j >= v.depth:
                break
            x = v.ancestor(j)
            if x in marked:
                continue
            # some path of b vertices starting at x, all labelled 1, through v
            ok = False
            for k in range(1 << (b - 1 - j)):
                tail = [(k >> i) & 1 for i in range(b - 1 - j)]
                w = v.extend(tail)
                path = [w.ancestor(i) for i in range(b)]
                if all(X(u) == 1 for u in path):
                    ok = True
                    break
            if ok:
                marked.add(x)
                count += 1
        sizes.append(count)
    return sizes


@pytest.mark.parametrize("seed,b", [(0, 3), (1, 4), (2, 5), (3, 2), (4, 1)])
def test_audit_good_sets_matches_reference(seed, b):
    o = LabelOracle(seed, 0.5)
    out = sr.idfs(o, 0.2, 0.5, 30, record=True)
    charged = o.ledger.count
    got = sr.audit_good_sets(o, out.examined_order, b)
    assert got == ref_good_sets(o, out.examined_order, b)
    assert o.ledger.count == charged  # audit reads are free


def test_audit_good_sets_zero_oracle():
    o = LabelOracle(4, 0.0)
    out = sr.idfs(o, 0.1, 0.5, 20, budget=500, record=True)
    assert set(sr.audit_good_sets(o, out.examined_order, 5)) == {0}


def test_audit_found_vertices_cover_half_the_depth():
    n, eps, b = 2000, 0.05, 10
    for k in range(12):
        o = derive_trial_oracle(31, k, 0.5)
        out = sr.idfs(o, eps, 0.5, n, record=True)
        assert out.success
        assert sum(sr.audit_good_sets(o, out.examined_order, b)) >= n / 2 - b


def test_audit_mean_found_per_query():
    n, eps, b = 1000, 0.05, 10
    total_found = total_time = 0
    for k in range(100):
        o = derive_trial_oracle(32, k, 0.5)
        out = sr.idfs(o, eps, 0.5, n, record=True)
        a = sr.audit_good_sets(o, out.examined_order, b)
        total_found += sum(a)
        total_time += len(a)
    assert total_found / total_time <= 4 * eps * 1.5


# -- red/blue coloring -----------------------------------------------------------

def ref_coloring(x, p, s, eps):
    """Direct transcription: walk block by block, scanning k = 1..b-1 for a dip."""
    b = round(eps ** -1.5)
    e = b ** (-2 / 3)
    slope = (critical_slope(p) if p < 0.5 else 1.0) - s * e
    n = len(x)
    tau, colors, good = [0], [], 0
    while tau[-1] < n:
        a = tau[-1]
        k, stop = 1, a + b
        running = 0
        while k < b and a + k <= n:
            running += x[a + k - 1]
            if running <= k * slope + 1e-9:
                stop = a + k
                break
            k += 1
        if stop < n and stop - a < b:
            colors.append("red")
        else:
            colors.append("blue")
            if stop - a == b and a <= n - b:
                good += 1
        tau.append(stop)
    return tau, colors, good


def test_coloring_all_ones_and_all_zeros():
    n = 1000
    rep = sr.red_blue_color([1] * n, 0.5, 2.0, 0.2)
    assert set(rep.segment_colors) == {"blue"}
    assert abs(rep.good_count - n // rep.b) <= 1
    rep0 = sr.red_blue_color([0] * n, 0.3, 2.0, 0.05)
    assert all(c == "red" for c in rep0.segment_colors[:-1])
    assert all(b - a == 1 for a, b in zip(rep0.tau, rep0.tau[1:]))
    assert rep0.good_count == 0


def test_coloring_double_implementation():
    rng = random.Random(5)
    for _ in range(10_000):
        n = rng.randint(1, 120)
        p = rng.choice([0.2, 0.3, 0.45, 0.5])
        eps = rng.choice([0.1, 0.15, 0.2, 0.3])
        s = rng.choice([1.5, 2.0, 3.0])
        q = rng.random()
        x = [1 if rng.random() < q else 0 for _ in range(n)]
        rep = sr.red_blue_color(x, p, s, eps)
        assert (rep.tau, rep.segment_colors, rep.good_count) == ref_coloring(x, p, s, eps)
        assert rep.tau[0] == 0 and rep.tau[-1] >= n
        assert all(0 < b - a <= rep.b for a, b in zip(rep.tau, rep.tau[1:]))
        assert rep.good_count <= n / rep.b + 1


def test_coloring_lower_bound_on_high_sum_sequences():
    rng = random.Random(9)
    for p, eps in ((0.3, 0.05), (0.2, 0.04)):
        c = critical_slope(p)
        n = int(math.ceil(100 / eps))
        checked = 0
        while checked < 10:
            x = [1 if rng.random() < c - eps + 0.003 else 0 for _ in range(n)]
            if sum(x) < (c - eps) * n:
                continue
            rep = sr.red_blue_color(x, p, 2.0, eps)
            assert rep.good_count >= sr.coloring_lower_bound(p, 2.0, eps, n)
            checked += 1


def test_snap_eps():
    b, e = sr.snap_eps(0.05)
    assert b == 89 and e == pytest.approx(89 ** (-2 / 3))
    assert sr.snap_eps(0.25) == (8, 0.25)
    rep = sr.red_blue_color([1] * 10, 0.5, 2.0, 0.25)
    assert not rep.snapped


# -- budgets --------------------------------------------------------------------

def test_t33_budget():
    assert sr.t33_budget(0.1, 1000, 0.25) == 2500
    assert sr.t33_budget(0.05, 2000, 0.25) == 10000
    with pytest.raises(ValueError):
        sr.t33_budget(0.1, 1000, 0.5)


def test_t34_budget():
    assert sr.t34_budget(0.3, 1 + 1e-12, 0.05, 10_000) < 1e-9
    v = sr.t34_budget(0.3, 2.0, 0.05, 10_000)
    assert 0 < v < 10_000
    with pytest.raises(ValueError):
        sr.t34_budget(0.3, 2.0, 0.4, 10_000)


def test_coloring_lower_bound_validation():
    assert sr.coloring_lower_bound(0.3, 2.0, 0.05, 10_000) == 20
    with pytest.raises(ValueError):
        sr.coloring_lower_bound(0.5, 2.0, 0.05, 10_000)
