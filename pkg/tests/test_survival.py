from __future__ import annotations

import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsl import survival as sv
from bsl.tree_oracle import AUDIT, LabelOracle, VertexId


def enumerate_rho(p: Fraction, slope: float, n: int) -> Fraction:
    """Sum over all labelings of the depth-n tree of P(labeling) * [some path survives]."""
    verts = [(d, b) for d in range(1, n + 1) for b in range(1 << d)]
    pos = {v: i for i, v in enumerate(verts)}
    thr = [math.ceil(slope * k - 1e-9) for k in range(n + 1)]
    total = Fraction(0)
    for lab in itertools.product((0, 1), repeat=len(verts)):
        def survives(leaf):
            s = 0
            for d in range(1, n + 1):
                s += lab[pos[(d, leaf >> (n - d))]]
                if s < thr[d]:
                    return False
            return True

        if any(survives(leaf) for leaf in range(1 << n)):
            k = sum(lab)
            total += p**k * (1 - p) ** (len(verts) - k)
    return total


def test_rho_dp_small_cases_exact():
    assert sv.rho_dp(0.3, 0.1, 0).value == 1.0
    assert enumerate_rho(Fraction(1, 2), 1.0, 1) == Fraction(3, 4)
    assert enumerate_rho(Fraction(1, 2), 1.0, 2) == Fraction(39, 64)
    assert sv.rho_dp(0.5, 0, 1).value == 0.75
    assert sv.rho_dp(0.5, 0, 2).value == 39 / 64


@pytest.mark.parametrize("p,eps", [(0.5, 0.3), (0.3, 0.1), (0.25, 0.4), (0.4, 0.0)])
def test_rho_dp_matches_enumeration_depth3(p, eps):
    slope = sv.Barrier(p, eps).slope
    exact = enumerate_rho(Fraction(p), slope, 3)
    assert sv.rho_dp(p, eps, 3).value == pytest.approx(float(exact), abs=1e-14)


def test_rho_dp_validation():
    with pytest.raises(ValueError):
        sv.rho_dp(0.5, 0.1, sv.RHO_DP_MAX_N + 1)
    with pytest.raises(ValueError):
        sv.rho_dp(1.0, 0.1, 5)


def test_barrier_thresholds_force_ones_at_half():
    b = 8
    t = sv.Barrier(0.5, 1 / b).thresholds(3 * b)
    assert t[:b] == list(range(b))
    assert t[0] == 0 and all(x <= k for k, x in enumerate(t))


def test_dp_equals_gw_recursion():
    for n in range(0, 201):
        assert abs(sv.rho_dp(0.5, 0, n).value - sv.gw_allones_survival(n)) <= 1e-12


def test_monotonicity_grid():
    ps, epss, ns = (0.2, 0.3, 0.4, 0.5), (0.0, 0.02, 0.05, 0.1), (1, 5, 20, 60)
    val = {(p, e, n): sv.rho_dp(p, e, n).value for p in ps for e in epss for n in ns}
    for p in ps:
        for e in epss:
            seq = [val[p, e, n] for n in ns]
            assert all(a >= b for a, b in zip(seq, seq[1:]))
    for p in ps:
        for n in ns:
            seq = [val[p, e, n] for e in epss]
            assert all(a <= b + 1e-15 for a, b in zip(seq, seq[1:]))


def test_monotone_in_p_with_fixed_slope_offset():
    # increasing p also raises c(p); check the stated non-decrease on a grid
    for n in (5, 20, 80):
        for e in (0.05, 0.1):
            seq = [sv.rho_dp(p, e, n).value for p in (0.2, 0.3, 0.4, 0.5)]
            assert all(a <= b + 1e-12 for a, b in zip(seq, seq[1:])), seq


def test_rho_mc_agrees_with_dp():
    for p, eps, n in ((0.5, 0.0, 20), (0.3, 0.05, 50)):
        mc = sv.rho_mc(p, eps, n, 20_000, 1234)
        dp = sv.rho_dp(p, eps, n).value
        assert abs(mc.value - dp) <= 4 * mc.stderr
        assert mc.stderr == pytest.approx(math.sqrt(mc.value * (1 - mc.value) / 20_000))


def test_rho_mc_parallel_matches_serial():
    a = sv.rho_mc(0.5, 0.1, 30, 2000, 99, jobs=1)
    b = sv.rho_mc(0.5, 0.1, 30, 2000, 99, jobs=2)
    assert a == b


def test_rho_mc_trivial_slope():
    est = sv.rho_mc(0.3, 1.0, 30, 500, 1)
    assert est.value == 1.0 and est.stderr == 0.0


def test_barrier_witness_examples():
    root = VertexId.root()
    assert sv.barrier_witness(LabelOracle(3, 0.5), root, 1.0, 0) == []
    assert sv.barrier_witness(LabelOracle(3, 1.0), root, 1.0, 10) == [0] * 10


@pytest.mark.parametrize("seed", range(12))
def test_barrier_witness_matches_enumeration(seed):
    o = LabelOracle(seed, 0.5)
    depth, slope = 5, 1.0
    t = sv.level_thresholds(slope, depth)
    want = None
    for leaf in range(1 << depth):
        v = VertexId(depth, leaf)
        labels = o.path_labels(v, AUDIT)
        if all(sum(labels[:k]) >= t[k] for k in range(1, depth + 1)):
            want = [int(c) for c in str(v)]
            break
    assert sv.barrier_witness(o, VertexId.root(), slope, depth, AUDIT) == want
    assert o.ledger.count == 0


def test_barrier_witness_relative_to_start_and_charges():
    o = LabelOracle(11, 0.5)
    start = VertexId.from_str("10")
    path = sv.barrier_witness(o, start, 0.6, 12)
    assert o.ledger.count > 0
    if path is not None:
        end = start.extend(path)
        rel = o.path_labels(end, AUDIT)[start.depth:]
        t = sv.level_thresholds(0.6, 12)
        assert all(sum(rel[:k]) >= t[k] for k in range(13))


def test_gw_allones_values():
    assert sv.gw_allones_survival(0) == 1.0
    assert sv.gw_allones_survival(1) == 0.75
    assert sv.gw_allones_survival(2) == 39 / 64
    assert 3.8 <= 1000 * sv.gw_allones_survival(1000) <= 4.0


def test_periodic_n2_is_fixed_point_root():
    s = sv.periodic_gw_survival(2)
    u = 1 - s
    assert u == pytest.approx((1 + u * u) ** 2 / 4, abs=1e-12)
    assert s == pytest.approx(0.704, abs=5e-4)
    assert 0.5 <= s <= 0.75


@pytest.mark.parametrize("n", [2, 3, 5, 10, 30, 100])
def test_periodic_bracket(n):
    lo, hi = sv.rho_infinity_bracket(1 / n)
    assert lo >= 1 / n
    assert lo <= hi
    assert hi / lo <= 5


def test_bracket_dominated_by_finite_n_survival():
    lo = sv.periodic_gw_survival(10)
    mc = sv.rho_mc(0.5, 0.1, 200, 5000, 77)
    assert lo <= mc.value + 4 * mc.stderr
    assert lo <= sv.rho_dp(0.5, 0.1, 400).value


def test_convergence_error_and_reciprocal_check():
    with pytest.raises(sv.ConvergenceError) as ei:
        sv.periodic_gw_survival(50, max_iter=3)
    assert ei.value.iterations == 3
    with pytest.raises(ValueError):
        sv.rho_infinity_bracket(0.3)
    with pytest.raises(ValueError):
        sv.periodic_gw_survival(1)


def test_rho_gf():
    assert sv.rho_gf(0.5, 0, 7).value == sv.gw_allones_survival(7)
    assert sv.rho_gf(0.5, 0.1, 50).value == sv.periodic_gw_survival(10)
    with pytest.raises(ValueError):
        sv.rho_gf(0.3, 0, 5)


def test_decay_under_three_halves_depth():
    vals = []
    for eps in (0.04, 0.02, 0.01):
        n = math.ceil(eps**-1.5 - 1e-9)
        vals.append(math.sqrt(eps) * math.log(sv.rho_dp(0.3, eps, n).value))
    assert max(vals) <= -0.01


@given(st.floats(0.05, 0.95), st.floats(0.0, 0.5), st.integers(0, 40))
@settings(max_examples=60, deadline=None)
def test_rho_dp_is_a_probability(p, eps, n):
    v = sv.rho_dp(p, eps, n).value
    assert 0.0 <= v <= 1.0


def test_survival_estimate():
    e = sv.SurvivalEstimate.from_counts(25, 100)
    assert (e.value, e.method, e.trials) == (0.25, "mc", 100)
    assert e.stderr == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    assert sv.rho_dp(0.5, 0.1, 10).stderr == 0.0
