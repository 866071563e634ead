import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnslq.penalties import PenaltyWeights, check_sufficiency, derive_weights
from bnslq.score_poly import DeltaTable, delta_table
from bnslq.solvers import bruteforce_min_order, bruteforce_min_slack

from helpers import random_polynomial, random_weights


def _table(values):
    return DeltaTable(values=np.asarray(values, dtype=float), mode="exact")


def test_zero_deltas_produce_margin_floor():
    eps_rel, eps_abs = 1e-6, 1e-6
    n = 4
    weights = derive_weights(_table(np.zeros((n, n))), n, margin=(eps_rel, eps_abs))
    assert np.allclose(weights.delta_max, eps_abs)
    assert weights.delta_trans == eps_abs
    assert weights.delta_consist == pytest.approx((1 + eps_rel) * (n - 2) * eps_abs + eps_abs)
    assert weights.verified


def test_derived_values_from_stated_formulas():
    # one dominating delta of 2.5 in an n=4 instance
    values = np.zeros((4, 4))
    values[1, 0] = 2.5
    weights = derive_weights(_table(values), 4, margin=(1e-6, 1e-6))

    expected_trans = (1 + 1e-6) * 2.5 + 1e-6
    expected_consist = (1 + 1e-6) * 2 * expected_trans + 1e-6
    assert weights.delta_trans == expected_trans
    assert weights.delta_consist == expected_consist
    # the published approximations are coarser than the formulas
    assert weights.delta_trans == pytest.approx(2.5000031, abs=1e-5)
    assert weights.delta_consist == pytest.approx(5.0000087, abs=1e-5)
    assert weights.delta_max[0] == expected_trans
    assert weights.delta_max[1] == pytest.approx(1e-6)


def test_two_node_consistency_floor():
    values = np.array([[0.0, 1.0], [0.5, 0.0]])
    weights = derive_weights(_table(values), 2, margin=(1e-6, 1e-6))
    assert weights.delta_consist == pytest.approx(weights.delta_trans + 1e-6)
    assert weights.delta_consist > values.max()


def test_margin_validation():
    table = _table(np.zeros((3, 3)))
    with pytest.raises(ValueError, match="margin"):
        derive_weights(table, 3, margin=(-1e-6, 1e-6))
    with pytest.raises(ValueError, match="margin"):
        derive_weights(table, 3, margin=(0.0, 0.0))


def test_weights_must_be_positive():
    with pytest.raises(ValueError, match="positive"):
        PenaltyWeights(delta_max=np.array([0.0, 1.0]), delta_trans=1.0, delta_consist=1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_derived_weights_satisfy_strict_bounds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 6))
    deltas = delta_table(random_polynomial(rng, n, 2))
    weights = derive_weights(deltas, n)
    assert check_sufficiency(weights, deltas, n)
    for i in range(n):
        assert weights.delta_max[i] > deltas.max_into(i)
    assert weights.delta_trans > deltas.max
    assert weights.delta_consist > (n - 2) * weights.delta_trans


@pytest.mark.parametrize("factor", [2.0, 0.5, 4.0])
def test_bound_scales_exactly_with_scores(factor):
    # with eps_abs = 0 the derivation is positively homogeneous; powers of two
    # make the float comparison exact
    rng = np.random.default_rng(17)
    poly = random_polynomial(rng, 4, 2)
    deltas = delta_table(poly)
    scaled = DeltaTable(values=deltas.values * factor, mode=deltas.mode)

    margin = (1e-6, 0.0)
    base = derive_weights(deltas, 4, margin=margin)
    scaled_weights = derive_weights(scaled, 4, margin=margin)
    np.testing.assert_array_equal(scaled_weights.delta_max, base.delta_max * factor)
    assert scaled_weights.delta_trans == base.delta_trans * factor
    assert scaled_weights.delta_consist == base.delta_consist * factor


def test_below_bound_weights_flagged_unverified():
    rng = np.random.default_rng(23)
    deltas = delta_table(random_polynomial(rng, 4, 2))
    weak = PenaltyWeights(
        delta_max=np.full(4, 1e-9),
        delta_trans=1e-9,
        delta_consist=1e-9,
        verified=False,
    )
    assert not check_sufficiency(weak, deltas, 4)
    assert weak.to_json_dict()["sufficiency"] == "unverified"


def _random_arc_pair(rng, n):
    """A random assignment d and the same with one present arc removed."""
    while True:
        adj = rng.integers(0, 2, size=(n, n))
        np.fill_diagonal(adj, 0)
        arcs = np.argwhere(adj)
        if len(arcs):
            break
    src, dst = arcs[rng.integers(0, len(arcs))]
    smaller = adj.copy()
    smaller[src, dst] = 0
    return adj, smaller


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_slack_minimum_monotone_under_arc_removal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 3))
    weights = random_weights(rng, n)
    adj, smaller = _random_arc_pair(rng, n)
    total = sum(
        bruteforce_min_slack(int(adj[:, i].sum()), float(weights.delta_max[i]), m)
        for i in range(n)
    )
    total_smaller = sum(
        bruteforce_min_slack(int(smaller[:, i].sum()), float(weights.delta_max[i]), m)
        for i in range(n)
    )
    assert total >= total_smaller


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_order_minimum_monotone_under_arc_removal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    weights = random_weights(rng, n)
    adj, smaller = _random_arc_pair(rng, n)
    assert bruteforce_min_order(adj, weights) >= bruteforce_min_order(smaller, weights)
