import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnslq.dataset import Dataset, DatasetError, counts, load_csv

from helpers import random_dataset


def test_load_two_binary_vars():
    data = load_csv("A,B\n0,1\n1,0\n")
    assert data.n == 2
    assert data.cardinalities == (2, 2)
    assert data.num_cases == 2
    assert data.names == ("A", "B")


def test_load_header_only_is_valid_with_zero_cases():
    data = load_csv("A,B\n")
    assert data.num_cases == 0
    assert data.cardinalities == (2, 2)


def test_load_declared_cardinality_too_small():
    with pytest.raises(DatasetError, match="too small"):
        load_csv("A,B\n#card:2,2\n0,5\n")


def test_load_declared_cardinality_row():
    data = load_csv("A,B\n#card:3,4\n0,1\n")
    assert data.cardinalities == (3, 4)


def test_load_ragged_row_reports_line_number():
    with pytest.raises(DatasetError, match="row 3"):
        load_csv("A,B\n0,1\n0,1,1\n")


def test_load_single_column_rejected():
    with pytest.raises(DatasetError, match="at least 2"):
        load_csv("A\n0\n1\n")


def test_load_categorical_labels_first_seen_order():
    data = load_csv("A,B\nhot,0\ncold,1\nhot,0\n")
    assert data.labels[0] == ("hot", "cold")
    assert data.labels[1] is None
    np.testing.assert_array_equal(data.cases[:, 0], [0, 1, 0])
    assert data.cardinalities == (2, 2)


def test_load_constant_column_fails_inference():
    # a never-varying column infers cardinality 1, which is invalid
    with pytest.raises(DatasetError, match="cardinality"):
        load_csv("A,B\n0,0\n0,1\n")


def test_dataset_validates_index_range():
    with pytest.raises(DatasetError, match="out of range"):
        Dataset(names=("A", "B"), cardinalities=(2, 2), cases=np.array([[0, 3]]))


def test_dataset_rejects_duplicate_names():
    with pytest.raises(DatasetError, match="unique"):
        Dataset(names=("A", "A"), cardinalities=(2, 2), cases=np.zeros((0, 2), dtype=int))


def test_counts_zero_cases_all_zero():
    data = load_csv("A,B\n")
    ct = counts(data, 0, [1])
    assert ct.counts.shape == (2, 2)
    assert ct.counts.sum() == 0
    assert ct.row_totals.sum() == 0


def test_counts_direct_tally():
    data = load_csv("A,B\n0,0\n1,1\n")
    ct = counts(data, 1, [0])
    np.testing.assert_array_equal(ct.counts, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(ct.row_totals, [1, 1])


def test_counts_empty_parent_set_is_marginal():
    data = load_csv("A,B\n0,0\n1,1\n")
    ct = counts(data, 1, [])
    np.testing.assert_array_equal(ct.counts, [[1, 1]])
    np.testing.assert_array_equal(ct.row_totals, [2])


def test_counts_rejects_child_in_parents():
    data = load_csv("A,B\n0,1\n1,0\n")
    with pytest.raises(DatasetError, match="own parent"):
        counts(data, 1, [1])


def test_counts_mixed_radix_order():
    # smallest parent index is the least significant digit of the joint state
    data = Dataset(
        names=("A", "B", "C"),
        cardinalities=(2, 3, 2),
        cases=np.array([[1, 2, 0]]),
    )
    ct = counts(data, 2, [0, 1])
    assert ct.q == 6
    joint = 1 + 2 * 2  # state(A) + state(B) * r_A
    assert ct.counts[joint, 0] == 1
    assert ct.counts.sum() == 1


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_counts_matches_pure_python_tally(data_strategy):
    rng = np.random.default_rng(data_strategy.draw(st.integers(0, 2**32 - 1)))
    n = data_strategy.draw(st.integers(2, 4))
    num_cases = data_strategy.draw(st.integers(0, 25))
    data = random_dataset(rng, n, num_cases)
    child = int(rng.integers(0, n))
    others = [j for j in range(n) if j != child]
    k = int(rng.integers(0, len(others) + 1))
    parents = sorted(rng.choice(others, size=k, replace=False).tolist()) if k else []

    ct = counts(data, child, parents)
    assert ct.counts.sum() == num_cases
    np.testing.assert_array_equal(ct.row_totals, ct.counts.sum(axis=1))

    expected = np.zeros_like(ct.counts)
    for row in data.cases:
        j = 0
        stride = 1
        for p in parents:
            j += int(row[p]) * stride
            stride *= data.cardinalities[p]
        expected[j, int(row[child])] += 1
    np.testing.assert_array_equal(ct.counts, expected)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_counts_is_permutation_stable(seed):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, 4, 15)
    ref = counts(data, 0, [1, 2, 3])
    shuffled = counts(data, 0, [3, 1, 2])
    assert ref.parents == shuffled.parents
    np.testing.assert_array_equal(ref.counts, shuffled.counts)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_counts_reencoding_marginalizes(seed):
    # summing the full table over one parent's states reproduces the smaller table
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, 4, 20)
    child = 0
    full = counts(data, child, [1, 2, 3])
    drop = int(rng.integers(1, 4))
    kept = [p for p in (1, 2, 3) if p != drop]
    small = counts(data, child, kept)

    summed = np.zeros_like(small.counts)
    for j in range(full.q):
        rest = j
        states = {}
        for p in (1, 2, 3):
            states[p] = rest % data.cardinalities[p]
            rest //= data.cardinalities[p]
        j_small = 0
        stride = 1
        for p in kept:
            j_small += states[p] * stride
            stride *= data.cardinalities[p]
        summed[j_small] += full.counts[j]
    np.testing.assert_array_equal(summed, small.counts)
