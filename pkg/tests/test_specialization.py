import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agglomer.errors import DegenerateMatrix, InconsistentExpectation
from agglomer.specialization import (
    SpecializationSet,
    binarize,
    diversity,
    expected_naive,
    joint_ratio,
    nested_sort,
    rca_ratio,
    ubiquity,
)

count_matrices = arrays(
    np.int64,
    st.tuples(st.integers(2, 8), st.integers(2, 12)),
    elements=st.integers(0, 50),
).filter(lambda m: m.sum() > 0)


def test_expected_naive_oracle():
    N = np.array([[4, 0], [0, 1]])
    N_hat = expected_naive(N)
    assert np.allclose(N_hat, [[3.2, 0.8], [0.8, 0.2]], atol=1e-12)
    R = rca_ratio(N, N_hat)
    assert np.allclose(R, [[1.25, 0.0], [0.0, 5.0]], atol=1e-12)
    M = binarize(R)
    assert M.tolist() == [[1, 0], [0, 1]]


def test_expected_naive_degenerate():
    with pytest.raises(DegenerateMatrix):
        expected_naive(np.zeros((2, 2)))


@given(count_matrices)
@settings(max_examples=200, deadline=None)
def test_expected_naive_conserves_mass_and_margins(N):
    N_hat = expected_naive(N)
    assert N_hat.sum() == pytest.approx(N.sum(), rel=1e-12)
    assert np.allclose(N_hat.sum(axis=1), N.sum(axis=1), rtol=1e-12)
    assert np.allclose(N_hat.sum(axis=0), N.sum(axis=0), rtol=1e-12)


@given(count_matrices)
@settings(max_examples=200, deadline=None)
def test_rca_weighted_mean_is_one(N):
    N_hat = expected_naive(N)
    R = rca_ratio(N, N_hat)
    assert (R * N_hat).sum() / N_hat.sum() == pytest.approx(1.0, abs=1e-10)


@given(count_matrices, st.sampled_from([2, 3, 10]))
@settings(max_examples=100, deadline=None)
def test_binarization_scale_invariance(N, c):
    M1 = binarize(rca_ratio(N, expected_naive(N)))
    M2 = binarize(rca_ratio(c * N, expected_naive(c * N)))
    assert np.array_equal(M1, M2)


def test_rca_zero_over_zero_guard():
    N = np.array([[2, 0], [0, 0]])
    # zero row and column make some expectations zero where N is zero
    N_hat = np.array([[2.0, 0.0], [0.0, 0.0]])
    R = rca_ratio(N, N_hat)
    assert R[1, 1] == 0.0


def test_rca_inconsistent_expectation():
    with pytest.raises(InconsistentExpectation):
        rca_ratio(np.array([[1.0]]), np.array([[0.0]]))


def test_binarize_tie_inclusive():
    assert binarize(np.array([0.999999, 1.0, 1.000001])).tolist() == [0, 1, 1]


def test_joint_ratio_pools_both_roles():
    Nb = np.array([[4, 0], [0, 1]])
    Nd = np.array([[1, 1], [1, 1]])
    R = joint_ratio(Nb, Nd)
    expected = (Nb + Nd) / (expected_naive(Nb) + expected_naive(Nd))
    assert np.allclose(R, expected, atol=1e-12)


def test_joint_ratio_falls_back_to_single_role():
    Nb = np.array([[4, 0], [0, 1]])
    zero = np.zeros_like(Nb)
    assert np.allclose(joint_ratio(Nb, zero), rca_ratio(Nb, expected_naive(Nb)))
    assert np.allclose(joint_ratio(zero, Nb), rca_ratio(Nb, expected_naive(Nb)))


def test_diversity_ubiquity_margins():
    M = np.array([[1, 1, 0], [1, 0, 0]])
    assert diversity(M).tolist() == [2, 1]
    assert ubiquity(M).tolist() == [2, 1, 0]


def test_nested_sort_descending_with_lexicographic_ties():
    M = np.array(
        [
            [1, 0, 0],  # rA div 1
            [1, 1, 0],  # rB div 2
            [1, 0, 0],  # rC div 1 (tie with rA -> rA first)
        ]
    )
    rows, cols = nested_sort(M, ["rA", "rB", "rC"], ["c2", "c1", "c3"])
    assert [["rA", "rB", "rC"][i] for i in rows] == ["rB", "rA", "rC"]
    # ubiquities: c2=3, c1=1, c3=0
    assert [["c2", "c1", "c3"][k] for k in cols] == ["c2", "c1", "c3"]
    # tie case on columns
    M2 = np.array([[1, 1], [0, 0]])
    _, cols2 = nested_sort(M2, ["a", "b"], ["z", "y"])
    assert [["z", "y"][k] for k in cols2] == ["y", "z"]


def test_specialization_set_derives_ratio_and_binary():
    N = np.array([[4.0, 0.0], [0.0, 1.0]])
    s = SpecializationSet(
        role="births", century=17, regions=("A", "B"), occupations=("x", "y"),
        N=N, N_hat=expected_naive(N),
    )
    assert s.M.tolist() == [[1, 0], [0, 1]]
    assert s.diversity.tolist() == [1, 1]
    assert s.ubiquity.tolist() == [1, 1]
