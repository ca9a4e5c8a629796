"""Unit tests for the dense tensor kernels."""

import itertools

import numpy as np
import pytest

from goal_tensor_cli.core.errors import DimensionError, NumericError
from goal_tensor_cli.core.models import DenseTensor, KruskalModel, TuckerModel
from goal_tensor_cli.core.tensor import (
    fold,
    frob_err,
    frob_norm,
    hadamard_gram,
    khatri_rao,
    khatri_rao_list,
    matricize,
    mttkrp,
    multi_ttm,
    reconstruct,
    reconstruct_cp,
    reconstruct_tucker,
    time_slice,
    ttm,
)


def rel(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b))


def random_factors(rng, dims, rank):
    return tuple(rng.standard_normal((n, rank)) for n in dims)


def test_from_values_is_column_major():
    """Test that mode 0 varies fastest in the linearization."""
    X = DenseTensor.from_values((2, 3), np.arange(6))

    assert X.data[1, 0] == 1.0
    assert X.data[0, 1] == 2.0
    np.testing.assert_array_equal(X.values, np.arange(6))


def test_from_values_rejects_wrong_count():
    """Test that a value count not matching dims is rejected."""
    with pytest.raises(ValueError):
        DenseTensor.from_values((2, 3), np.arange(5))


def test_matricize_columns_follow_remaining_modes(rng):
    """Test the column order of X_(n): remaining modes ascending, first fastest."""
    X = DenseTensor(rng.standard_normal((3, 4, 2)))

    X1 = matricize(X, 1)

    assert X1.shape == (4, 6)
    for i0, i1, i2 in itertools.product(range(3), range(4), range(2)):
        assert X1[i1, i0 + 3 * i2] == X.data[i0, i1, i2]


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_fold_inverts_matricize(rng, n):
    """Test that fold undoes matricize on every mode."""
    X = DenseTensor(rng.standard_normal((3, 4, 2, 5)))

    Y = fold(matricize(X, n), n, X.dims)

    np.testing.assert_array_equal(Y.data, X.data)


def test_matricize_mode_out_of_range(rng):
    """Test that an invalid mode raises DimensionError."""
    X = DenseTensor(rng.standard_normal((3, 4)))

    with pytest.raises(DimensionError):
        matricize(X, 2)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_ttm_matches_unfolding_product(rng, n):
    """Test Y_(n) = A X_(n)."""
    X = DenseTensor(rng.standard_normal((3, 4, 5)))
    A = rng.standard_normal((2, X.dims[n]))

    Y = ttm(X, A, n)

    assert Y.dims[n] == 2
    assert rel(matricize(Y, n), A @ matricize(X, n)) <= 1e-13


def test_ttm_transpose(rng):
    """Test that transpose=True multiplies by A^T."""
    X = DenseTensor(rng.standard_normal((3, 4, 5)))
    A = rng.standard_normal((4, 2))

    np.testing.assert_allclose(ttm(X, A, 1, transpose=True).data, ttm(X, A.T, 1).data)


def test_ttm_associative_across_modes(rng):
    """Test that products on distinct modes commute."""
    X = DenseTensor(rng.standard_normal((3, 4, 5)))
    A = rng.standard_normal((2, 3))
    B = rng.standard_normal((6, 5))

    left = ttm(ttm(X, A, 0), B, 2)
    right = ttm(ttm(X, B, 2), A, 0)

    assert rel(left.data, right.data) <= 1e-13


def test_ttm_dimension_mismatch(rng):
    """Test that a matrix of the wrong width is rejected."""
    X = DenseTensor(rng.standard_normal((3, 4)))

    with pytest.raises(DimensionError):
        ttm(X, np.ones((2, 3)), 1)


def test_khatri_rao_columns_are_kronecker_products(rng):
    """Test that column r of A (.) B is kron(a_r, b_r)."""
    A = rng.standard_normal((3, 2))
    B = rng.standard_normal((4, 2))

    K = khatri_rao(A, B)

    assert K.shape == (12, 2)
    for r in range(2):
        np.testing.assert_allclose(K[:, r], np.kron(A[:, r], B[:, r]))


def test_khatri_rao_rejects_different_ranks():
    """Test that mismatched column counts raise DimensionError."""
    with pytest.raises(DimensionError):
        khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


@pytest.mark.parametrize("dims", [(4, 3, 5, 2), (5, 4, 3), (2, 3), (6,)])
def test_mttkrp_matches_materialized_oracle(rng, dims):
    """Test MTTKRP against X_(n) times the explicit Khatri-Rao product."""
    X = DenseTensor(rng.standard_normal(dims))
    factors = random_factors(rng, dims, 3)

    for n in range(len(dims)):
        others = [factors[k] for k in reversed(range(len(dims))) if k != n]
        if others:
            oracle = matricize(X, n) @ khatri_rao_list(others)
        else:
            oracle = np.repeat(X.data[:, None], 3, axis=1)

        assert rel(mttkrp(X, factors, n), oracle) <= 1e-13


def test_mttkrp_rejects_wrong_factor_shape(rng):
    """Test that a factor with the wrong row count is rejected."""
    X = DenseTensor(rng.standard_normal((3, 4, 5)))
    factors = (np.ones((3, 2)), np.ones((5, 2)), np.ones((5, 2)))

    with pytest.raises(DimensionError):
        mttkrp(X, factors, 0)


def test_hadamard_gram_skips_mode(rng):
    """Test the elementwise product of Gram matrices."""
    factors = random_factors(rng, (3, 4, 5), 2)

    V = hadamard_gram(factors, skip=1)

    np.testing.assert_allclose(V, (factors[0].T @ factors[0]) * (factors[2].T @ factors[2]))


def test_reconstruct_cp_unfolding_identity(rng):
    """Test M_(0) = A_0 (A_{d-1} (.) ... (.) A_1)^T."""
    model = KruskalModel(random_factors(rng, (4, 3, 5, 2), 3))

    M = reconstruct_cp(model)

    kr = khatri_rao_list(model.factors[:0:-1])
    assert rel(matricize(M, 0), model.factors[0] @ kr.T) <= 1e-13


def test_reconstruct_cp_sum_of_outer_products(rng):
    """Test the CP model against an explicit sum of rank-one terms."""
    model = KruskalModel(random_factors(rng, (3, 4, 2), 2))

    oracle = sum(
        np.einsum("i,j,k->ijk", *(A[:, r] for A in model.factors)) for r in range(2)
    )

    assert rel(reconstruct_cp(model).data, oracle) <= 1e-13


def test_reconstruct_tucker_matches_superdiagonal_cp(rng):
    """Test that a CP model and its superdiagonal Tucker form agree."""
    for rank in (1, 2, 3):
        model = KruskalModel(random_factors(rng, (4, 3, 5), rank))

        core = np.zeros((rank,) * 3)
        core[(np.arange(rank),) * 3] = 1.0
        tucker = TuckerModel(DenseTensor(core), model.factors)

        assert rel(reconstruct_tucker(tucker).data, reconstruct_cp(model).data) <= 1e-13


def test_reconstruct_dispatches_on_model_type(rng):
    """Test that reconstruct handles both model kinds."""
    factors = random_factors(rng, (3, 4), 2)
    core = DenseTensor(rng.standard_normal((2, 2)))

    assert reconstruct(KruskalModel(factors)).dims == (3, 4)
    np.testing.assert_allclose(
        reconstruct(TuckerModel(core, factors)).data,
        multi_ttm(core, list(factors)).data,
    )


def test_frob_err_matches_element_loop(rng):
    """Test frob_err against a plain loop over elements."""
    X = DenseTensor(rng.standard_normal((3, 2, 4)))
    M = DenseTensor(rng.standard_normal((3, 2, 4)))

    num = sum((X.data[idx] - M.data[idx]) ** 2 for idx in np.ndindex(X.dims))
    den = sum(X.data[idx] ** 2 for idx in np.ndindex(X.dims))

    assert frob_err(X, M) == pytest.approx(np.sqrt(num / den), rel=1e-13)


def test_frob_err_zero_reference():
    """Test that a zero reference tensor raises NumericError."""
    with pytest.raises(NumericError):
        frob_err(DenseTensor(np.zeros((2, 2))), DenseTensor(np.ones((2, 2))))


def test_frob_err_dimension_mismatch():
    """Test that tensors of different dims cannot be compared."""
    with pytest.raises(DimensionError):
        frob_err(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((2, 3))))


def test_time_slice_takes_last_mode(rng):
    """Test that time_slice fixes the last index."""
    X = DenseTensor(rng.standard_normal((3, 2, 4)))

    S = time_slice(X, 2)

    assert S.dims == (3, 2)
    np.testing.assert_array_equal(S.data, X.data[:, :, 2])
    with pytest.raises(DimensionError):
        time_slice(X, 4)


def test_frob_norm_matches_element_loop(rng):
    """Test frob_norm against the square root of a plain sum of squares."""
    X = DenseTensor(rng.standard_normal((2, 3, 4)))

    expected = np.sqrt(sum(X.data[idx] ** 2 for idx in np.ndindex(X.dims)))

    assert frob_norm(X) == pytest.approx(expected, rel=1e-14)
