import numpy as np
import pytest

from dtcrs.reduction import (
    DegenerateInputError,
    ReductionParams,
    n_components_rule,
    principal_axes,
    reduce,
    reduce_joint,
)


@pytest.mark.parametrize("count, cap, expected", [(252, 10, 10), (8, 10, 6), (3, 10, 1)])
def test_component_rule(count, cap, expected):
    assert n_components_rule(count, cap) == expected


def test_component_rule_rejects_tiny_inputs():
    with pytest.raises(DegenerateInputError):
        n_components_rule(2, 10)


def test_joint_batch_layout():
    rng = np.random.default_rng(0)
    out = reduce_joint(rng.standard_normal((5, 16)), rng.standard_normal((3, 16)))
    assert out.vectors.shape == (8, 6)
    assert (out.split_index, out.n_components, out.skipped) == (5, 6, False)
    assert out.head.shape == (5, 6) and out.tail.shape == (3, 6)


def test_tiny_joint_batch_passes_through():
    a, b = np.ones((1, 16)), np.zeros((1, 16))
    out = reduce_joint(a, b)
    assert out.skipped and out.n_components == 16
    assert np.array_equal(out.vectors, np.vstack([a, b]))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        reduce_joint(np.ones((3, 4)), np.ones((2, 5)))


def test_linear_backend_keeps_blobs_apart():
    rng = np.random.default_rng(1)
    c1, c2 = rng.standard_normal(16) * 3, rng.standard_normal(16) * 3
    X = np.vstack([c1 + 0.1 * rng.standard_normal((10, 16)), c2 + 0.1 * rng.standard_normal((10, 16))])
    R = reduce(X).vectors
    D = np.linalg.norm(R[:, None] - R[None], axis=2)
    within = max(D[:10, :10].max(), D[10:, 10:].max())
    between = D[:10, 10:].min()
    assert within < between


def test_row_permutation_equivariance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((12, 16))
    perm = rng.permutation(12)
    np.testing.assert_allclose(reduce(X[perm]).vectors, reduce(X).vectors[perm], atol=1e-9)


def test_linear_is_byte_deterministic():
    X = np.random.default_rng(3).standard_normal((30, 16))
    assert reduce(X).vectors.tobytes() == reduce(X).vectors.tobytes()


def test_principal_axes_sign_convention():
    X = np.random.default_rng(4).standard_normal((20, 5))
    a = principal_axes(X, 3)
    b = principal_axes(-X, 3)
    # flipping the data flips projections but the sign rule keeps axes canonical
    np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-9)


def test_params_validation():
    with pytest.raises(ValueError):
        ReductionParams(n_neighbors=1)
    with pytest.raises(ValueError):
        ReductionParams(backend="pca")


def test_manifold_backend_shape():
    pytest.importorskip("umap")
    X = np.random.default_rng(5).standard_normal((40, 16))
    out = reduce(X, ReductionParams(backend="manifold", target_dim_cap=4))
    assert out.vectors.shape == (40, 4)
