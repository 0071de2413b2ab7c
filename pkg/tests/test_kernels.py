import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dica.domains import DomainDataset
from dica.errors import ConfigError, InputError
from dica.kernels import (
    CrossGram,
    GramMatrix,
    KernelSpec,
    center_cross_gram,
    center_gram,
    cross_gram,
    eval_kernel,
    kernel_matrix,
    median_heuristic,
    pooled_gram,
)

RBF1 = KernelSpec("gaussian-rbf", 1.0)
LIN = KernelSpec("linear")


def _dataset(rng, sizes, d=3):
    return DomainDataset.from_arrays([rng.standard_normal((s, d)) for s in sizes])


def test_rbf_zero_distance_is_one():
    x = np.array([0.3, -1.2])
    assert eval_kernel(RBF1, x, x) == 1.0


def test_rbf_closed_form():
    # |x - z|^2 = 2
    v = eval_kernel(RBF1, [1.0, 0.0], [0.0, 1.0])
    assert v == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert v == pytest.approx(0.367879, abs=1e-6)


def test_delta_kernel():
    d = KernelSpec("delta")
    assert eval_kernel(d, 3, 3) == 1.0
    assert eval_kernel(d, 3, 5) == 0.0


def test_delta_rejects_continuous_labels():
    with pytest.raises(ConfigError):
        kernel_matrix(KernelSpec("delta"), [0.5, 1.0], [1.0])


def test_eval_kernel_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(RBF1, [1.0, 2.0], [1.0])


def test_bandwidth_must_be_positive():
    for bad in (0.0, -1.0, np.inf):
        with pytest.raises(ConfigError):
            KernelSpec("gaussian-rbf", bad)


def test_unknown_family():
    with pytest.raises(ConfigError):
        KernelSpec("laplace", 1.0)


def test_median_heuristic():
    x = np.array([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 3, 2
    assert median_heuristic(x) == 2.0
    assert median_heuristic(np.zeros((4, 2))) == 1.0
    assert KernelSpec("gaussian-rbf").resolve(x).bandwidth == 2.0


def test_pooled_gram_identical_points():
    data = DomainDataset.from_arrays([np.ones((2, 2))])
    np.testing.assert_array_equal(pooled_gram(RBF1, data).values, np.ones((2, 2)))


def test_pooled_gram_far_apart_singletons():
    # squared distance 200 sigma^2
    data = DomainDataset.from_arrays([np.zeros((1, 1)), np.full((1, 1), np.sqrt(200.0))])
    np.testing.assert_allclose(pooled_gram(RBF1, data).values, np.eye(2), atol=1e-12, rtol=0)


def test_pooled_gram_linear_orthonormal_rows():
    data = DomainDataset.from_arrays([np.eye(3)[:2], np.eye(3)[2:]])
    np.testing.assert_array_equal(pooled_gram(LIN, data).values, np.eye(3))


def test_pooled_gram_on_outputs():
    data = DomainDataset.from_arrays([np.zeros((2, 1)), np.zeros((1, 1))], [[0, 1], [1]])
    g = pooled_gram(KernelSpec("delta"), data, on_outputs=True)
    np.testing.assert_array_equal(g.values, [[1, 0, 0], [0, 1, 1], [0, 1, 1]])
    assert g.domain_sizes == (2, 1)
    with pytest.raises(InputError):
        pooled_gram(RBF1, DomainDataset.from_arrays([np.zeros((2, 1))]), on_outputs=True)


def test_pooled_gram_exactly_symmetric_and_psd():
    rng = np.random.default_rng(0)
    data = _dataset(rng, [7, 4, 9])
    for spec in (RBF1, LIN):
        g = pooled_gram(spec, data).values
        assert np.array_equal(g, g.T)
        assert np.linalg.eigvalsh(g).min() >= -1e-8 * np.trace(g) / g.shape[0]
    labels = DomainDataset.from_arrays([np.zeros((5, 1)), np.zeros((4, 1))], [rng.integers(0, 3, 5), rng.integers(0, 3, 4)])
    g = pooled_gram(KernelSpec("delta"), labels, on_outputs=True).values
    assert np.linalg.eigvalsh(g).min() >= -1e-8 * np.trace(g) / g.shape[0]


def test_gram_is_read_only():
    g = pooled_gram(RBF1, DomainDataset.from_arrays([np.zeros((2, 1))]))
    with pytest.raises(ValueError):
        g.values[0, 0] = 3.0


def test_center_constant_matrix_is_zero():
    g = GramMatrix(np.full((4, 4), 2.5), (2, 2))
    np.testing.assert_allclose(center_gram(g).values, 0.0, atol=1e-15)


def test_center_two_by_two_identity():
    c = center_gram(GramMatrix(np.eye(2), (1, 1)))
    np.testing.assert_allclose(c.values, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    assert c.centered


def test_center_zero_row_sum_unchanged():
    k = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
    np.testing.assert_allclose(center_gram(GramMatrix(k, (3,))).values, k, atol=1e-12)


def test_center_matches_linear_feature_centering():
    rng = np.random.default_rng(1)
    data = _dataset(rng, [5, 6])
    x, _, _ = data.flatten()
    xc = x - x.mean(axis=0)
    np.testing.assert_allclose(center_gram(pooled_gram(LIN, data)).values, xc @ xc.T, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000))
def test_center_idempotent_and_row_sums(n, seed):
    rng = np.random.default_rng(seed)
    g = pooled_gram(RBF1, DomainDataset.from_arrays([rng.standard_normal((n, 2))]))
    c1 = center_gram(g)
    c2 = center_gram(c1)
    assert np.abs(c2.values - c1.values).max() <= 1e-12
    assert np.abs(c1.values.sum(axis=0)).max() <= 1e-8 * n
    assert np.abs(c1.values.sum(axis=1)).max() <= 1e-8 * n


def test_cross_gram_on_train_equals_pooled():
    rng = np.random.default_rng(2)
    data = _dataset(rng, [3, 4])
    x, _, _ = data.flatten()
    np.testing.assert_array_equal(cross_gram(RBF1, x, data).values, pooled_gram(RBF1, data).values)


def test_cross_gram_single_training_point():
    rng = np.random.default_rng(3)
    data = DomainDataset.from_arrays([10.0 * rng.standard_normal((4, 2))])
    x, _, _ = data.flatten()
    row = cross_gram(KernelSpec("gaussian-rbf", 0.01), x[2:3], data).values[0]
    np.testing.assert_allclose(row, np.eye(4)[2], atol=1e-12)


def test_cross_gram_matches_double_loop():
    rng = np.random.default_rng(4)
    data = _dataset(rng, [2, 3])
    x, _, _ = data.flatten()
    t = rng.standard_normal((3, 3))
    spec = KernelSpec("gaussian-rbf", 0.7)
    cg = cross_gram(spec, t, data)
    loop = np.array([[eval_kernel(spec, a, b) for b in x] for a in t])
    np.testing.assert_allclose(cg.values, loop, rtol=1e-14, atol=0)
    assert cg.values.shape == (3, 5)


def test_cross_gram_dimension_mismatch():
    data = _dataset(np.random.default_rng(5), [2])
    with pytest.raises(InputError):
        cross_gram(RBF1, np.zeros((1, 2)), data)


def test_center_cross_on_train_equals_center_gram():
    rng = np.random.default_rng(6)
    data = _dataset(rng, [4, 3])
    x, _, _ = data.flatten()
    g = pooled_gram(RBF1, data)
    c = center_cross_gram(cross_gram(RBF1, x, data), g)
    np.testing.assert_allclose(c.values, center_gram(g).values, atol=1e-14)
    assert c.centered


def test_center_cross_constant_is_zero():
    g = GramMatrix(np.full((4, 4), 0.3), (4,))
    cg = CrossGram(np.full((2, 4), 0.3), (4,))
    np.testing.assert_allclose(center_cross_gram(cg, g).values, 0.0, atol=1e-15)


def test_center_cross_linear_oracle():
    rng = np.random.default_rng(7)
    data = _dataset(rng, [2, 2])
    x, _, _ = data.flatten()
    t = rng.standard_normal((2, 3))
    mu = x.mean(axis=0)
    expected = (t - mu) @ (x - mu).T
    got = center_cross_gram(cross_gram(LIN, t, data), pooled_gram(LIN, data)).values
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_center_cross_width_mismatch():
    g = GramMatrix(np.eye(3), (3,))
    with pytest.raises(InputError):
        center_cross_gram(CrossGram(np.ones((1, 2)), (2,)), g)


def test_kernel_spec_round_trip():
    for spec in (RBF1, LIN, KernelSpec("delta"), KernelSpec("gaussian-rbf")):
        assert KernelSpec.from_dict(spec.to_dict()) == spec
