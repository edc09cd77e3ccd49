import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_gd import BlockPartition, QuadraticObjective, SpectrumSpec, block_gradient, build_quadratic
from hybrid_gd.errors import DimensionError, InvalidSpectrumError
from hybrid_gd.objective import random_orthogonal, validate_objective


def test_identity_case_with_zero_b():
    obj = build_quadratic(SpectrumSpec(1, (1.0,), 0), b=np.zeros(1))
    assert np.array_equal(obj.Q, [[1.0]])
    assert np.array_equal(obj.x_star, [0.0])


def test_eigenvalues_recovered():
    obj = build_quadratic(SpectrumSpec(2, (2.0, 4.0), 42))
    assert np.allclose(np.linalg.eigvalsh(obj.Q), [2.0, 4.0], atol=1e-10)
    assert obj.beta == 2.0 and obj.K == 4.0


@pytest.mark.parametrize("seed", [0, 1, 7, 2**63])
def test_minimizer_residual(seed):
    obj = build_quadratic(SpectrumSpec(3, (1.0, 2.0, 5.0), seed))
    assert np.linalg.norm(obj.Q @ obj.x_star + obj.b) <= 1e-9
    validate_objective(obj)


def test_b_drawn_in_range_and_deterministic():
    a = build_quadratic(SpectrumSpec.linear(20, 2.0, 4.0, 3))
    b = build_quadratic(SpectrumSpec.linear(20, 2.0, 4.0, 3))
    c = build_quadratic(SpectrumSpec.linear(20, 2.0, 4.0, 4))
    assert np.all((a.b >= 1.0) & (a.b <= 5.0))
    assert np.array_equal(a.Q, b.Q) and np.array_equal(a.b, b.b)
    assert not np.array_equal(a.Q, c.Q)
    assert np.array_equal(a.Q, a.Q.T)


def test_random_orthogonal_is_orthogonal():
    U = random_orthogonal(50, np.random.default_rng(5))
    assert np.allclose(U.T @ U, np.eye(50), atol=1e-12)


@pytest.mark.parametrize(
    "n,eig",
    [(2, (0.0, 1.0)), (2, (-1.0, 1.0)), (2, (2.0, 1.0)), (2, (1.0,)), (1, (float("nan"),))],
)
def test_invalid_spectrum(n, eig):
    with pytest.raises((InvalidSpectrumError, DimensionError)):
        SpectrumSpec(n, eig, 0)


def test_linear_spectrum_single_dim_requires_equal_constants():
    assert SpectrumSpec.linear(1, 3.0, 3.0).eigenvalues == (3.0,)
    with pytest.raises(InvalidSpectrumError):
        SpectrumSpec.linear(1, 2.0, 3.0)


def test_value_examples():
    one = QuadraticObjective.from_matrix([[1.0]], [0.0])
    assert one.value([0.0]) == 0.0
    assert one.value([2.0]) == 2.0
    diag = QuadraticObjective.from_matrix([[2.0, 0.0], [0.0, 4.0]], [1.0, 1.0])
    assert diag.value([0.0, 0.0]) == 0.0


def test_gradient_examples():
    one = QuadraticObjective.from_matrix([[1.0]], [0.0])
    assert np.array_equal(one.gradient([1.0]), [1.0])
    obj = build_quadratic(SpectrumSpec.linear(6, 1.0, 3.0, 11))
    assert np.linalg.norm(obj.gradient(obj.x_star)) <= 1e-12


def test_dimension_mismatch():
    obj = build_quadratic(SpectrumSpec.linear(3, 1.0, 2.0, 0))
    with pytest.raises(DimensionError):
        obj.gradient(np.zeros(4))
    with pytest.raises(DimensionError):
        obj.value(np.zeros(2))


def test_gradient_matches_finite_differences():
    obj = build_quadratic(SpectrumSpec.linear(5, 1.0, 4.0, 2))
    rng = np.random.default_rng(0)
    x = rng.normal(size=5)
    h = 1e-6
    fd = np.array([(obj.value(x + h * e) - obj.value(x - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.allclose(fd, obj.gradient(x), atol=1e-6)


def test_strong_convexity_and_smoothness_on_random_pairs():
    obj = build_quadratic(SpectrumSpec.linear(8, 0.5, 3.0, 9))
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x, y = rng.normal(scale=3.0, size=(2, 8))
        gx, gy = obj.gradient(x), obj.gradient(y)
        d2 = float(np.dot(x - y, x - y))
        assert np.dot(gx - gy, x - y) >= obj.beta * d2 * (1 - 1e-12)
        assert np.linalg.norm(gx - gy) <= obj.K * np.sqrt(d2) * (1 + 1e-12)


def test_gap_is_nonnegative_and_zero_at_minimizer():
    obj = build_quadratic(SpectrumSpec.linear(4, 1.0, 2.0, 3))
    assert obj.gap(obj.x_star) == 0.0
    assert obj.gap(obj.x_star + 1.0) > 0.0


def test_contiguous_partition():
    p = BlockPartition.contiguous(10, 3)
    assert p.sizes == (4, 3, 3)
    assert p.offsets == (0, 4, 7)
    assert [(s.start, s.stop) for s in p.blocks()] == [(0, 4), (4, 7), (7, 10)]
    with pytest.raises(IndexError):
        p.block(3)
    with pytest.raises(ValueError):
        BlockPartition.contiguous(3, 4)
    with pytest.raises(ValueError):
        BlockPartition((2, 0))


def test_block_gradient_scalar_blocks():
    obj = build_quadratic(SpectrumSpec.linear(5, 1.0, 2.0, 8))
    eta = np.random.default_rng(2).normal(size=5)
    p = BlockPartition.contiguous(5, 5)
    full = obj.Q @ eta + obj.b
    for i in range(5):
        assert np.allclose(block_gradient(obj, eta, p, i), full[i : i + 1], atol=1e-13)


def test_block_gradient_concatenation_is_bitwise():
    obj = build_quadratic(SpectrumSpec.linear(4, 1.0, 2.0, 8))
    eta = np.random.default_rng(3).normal(size=4)
    p = BlockPartition((2, 2))
    joined = np.concatenate([block_gradient(obj, eta, p, i) for i in range(2)])
    assert np.array_equal(joined, obj.gradient(eta))


def test_block_gradient_zero_at_minimizer():
    obj = build_quadratic(SpectrumSpec.linear(6, 1.0, 2.0, 8))
    p = BlockPartition.contiguous(6, 4)
    for i in range(p.N):
        assert np.linalg.norm(block_gradient(obj, obj.x_star, p, i)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 12),
    lo=st.floats(0.1, 5.0),
    ratio=st.floats(1.0, 10.0),
    seed=st.integers(0, 2**64 - 1),
)
def test_built_objective_satisfies_contract(n, lo, ratio, seed):
    K = lo if n == 1 else lo * ratio
    obj = build_quadratic(SpectrumSpec.linear(n, lo, K, seed))
    eig = np.linalg.eigvalsh(obj.Q)
    assert abs(eig[0] - lo) <= 1e-9 * K and abs(eig[-1] - K) <= 1e-9 * K
    assert np.linalg.norm(obj.gradient(obj.x_star)) <= 1e-8 * max(1.0, np.linalg.norm(obj.b))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 30), data=st.data())
def test_partition_covers_indices(n, data):
    N = data.draw(st.integers(1, n))
    p = BlockPartition.contiguous(n, N)
    idx = np.concatenate([np.arange(n)[s] for s in p.blocks()])
    assert np.array_equal(idx, np.arange(n))
    assert max(p.sizes) - min(p.sizes) <= 1
