import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcprox.blocks import (
    BlockStructure,
    BlockVector,
    Problem,
    QuadraticBlock,
    SmoothBlockOracle,
    Stepsize,
    eval_F,
    grad_F,
    norm_in_metric,
    quadratic_block,
    sine_block,
    zero_block,
)
from bcprox.errors import ContractError, NumericError, StructureError

from conftest import random_problem


def scalar_quad(a):
    return quadratic_block([[a]])


def test_structure_basics():
    s = BlockStructure((2, 1, 3))
    assert s.N == 3 and s.size == 6 and not s.is_uniform
    assert s.slice(1) == slice(2, 3)
    np.testing.assert_array_equal(s.expand([1.0, 2.0, 3.0]), [1, 1, 2, 3, 3, 3])
    np.testing.assert_allclose(s.block_sqnorms(np.arange(6.0)), [1.0, 4.0, 9 + 16 + 25])
    assert BlockStructure.uniform(3, 2).is_uniform


@pytest.mark.parametrize("dims", [(), (0,), (2, -1)])
def test_structure_rejects_bad_dims(dims):
    with pytest.raises(StructureError):
        BlockStructure(dims)


def test_block_vector_views_and_arithmetic():
    v = BlockVector.from_blocks([[1.0, 2.0], [3.0]])
    assert v.structure.dims == (2, 1)
    v.block(1)[0] = 5.0
    np.testing.assert_array_equal(v.data, [1, 2, 5])
    w = 2 * v - v
    assert w == v
    assert (-v).data[0] == -1.0
    with pytest.raises(StructureError):
        v + BlockVector.from_blocks([[1.0], [2.0, 3.0]])


def test_block_vector_rejects_nonfinite_and_wrong_length():
    s = BlockStructure((2,))
    with pytest.raises(NumericError):
        BlockVector(s, [1.0, np.nan])
    with pytest.raises(StructureError):
        BlockVector(s, [1.0, 2.0, 3.0])


def test_eval_F_examples():
    p = Problem([quadratic_block([[2.0]]), quadratic_block([[4.0]])])  # x^2, 2x^2
    assert eval_F(p, [1.0, 1.0]) == pytest.approx(1.5)
    pz = Problem([zero_block(2), zero_block(1)])
    assert eval_F(pz, [3.0, -1.0, 2.0]) == 0.0
    p3 = Problem([quadratic_block(np.eye(2))] * 3)
    a = np.array([2.0, 0.0])
    assert eval_F(p3, np.tile(a, 3)) == pytest.approx(2.0)


def test_grad_F_examples():
    p = Problem([scalar_quad(1.0), scalar_quad(1.0)])
    np.testing.assert_allclose(grad_F(p, [4.0, 6.0]).data, [2.0, 3.0])
    pc = Problem([SmoothBlockOracle(1, lambda x: 3.0, lambda x: np.zeros(1), 0.0)] * 2)
    np.testing.assert_array_equal(grad_F(pc, [1.0, 2.0]).data, [0.0, 0.0])
    p1 = Problem([QuadraticBlock(2 * np.eye(2), [1.0, 1.0])])
    np.testing.assert_allclose(grad_F(p1, [0.0, 0.0]).data, [1.0, 1.0])


def test_grad_F_nonfinite_reports_block():
    bad = SmoothBlockOracle(1, lambda x: 0.0, lambda x: np.array([np.inf]), 1.0)
    p = Problem([scalar_quad(1.0), bad])
    with pytest.raises(NumericError) as err:
        grad_F(p, [1.0, 1.0])
    assert err.value.block == 1


def test_eval_F_dimension_mismatch():
    p = Problem([scalar_quad(1.0), scalar_quad(1.0)])
    with pytest.raises(StructureError):
        eval_F(p, [1.0, 2.0, 3.0])


def test_norm_in_metric_examples():
    s = BlockStructure((1, 1))
    assert norm_in_metric([3.0, 4.0], [1.0, 1.0], s) == pytest.approx(5.0)
    assert norm_in_metric([1.0, 1.0], 1.0 / np.array([0.5, 0.5]), s) == pytest.approx(2.0)
    assert norm_in_metric(BlockVector.zeros(s), [1.0, 2.0]) == 0.0
    with pytest.raises(ContractError):
        norm_in_metric([1.0, 1.0], [1.0, -1.0], s)


def test_quadratic_block_constants():
    H = np.diag([0.5, 3.0])
    b = QuadraticBlock(H, [1.0, 0.0])
    assert b.lipschitz == pytest.approx(3.0) and b.strong_convexity == pytest.approx(0.5)
    with pytest.raises(ContractError):
        QuadraticBlock([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ContractError):
        QuadraticBlock(np.diag([1.0, -1.0]))
    # tiny negative eigenvalues from rounding are clamped
    assert QuadraticBlock(np.diag([-1e-13, 1.0])).strong_convexity == 0.0


def test_sine_block_constants():
    b = sine_block(1.0, -2.0, dim=2)
    assert b.lipschitz == 3.0 and b.strong_convexity == 0.0
    assert sine_block(2.0, 0.5, dim=1).strong_convexity == 1.5


def test_oracle_rejects_mu_above_L():
    with pytest.raises(ContractError):
        SmoothBlockOracle(1, lambda x: 0.0, lambda x: x, lipschitz=1.0, strong_convexity=2.0)


def test_stepsize_validation():
    p = Problem([scalar_quad(2.0), scalar_quad(4.0)])
    Stepsize([0.99, 0.49]).validate(p)
    with pytest.raises(ContractError):
        Stepsize([1.0, 0.4]).validate(p)  # gamma_1 L_1 = N exactly
    with pytest.raises(ContractError):
        Stepsize([0.5]).validate(p)
    with pytest.raises(ContractError):
        Stepsize([0.5, -1.0])
    d = Stepsize.default(p)
    np.testing.assert_allclose(d.gammas, 0.95 * 2 / np.array([2.0, 4.0]))
    np.testing.assert_allclose(d.xi(p), [0.05, 0.05])


def test_metric_accessors():
    p = Problem([QuadraticBlock(np.diag([1.0, 3.0])), scalar_quad(2.0)])
    np.testing.assert_allclose(p.lambda_F, [1.5, 1.0])
    np.testing.assert_allclose(p.mu_F, [0.5, 1.0])


def test_gradients_are_lipschitz_and_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(40):
        p = random_problem(rng, convex=bool(rng.integers(2)))
        for f in p.blocks:
            for _ in range(10):
                a, b = rng.standard_normal((2, f.dim)) * 3
                assert np.linalg.norm(f.grad(a) - f.grad(b)) <= f.lipschitz * np.linalg.norm(a - b) * (1 + 1e-12) + 1e-12
        x = rng.standard_normal(p.structure.size)
        g = p.grad_F(x).data
        h = 1e-6
        fd = np.array([(p.F(x + h * e) - p.F(x - h * e)) / (2 * h) for e in np.eye(x.size)])
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_descent_lemma_sandwich(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, convex=bool(rng.integers(2)))
    x, w = rng.standard_normal((2, p.structure.size)) * 2
    lhs = abs(p.F(w) - p.F(x) - p.grad_F(x).data @ (w - x))
    rhs = 0.5 * p.structure.block_sqnorms(w - x) @ p.lambda_F
    assert lhs <= rhs * (1 + 1e-9) + 1e-12
