import numpy as np
import pytest

from bcprox.accel import (
    AccelConfig,
    accel_init,
    accel_parameters,
    accel_step,
    fbe_gradient_scaled,
    fbe_scaled,
    q_sqnorm,
    scaled_metric,
    sigma_of,
    solve_accel,
    to_scaled,
)
from bcprox.blocks import BlockStructure, Problem, QuadraticBlock, Stepsize, quadratic_block, sine_block
from bcprox.errors import ConfigError, NumericError
from bcprox.fbe import FbeEvaluator
from bcprox.prox import L0, L1
from bcprox.rates import accelerated_sublinear_bound
from bcprox.sampling import SamplerSpec, make_sampler
from bcprox.solver import Status, proximal_gradient
from bcprox.structured import SeparableG

from conftest import random_problem, random_step


def quad_problem(rng, strongly=False, G="separable"):
    return random_problem(rng, convex=True, strongly=strongly, G=G)


def test_initial_parameters():
    p = Problem([quadratic_block([[0.0]])] * 2)  # sigma = 0
    st = accel_init(p, np.zeros(2), Stepsize([1.0, 1.0]))
    assert st.sigma == 0 and st.eta == pytest.approx(0.25)
    accel_step(st, 0)
    assert st.tau == pytest.approx(2 / 3) and st.eta == pytest.approx(3 / 8)
    accel_step(st, 1)
    assert st.tau == pytest.approx(2 / 4) and st.eta == pytest.approx(4 / 8)


def test_strongly_convex_parameters():
    tau, eta = accel_parameters(1, 1.0)
    assert tau == pytest.approx(2 / (1 + np.sqrt(5)))
    assert eta == pytest.approx(1 / tau)
    assert accel_parameters(3, 0.0) == (1.0, pytest.approx(1 / 9))


def test_degenerate_quadratic_metric():
    p = Problem([QuadraticBlock(np.zeros((2, 2))), QuadraticBlock(np.zeros((1, 1)))])
    step = Stepsize([0.7, 1.3])
    for (Q, Qh, Qih), g in zip(scaled_metric(p, step), step.gammas):
        np.testing.assert_allclose(Q, np.eye(Q.shape[0]) / g)
        np.testing.assert_allclose(Qh @ Qh, Q)
        np.testing.assert_allclose(Qih @ Qh, np.eye(Q.shape[0]), atol=1e-14)
    assert sigma_of(p, step) == 0.0


def test_rejects_nonquadratic_and_nonconvex():
    with pytest.raises(ConfigError):
        accel_init(Problem([sine_block(1.0, 2.0, dim=1)]), [0.0], [0.2])
    p = Problem([quadratic_block([[1.0]])], SeparableG(L0(0.1), BlockStructure((1,))))
    with pytest.raises(ConfigError):
        accel_init(p, [0.0], [0.5])


def test_one_step_transcription():
    # N = 2 scalar blocks, H = (1, 1), q = 0, g = l1; every line written out by hand.
    # mu_i = 1, so this exercises the strongly convex branch.
    lam, gam, N = 0.3, np.array([1.2, 0.8]), 2
    p = Problem([quadratic_block([[1.0]])] * 2, SeparableG(L1(lam), BlockStructure((1, 1))))
    x0 = np.array([1.5, -0.7])
    soft = lambda u, t: np.sign(u) * max(abs(u) - t * lam, 0.0)

    sigma = min(gam * 1.0) / N  # mu_i = 1
    tau = 2 / (1 + np.sqrt(1 + 4 * N**2 / sigma))
    eta = 1 / (tau * N**2)
    r0 = gam / N * x0
    v0, w0 = r0.copy(), x0.copy()
    z0 = np.array([soft(x0[j] - r0[j], gam[j]) for j in range(2)])
    i = 1
    y1 = x0.copy()
    y1[i] = z0[i]
    d = gam[i] / N * z0[i] - r0[i]
    Uid = np.zeros(2)
    Uid[i] = d
    Uidz = np.zeros(2)
    Uidz[i] = z0[i] - x0[i]
    v1 = (v0 + eta * sigma * r0 + N * eta * Uid) / (1 + eta * sigma)
    w1 = (w0 + eta * sigma * x0 + N * eta * Uidz) / (1 + eta * sigma)
    x1 = tau * w1 + (1 - tau) * y1
    r1 = tau * v1 + (1 - tau) * (r0 + Uid)
    z1 = np.array([soft(x1[j] - r1[j], gam[j]) for j in range(2)])

    st = accel_init(p, x0, Stepsize(gam))
    np.testing.assert_allclose(st.z, z0, rtol=1e-15)
    accel_step(st, i)
    for got, want in ((st.y, y1), (st.v, v1), (st.w, w1), (st.x, x1), (st.r, r1), (st.z, z1)):
        np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-15)
    assert st.sigma == pytest.approx(sigma) and st.eta == pytest.approx(eta) and st.tau == pytest.approx(tau)


def _direct_scheme(p, x0, step, indices):
    """Accelerated updates with every gradient and prox recomputed from scratch (no caches)."""
    ev = FbeEvaluator(p, step)
    N = p.N
    sigma = sigma_of(p, step)
    tau, eta = accel_parameters(N, sigma)
    x = np.array(x0, dtype=float)
    w = x.copy()
    z = ev.T(x)
    out = []
    for k, i in enumerate(indices):
        s = p.structure.slice(i)
        y = x.copy()
        y[s] = z[s]
        wn = w + eta * sigma * x
        wn[s] += N * eta * (z[s] - x[s])
        w = wn / (1 + eta * sigma)
        if sigma == 0:
            eta, tau = (k + 3) / (2 * N**2), 2 / (k + 3)
        x = tau * w + (1 - tau) * y
        z = ev.T(x)
        out.append((x.copy(), y.copy(), z.copy()))
    return out


@pytest.mark.parametrize("strongly", [False, True])
def test_recursive_caches_match_direct_scheme(strongly):
    rng = np.random.default_rng(21 + strongly)
    for _ in range(5):
        p = quad_problem(rng, strongly=strongly)
        step = random_step(rng, p)
        x0 = rng.standard_normal(p.structure.size)
        idx = [int(I[0]) for I in make_sampler(SamplerSpec.uniform(p.N, seed=2), p.N).stream(200)]
        ref = _direct_scheme(p, x0, step, idx)
        st = accel_init(p, x0, step)
        for i, (x, y, z) in zip(idx, ref):
            accel_step(st, i)
            np.testing.assert_allclose(st.x, x, atol=1e-10)
            np.testing.assert_allclose(st.y, y, atol=1e-10)
            np.testing.assert_allclose(st.z, z, atol=1e-10)


def test_scalar_gradient_case_converges():
    p = Problem([quadratic_block([[1.0]])])
    cfg = AccelConfig(step=[0.5], max_iters=200)
    res = solve_accel(p, [1.0], cfg)
    assert abs(res.y.data[0]) < 1e-8
    f = res.trace.phi_z
    assert f[-1] < f[0]


def test_fixed_point_is_preserved(rng):
    for _ in range(5):
        p = quad_problem(rng, strongly=True)
        step = random_step(rng, p)
        xstar, _, _, _ = proximal_gradient(p, np.zeros(p.structure.size), step)
        st = accel_init(p, xstar.data, step)
        for k in range(20):
            accel_step(st, k % p.N)
        np.testing.assert_allclose(st.x, xstar.data, atol=1e-12)
        np.testing.assert_allclose(st.z, xstar.data, atol=1e-12)


def test_scaled_gradient_examples():
    p = Problem([quadratic_block([[1.0]])])
    step = Stepsize([0.5])
    # T(x) = x/2 and Q = 1/0.5 - 1 = 1
    assert fbe_gradient_scaled(p, [3.0], step).data[0] == pytest.approx(1.5)
    h = 1e-6
    fd = (fbe_scaled(p, [3.0 + h], step) - fbe_scaled(p, [3.0 - h], step)) / (2 * h)
    assert fd == pytest.approx(1.5, abs=1e-6)


def test_scaled_gradient_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(20):
        p = quad_problem(rng, G=str(rng.choice(["separable", "consensus", "sharing"])))
        step = random_step(rng, p)
        x = rng.standard_normal(p.structure.size)
        xt = to_scaled(p, x, step).data
        g = fbe_gradient_scaled(p, x, step).data
        fd = np.array([(fbe_scaled(p, xt + h * e, step) - fbe_scaled(p, xt - h * e, step)) / (2 * h) for e in np.eye(x.size)])
        np.testing.assert_allclose(fd, g, atol=1e-5)


def test_scaled_gradient_vanishes_at_minimizer(rng):
    p = quad_problem(rng, strongly=True)
    step = random_step(rng, p)
    xstar, _, _, _ = proximal_gradient(p, np.zeros(p.structure.size), step)
    assert np.max(np.abs(fbe_gradient_scaled(p, xstar, step).data)) <= 1e-10


def test_scaled_envelope_convex_block_smooth_strongly_convex(rng):
    for _ in range(30):
        p = quad_problem(rng, strongly=bool(rng.integers(2)))
        step = random_step(rng, p)
        sigma = sigma_of(p, step)
        mats = scaled_metric(p, step)
        grad = lambda xt: fbe_gradient_scaled(p, _unscale(p, mats, xt), step).data
        a, b = rng.standard_normal((2, p.structure.size)) * 2
        fa, fb, ga = fbe_scaled(p, a, step), fbe_scaled(p, b, step), grad(a)
        tol = 1e-9 * (1 + abs(fa) + abs(fb))
        # convexity (with the sigma-strong-convexity margin) and monotone gradient
        assert fb >= fa + ga @ (b - a) + 0.5 * sigma * (b - a) @ (b - a) - tol
        assert (grad(b) - ga) @ (b - a) >= -tol
        # 1-smoothness along each block
        for i in range(p.N):
            s = p.structure.slice(i)
            t = np.zeros_like(a)
            t[s] = rng.standard_normal(s.stop - s.start)
            assert fbe_scaled(p, a + t, step) <= fa + ga @ t + 0.5 * t @ t + tol


def _unscale(p, mats, xt):
    out = np.empty_like(xt)
    for m, s in zip(mats, p.structure.slices):
        out[s] = m[2] @ xt[s]
    return out


def test_q_norm_matches_metric(rng):
    p = quad_problem(rng)
    step = random_step(rng, p)
    x = rng.standard_normal(p.structure.size)
    assert q_sqnorm(p, x, step) == pytest.approx(float(to_scaled(p, x, step).data @ to_scaled(p, x, step).data))


def test_sublinear_bound_on_average(rng):
    p = quad_problem(np.random.default_rng(4))
    step = random_step(np.random.default_rng(5), p, 0.5, 0.9)
    x0 = np.random.default_rng(6).standard_normal(p.structure.size) * 3
    xstar, phistar, _, _ = proximal_gradient(p, x0, step)
    K = 200
    gaps = np.zeros(K + 1)
    seeds = 30
    for seed in range(seeds):
        res = solve_accel(p, x0, AccelConfig(step=step, seed=seed, max_iters=K))
        f = res.trace.fbe
        gaps[: f.size] += f - phistar
    gaps /= seeds
    bound = accelerated_sublinear_bound(p.N, q_sqnorm(p, x0 - xstar.data, step), np.arange(K + 1))
    assert np.all(gaps <= bound + 1e-12)


def test_cache_drift_is_detected(rng):
    p = quad_problem(rng)
    st = accel_init(p, rng.standard_normal(p.structure.size), random_step(rng, p))
    st.r = st.r + 1e-3
    with pytest.raises(NumericError):
        st.refresh()


def test_solve_accel_stops_on_residual(rng):
    p = quad_problem(rng, strongly=True)
    res = solve_accel(p, np.ones(p.structure.size), AccelConfig(step=random_step(rng, p), max_iters=20_000, tol_residual=1e-9))
    assert res.status == Status.CONVERGED
    assert res.trace[-1].indices == ()
