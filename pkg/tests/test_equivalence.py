import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfsimilar.covariance import TimeGrid, factorized_covariance
from selfsimilar.equivalence import (
    PerturbationKernel,
    constant_perturbation,
    hitsuda_w_covariance,
    lemma32_divergence,
    perturbation,
    perturbed_kernel,
    rn_log_density,
    selfsimilar_iff_l_zero_check,
    squared_norm,
    z_kernel,
)
from selfsimilar.fbm import fbm_f_function, fbm_volterra_kernel
from selfsimilar.kernels import GenericVolterraKernel, SelfSimilarKernel, constant_shape

BROWNIAN = SelfSimilarKernel(0.5, constant_shape(1.0))


def hitsuda_symbolic(l_expr, t, s):
    """Four-term covariance with sympy, for polynomial l(v, u)."""
    sp = pytest.importorskip("sympy")
    u, v, v1, v2 = sp.symbols("u v v1 v2", positive=True)
    l = sp.Lambda((v, u), l_expr(v, u))
    t, s = sp.nsimplify(t), sp.nsimplify(s)
    m = sp.Min(t, s)
    single = lambda upper: sp.integrate(sp.integrate(l(v, u), (v, u, upper)), (u, 0, m))
    cross = lambda lo1, hi1, lo2, hi2, top: sp.integrate(
        sp.integrate(sp.integrate(l(v1, u) * l(v2, u), (u, 0, top)), (v2, lo2, hi2)), (v1, lo1, hi1))
    # split the v1 ^ v2 kink on [0, t] x [0, s]
    a = sp.Min(t, s)
    triple = (cross(0, a, 0, v1, v2) + cross(0, a, v1, a, v1)
              + (cross(a, t, 0, s, v2) if t > s else 0) + (cross(0, t, a, s, v1) if s > t else 0))
    return float(sp.nsimplify(m - single(s) - single(t) + triple))


def test_z_and_perturbed_kernel_trivial():
    F = fbm_f_function(0.75)
    zero = constant_perturbation(0.0)
    assert z_kernel(F, zero, 2.0, 1.0) == 0.0
    k = fbm_volterra_kernel(0.75)
    kt = perturbed_kernel(k, zero)
    for t, s in [(2.0, 1.0), (1.0, 0.3), (0.5, 0.01)]:
        assert kt(t, s) == pytest.approx(k(t, s), rel=1e-15)


def test_perturbed_brownian_kernel():
    kt = perturbed_kernel(BROWNIAN, constant_perturbation(1.0))
    for t, s in [(2.0, 1.0), (1.0, 0.25), (0.5, 0.4)]:
        assert kt(t, s) == pytest.approx(1.0 - (t - s), rel=1e-13, abs=1e-15)
    assert z_kernel(constant_shape(), constant_perturbation(1.0), 2.0, 1.0) == pytest.approx(1.0, rel=1e-14)


def test_perturbed_fbm_kernel_against_oracle():
    # k(2,1) - 0.1 int_1^2 k_H(2,u) du with the 2F1 kernel in mpmath
    kt = perturbed_kernel(fbm_volterra_kernel(0.75), constant_perturbation(0.1))
    assert kt(2.0, 1.0) == pytest.approx(1.0277399503398076, rel=1e-9)


def test_hitsuda_trivial_and_point_values():
    assert hitsuda_w_covariance(constant_perturbation(0.0), 2.0, 1.0) == 1.0
    assert hitsuda_w_covariance(constant_perturbation(1.0), 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-10)
    kt = perturbed_kernel(BROWNIAN, constant_perturbation(1.0))
    assert factorized_covariance(kt, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("c", [0.5, -0.7, 2.0])
def test_hitsuda_constant_closed_form(c):
    # 1 - c + c**2 / 3 at (1, 1)
    assert hitsuda_w_covariance(constant_perturbation(c), 1.0, 1.0) == pytest.approx(1 - c + c * c / 3, rel=1e-10)


@pytest.mark.parametrize("t, s", [(1.0, 1.0), (1.0, 0.5), (0.25, 0.75)])
def test_hitsuda_against_symbolic_oracle(t, s):
    l = perturbation(lambda v, u: v, name="l=v")
    ref = hitsuda_symbolic(lambda v, u: v, t, s)
    assert hitsuda_w_covariance(l, t, s) == pytest.approx(ref, rel=1e-9)
    if (t, s) == (1.0, 1.0):
        assert ref == pytest.approx(7 / 15, rel=1e-15)


@pytest.mark.parametrize("t, s", [(1.0, 0.5), (0.3, 0.9), (0.8, 0.8)])
def test_hitsuda_cross_route(t, s):
    l = perturbation(lambda v, u: 1.0 + u * v, name="l=1+uv")
    a = hitsuda_w_covariance(l, t, s)
    b = factorized_covariance(perturbed_kernel(BROWNIAN, l), t, s)
    assert a == pytest.approx(b, rel=1e-8)


def test_hitsuda_domain():
    with pytest.raises(ValueError):
        hitsuda_w_covariance(constant_perturbation(1.0), 0.0, 1.0)


def test_rn_density_zero_kernel():
    W = np.array([[0.0, 0.3, -0.1, 0.5]])
    np.testing.assert_array_equal(rn_log_density(constant_perturbation(0.0), [0.0, 0.1, 0.2, 0.3], W), [0.0])
    assert rn_log_density(constant_perturbation(0.0), [0.0, 0.1], np.array([0.0, 0.2])) == 0.0


def test_rn_density_hand_computed():
    # two steps: phi_1 = 0, phi_2 = c dW_1
    c, dt = 0.5, 0.5
    W = np.array([0.0, 0.3, 1.0])
    dW1, dW2 = 0.3, 0.7
    expected = c * dW1 * dW2 - 0.5 * (c * dW1) ** 2 * dt
    assert rn_log_density(constant_perturbation(c), [0.0, 0.5, 1.0], W) == pytest.approx(expected, rel=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(-2.0, 2.0))
def test_rn_density_is_exact_martingale(w1, w2, c):
    # E[exp(log density) | first two increments] = 1 exactly: integrate the
    # last increment out with Gauss-Hermite nodes (probabilists' weights)
    x, w = np.polynomial.hermite_e.hermegauss(60)
    dt = 1.0 / 3.0
    times = np.array([0.0, dt, 2 * dt, 1.0])
    dW3 = x * math.sqrt(dt)
    W = np.column_stack([np.zeros_like(x), np.full_like(x, w1), np.full_like(x, w1 + w2), w1 + w2 + dW3])
    l = perturbation(lambda t, s: c * (1.0 + t * s), name="l")
    rho = np.exp(rn_log_density(l, times, W))
    rho_prev = np.exp(rn_log_density(l, times[:3], W[0, :3]))
    assert np.sum(w * rho) / math.sqrt(2 * math.pi) == pytest.approx(rho_prev, rel=1e-12)


def test_rn_density_argument_errors():
    l = constant_perturbation(0.5)
    with pytest.raises(ValueError):
        rn_log_density(l, [0.1, 0.2], np.zeros((1, 2)))
    with pytest.raises(ValueError):
        rn_log_density(l, [0.0, 0.2, 0.1], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        rn_log_density(l, [0.0, 0.2], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        rn_log_density(l, [0.0, 0.2], np.array([[0.0, np.nan]]))


def test_lemma_examples():
    ones = lambda u: np.ones_like(u)
    rep = lemma32_divergence(ones, 1.0, [math.exp(-1.0)], g_norm_sq=1.0)
    assert rep.values[0] == pytest.approx(1.0, rel=1e-12)
    rep = lemma32_divergence(ones, 1.0, [1e-1, 1e-2, 1e-3])
    np.testing.assert_allclose(np.array(rep.values) / rep.values[0], [1.0, 2.0, 3.0], rtol=1e-10)
    rep = lemma32_divergence(lambda u: u, 2.0, [0.5])
    assert rep.values[0] == pytest.approx(math.log(4.0) / 3.0, rel=1e-10)


def test_squared_norm_of_minus_one_homogeneous_kernel():
    # l(t, s) = g(s / t) / t has norm log(T / eps) int g**2 on [eps, T]
    k = GenericVolterraKernel(lambda t, s, lag: 1.0 / t)
    assert squared_norm(k, 1e-3, 1.0) == pytest.approx(math.log(1e3), rel=1e-10)


def test_validation_rejects_inverse_t_kernel():
    with pytest.raises(ValueError, match="square integrable"):
        perturbation(lambda t, s: 1.0 / t)


def test_validation_accepts_mild_singularity():
    l = perturbation(lambda t, s: t**-0.25, origin_exponent=None)
    assert isinstance(l, PerturbationKernel)
    with pytest.raises(ValueError):
        constant_perturbation(1.0, horizon=0.0)


def test_on_grid_allows_zero_time():
    l = perturbation(lambda t, s: t + s)
    M = l.on_grid([0.0, 0.5, 1.0])
    np.testing.assert_allclose(M, [[0, 0, 0], [0.5, 0, 0], [1.0, 1.5, 0]])


def test_selfsimilar_iff_l_zero():
    grid = TimeGrid.uniform_grid(1.0, 4)
    assert selfsimilar_iff_l_zero_check(fbm_volterra_kernel(0.75), constant_perturbation(0.0), grid).passed
    rep = selfsimilar_iff_l_zero_check(BROWNIAN, constant_perturbation(1.0), grid)
    assert not rep.passed and rep.worst_deviation > 1e-2
