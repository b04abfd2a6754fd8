import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfsimilar.numerics import (
    ConvergenceError,
    QuadratureSpec,
    beta_fn,
    gamma_fn,
    integrate,
    integrate_batch,
    integrate_offsets,
)

# Frozen from mpmath.gamma at 40 digits.
GAMMA_REF = {
    0.25: 3.6256099082219083,
    0.5: 1.772453850905516,
    1.5: 0.88622692545275801,
    3.7: 4.170651783796604,
    10.0: 362880.0,
    0.01: 99.432585119150602,
    25.5: 3.0867705405286968e24,
}


@pytest.mark.parametrize("x, ref", sorted(GAMMA_REF.items()))
def test_gamma_matches_frozen_oracle(x, ref):
    assert gamma_fn(x) == pytest.approx(ref, rel=1e-13)


def test_gamma_trivial_values():
    assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-15)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.5, float("nan"), float("inf")])
def test_gamma_domain(x):
    with pytest.raises(ValueError):
        gamma_fn(x)


def test_gamma_agrees_with_live_mpmath():
    mpmath = pytest.importorskip("mpmath")
    for x in np.linspace(0.05, 30.0, 41):
        assert gamma_fn(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)


def test_beta_values():
    assert beta_fn(1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert beta_fn(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)
    # Gamma(0.5) Gamma(0.25) / Gamma(0.75), frozen from mpmath
    assert beta_fn(0.5, 0.25) == pytest.approx(5.244115108584239, rel=1e-13)
    # B(2, 0.8) = 1 / (2 * 0.9 * 0.8)
    assert beta_fn(2.0, 0.8) == pytest.approx(0.69444444444444439, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0))
def test_beta_symmetric_and_recurrence(a, b):
    assert beta_fn(a, b) == pytest.approx(beta_fn(b, a), rel=1e-13)
    # B(a+1, b) = B(a, b) a / (a + b)
    assert beta_fn(a + 1, b) == pytest.approx(beta_fn(a, b) * a / (a + b), rel=1e-12)


def test_integrate_constant():
    assert integrate(lambda x: np.ones_like(x), 0.0, 2.0) == pytest.approx(2.0, abs=1e-14)


def test_integrate_inverse_sqrt():
    spec = QuadratureSpec(singularity_left=-0.5)
    assert integrate(lambda x: x**-0.5, 0.0, 1.0, spec) == pytest.approx(2.0, rel=1e-12)


def test_integrate_right_singularity_is_beta():
    # int_0^1 x (1 - x)**(-0.2) dx = B(2, 0.8)
    spec = QuadratureSpec(singularity_right=-0.2)
    val = integrate_offsets(lambda x, dl, dr: x * dr**-0.2, 0.0, 1.0, spec)
    assert val == pytest.approx(beta_fn(2.0, 0.8), rel=1e-12)
    assert val == pytest.approx(0.69444444444444439, rel=1e-12)


def test_integrate_both_endpoints_singular():
    spec = QuadratureSpec(singularity_left=-0.7, singularity_right=-0.4)
    val = integrate_offsets(lambda x, dl, dr: dl**-0.7 * dr**-0.4, 0.0, 1.0, spec)
    assert val == pytest.approx(beta_fn(0.3, 0.6), rel=1e-10)


def test_integrate_offsets_are_accurate_near_endpoints():
    # integrand depends on the right offset only; x near b would cancel badly
    spec = QuadratureSpec(singularity_right=-0.9)
    b = 1.0 + 1e-8
    h = b - 1.0  # exact: the representable interval length
    val = integrate_offsets(lambda x, dl, dr: dr**-0.9, 1.0, b, spec)
    assert val == pytest.approx(10.0 * h**0.1, rel=1e-11)


def test_integrate_batch_matches_scalar_calls():
    a = np.array([0.0, 0.5, 1.0])
    b = np.array([1.0, 2.0, 1.5])
    spec = QuadratureSpec(singularity_left=-0.3)
    batch = integrate_batch(lambda x, dl, dr: dl**-0.3 * np.cos(x), a, b, spec)
    single = [integrate_offsets(lambda x, dl, dr: dl**-0.3 * np.cos(x), ai, bi, spec) for ai, bi in zip(a, b)]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def test_uniform_rule_on_smooth_integrand():
    spec = QuadratureSpec(node_count=8, graded=False)
    assert integrate(np.exp, 0.0, 1.0, spec) == pytest.approx(math.e - 1.0, rel=1e-13)


def test_ungraded_rule_refuses_singularities():
    with pytest.raises(ValueError):
        QuadratureSpec(graded=False, singularity_left=-0.5)


@pytest.mark.parametrize("kwargs", [
    {"node_count": 1},
    {"singularity_left": -1.0},
    {"singularity_right": -1.5},
    {"relative_tolerance": 0.0},
    {"max_level": 0},
])
def test_quadrature_spec_validation(kwargs):
    with pytest.raises(ValueError):
        QuadratureSpec(**kwargs)


def test_reversed_interval_rejected():
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)


def test_empty_interval_is_zero():
    assert integrate(np.exp, 0.5, 0.5) == 0.0


def test_convergence_error_on_undeclared_singularity():
    spec = QuadratureSpec(relative_tolerance=1e-14, max_level=2)
    with pytest.raises(ConvergenceError) as info:
        integrate(lambda x: np.abs(x - 1 / 3) ** -0.9, 0.0, 1.0, spec)
    assert np.isfinite(info.value.estimate)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.95, 2.0), st.floats(0.1, 5.0))
def test_power_law_integrals(lam, b):
    spec = QuadratureSpec(singularity_left=lam if lam < 0 else None)
    val = integrate(lambda x: x**lam, 0.0, b, spec)
    assert val == pytest.approx(b ** (lam + 1) / (lam + 1), rel=1e-9)
