"""Fractional Brownian motion: covariance, canonical kernel and its shape F.

For H > 1/2 the canonical kernel is

    k_H(t, s) = c_H s**(1/2-H) * int_s^t (u-s)**(H-3/2) u**(H-1/2) du,

and for H < 1/2

    k_H(t, s) = d_H [ (t/s)**(H-1/2) (t-s)**(H-1/2)
                      - (H-1/2) s**(1/2-H) int_s^t u**(H-3/2) (u-s)**(H-1/2) du ].

Both are homogeneous of degree H - 1/2, so ``k_H(t, s) = t**(H-1/2) F(s/t)``.
The integrals are computed by singular-endpoint quadrature.  Evaluations
are batched and chunked to bound memory.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import FFunction, GenericVolterraKernel, SelfSimilarKernel, constant_shape
from .numerics import QuadratureSpec, beta_fn, integrate_batch

__all__ = [
    "HURST_RANGE",
    "check_hurst",
    "fbm_covariance",
    "c_H",
    "d_H",
    "fbm_kernel",
    "fbm_f_function",
    "fbm_volterra_kernel",
    "fbm_generic_kernel",
]

#: Hurst indices accepted by the public API.  Outside this range Gamma
#: arguments approach 0 and the quadrature exponents approach -1.
HURST_RANGE = (0.05, 0.95)

KERNEL_RTOL = 1e-10
_CHUNK = 512


def check_hurst(H: float, hurst_range=HURST_RANGE) -> float:
    """Validate a Hurst index and return it as a float."""
    H = float(H)
    lo, hi = hurst_range
    if not (math.isfinite(H) and 0.0 < H < 1.0):
        raise ValueError(f"Hurst index must lie in (0, 1), got {H!r}")
    if not lo <= H <= hi:
        raise ValueError(f"Hurst index {H!r} outside the supported range [{lo}, {hi}]")
    return H


def fbm_covariance(H: float, t, s):
    """``R_H(t, s) = (t**2H + s**2H - |t - s|**2H) / 2`` for 0 < H <= 1."""
    H = float(H)
    if not 0.0 < H <= 1.0:
        raise ValueError(f"fbm_covariance needs 0 < H <= 1, got {H!r}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise ValueError("fbm_covariance needs non-negative times")
    h2 = 2.0 * H
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def c_H(H: float) -> float:
    """Normalising constant of the H > 1/2 kernel.

    Finite for every H > 1/2; it tends to 0 as H -> 1/2+ while the kernel
    integral diverges, their product tending to the Brownian kernel 1.
    """
    if not 0.5 < H < 1.0:
        raise ValueError(f"c_H is defined for 1/2 < H < 1, got {H!r}")
    return math.sqrt(H * (2.0 * H - 1.0) / beta_fn(2.0 - 2.0 * H, H - 0.5))


def d_H(H: float) -> float:
    """Normalising constant of the H < 1/2 kernel."""
    if not 0.0 < H < 0.5:
        raise ValueError(f"d_H is defined for 0 < H < 1/2, got {H!r}")
    return math.sqrt(2.0 * H / ((1.0 - 2.0 * H) * beta_fn(1.0 - 2.0 * H, H + 0.5)))


def _chunked(fn, *arrays):
    n = arrays[0].size
    if n <= _CHUNK:
        return fn(*arrays)
    out = np.empty(n)
    for i in range(0, n, _CHUNK):
        out[i:i + _CHUNK] = fn(*(a[i:i + _CHUNK] for a in arrays))
    return out


def _rough_tail(H, v, w, rtol):
    """``Q(v) = int_v^1 x**(-2H) (1-x)**(H-1/2) dx`` with ``w = 1 - v``.

    Substituting ``u = s / x`` turns ``int_s^t u**(H-3/2) (u-s)**(H-1/2) du``
    into ``s**(2H-1) Q(s/t)``; this form has no near-singularity as s -> 0.
    """
    out = np.empty(v.shape)
    low = v <= 0.5
    if np.any(low):
        # complement of the full Beta integral; left exponent -2H
        spec = QuadratureSpec(singularity_left=-2.0 * H, relative_tolerance=rtol)
        head = integrate_batch(
            lambda x, dl, dr: dl ** (-2.0 * H) * (1.0 - x) ** (H - 0.5),
            np.zeros(int(low.sum())), v[low], spec,
        )
        out[low] = beta_fn(1.0 - 2.0 * H, H + 0.5) - head
    high = ~low
    if np.any(high):
        # y = 1 - x over [0, w]; left exponent H - 1/2
        spec = QuadratureSpec(singularity_left=H - 0.5, relative_tolerance=rtol)
        out[high] = integrate_batch(
            lambda y, dl, dr: (1.0 - y) ** (-2.0 * H) * dl ** (H - 0.5),
            np.zeros(int(high.sum())), w[high], spec,
        )
    return out


def _smooth_part_regular(H, t, s, rtol):
    # int_s^t (u-s)**(H-3/2) u**(H-1/2) du
    spec = QuadratureSpec(singularity_left=H - 1.5, relative_tolerance=rtol)

    def g(u, dl, dr):
        return dl ** (H - 1.5) * u ** (H - 0.5)

    return integrate_batch(g, s, t, spec)


def fbm_kernel(H: float, t, s, lag=None, rtol: float = KERNEL_RTOL):
    """Canonical fBm kernel ``k_H(t, s)`` from its integral formula.

    Vectorised over ``t`` and ``s``; zero where ``s >= t``.  ``lag`` may
    supply ``t - s`` exactly for points close to the diagonal.
    """
    H = check_hurst(H)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    lag = t - s if lag is None else np.broadcast_to(np.asarray(lag, dtype=float), t.shape)
    if np.any(s <= 0) or np.any(t <= 0):
        raise ValueError("fbm_kernel is singular at s = 0; times must be positive")
    out = np.zeros(t.shape)
    live = lag > 0
    if not np.any(live):
        return out if out.ndim else float(out)
    tl, sl, dl = t[live], s[live], lag[live]
    if H == 0.5:
        vals = np.ones(tl.shape)
    elif H > 0.5:
        integral = _chunked(lambda a, b: _smooth_part_regular(H, b, a, rtol), sl, tl)
        vals = c_H(H) * sl ** (0.5 - H) * integral
    else:
        tail = _chunked(lambda a, b: _rough_tail(H, a, b, rtol), sl / tl, dl / tl)
        integral = sl ** (2.0 * H - 1.0) * tail
        vals = d_H(H) * (
            (tl / sl) ** (H - 0.5) * dl ** (H - 0.5)
            - (H - 0.5) * sl ** (0.5 - H) * integral
        )
    out[live] = vals
    return out if out.ndim else float(out)


def _f_regular(H, v, w, rtol):
    # c_H v**(1/2-H) w**(H-1/2) int_0^1 x**(H-3/2) (v + w x)**(H-1/2) dx
    spec = QuadratureSpec(singularity_left=H - 1.5, relative_tolerance=rtol)
    vv, ww = v[:, None], w[:, None]

    def g(x, dl, dr):
        return dl ** (H - 1.5) * (vv + ww * x) ** (H - 0.5)

    zeros = np.zeros(v.shape)
    integral = integrate_batch(g, zeros, zeros + 1.0, spec)
    return c_H(H) * v ** (0.5 - H) * w ** (H - 0.5) * integral


def _f_rough(H, v, w, rtol):
    # d_H [ (1/v - 1)**(H-1/2) + (1/2-H) v**(1/2-H) int_v^1 z**(H-3/2) (z-v)**(H-1/2) dz ]
    return d_H(H) * (
        (w / v) ** (H - 0.5) + (0.5 - H) * v ** (H - 0.5) * _rough_tail(H, v, w, rtol)
    )


def fbm_f_function(H: float, rtol: float = KERNEL_RTOL) -> FFunction:
    """Shape function F of the canonical fBm kernel.

    Declared endpoint exponents: ``-|H - 1/2|`` at u -> 0 (both regimes)
    and ``H - 1/2`` at u -> 1 (a blow-up only when H < 1/2).
    """
    H = check_hurst(H)
    if H == 0.5:
        return constant_shape(1.0)
    impl = _f_regular if H > 0.5 else _f_rough

    def func(u, w):
        u, w = np.broadcast_arrays(u, w)
        flat_u, flat_w = u.ravel(), w.ravel()
        out = np.zeros(flat_u.shape)
        live = (flat_u > 0) & (flat_w > 0)
        if np.any(live):
            out[live] = _chunked(lambda a, b: impl(H, a, b, rtol), flat_u[live], flat_w[live])
        return out.reshape(u.shape)

    return FFunction(
        func,
        singularity_at_zero=-abs(H - 0.5),
        singularity_at_one=H - 0.5,
        name=f"fbm(H={H:g})",
    )


def fbm_volterra_kernel(H: float, rtol: float = KERNEL_RTOL) -> SelfSimilarKernel:
    """fBm kernel in the homogeneous form ``t**(H-1/2) F(s/t)``."""
    return SelfSimilarKernel(H, fbm_f_function(H, rtol))


def fbm_generic_kernel(H: float, rtol: float = KERNEL_RTOL) -> GenericVolterraKernel:
    """fBm kernel evaluated by the (t, s) integral formula, not through F."""
    H = check_hurst(H)
    return GenericVolterraKernel(
        lambda t, s, lag: fbm_kernel(H, t, s, lag, rtol),
        diagonal_exponent=None if H == 0.5 else H - 0.5,
        origin_exponent=None if H == 0.5 else -abs(H - 0.5),
        name=f"fbm(H={H:g})",
    )
