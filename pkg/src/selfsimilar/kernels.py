"""Volterra kernels and the homogeneous canonical form ``t**(beta-1/2) F(s/t)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import QuadratureSpec, integrate_offsets

__all__ = [
    "FFunction",
    "GenericVolterraKernel",
    "SelfSimilarKernel",
    "HomogeneityReport",
    "kernel_eval",
    "check_homogeneity",
    "f_l2_norm_sq",
    "constant_shape",
    "power_shape",
]


@dataclass(frozen=True)
class FFunction:
    """Shape function F on (0, 1].

    ``func(u, w)`` is vectorised and receives ``w = 1 - u`` computed
    accurately by the caller, so shapes singular at u = 1 can use it.
    The singularity exponents describe F itself (not F**2).
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    singularity_at_zero: Optional[float] = None
    singularity_at_one: Optional[float] = None
    name: str = "F"

    def __post_init__(self):
        for lam in (self.singularity_at_zero, self.singularity_at_one):
            if lam is not None and not lam > -0.5:
                raise ValueError(
                    f"F must be square integrable: exponents must exceed -1/2, got {lam}"
                )

    def __call__(self, u, w=None):
        u = np.asarray(u, dtype=float)
        w = 1.0 - u if w is None else np.asarray(w, dtype=float)
        return np.asarray(self.func(u, w), dtype=float)


def constant_shape(value: float = 1.0) -> FFunction:
    """F identically equal to ``value``; ``value=1`` is Brownian motion."""
    return FFunction(lambda u, w: np.full(np.broadcast(u, w).shape, float(value)),
                     name=f"const({value:g})")


def power_shape(exponent: float, coef: float = 1.0) -> FFunction:
    """F(u) = coef * u**exponent."""
    lam = exponent if exponent < 0 else None
    return FFunction(lambda u, w: coef * u**exponent + 0.0 * w,
                     singularity_at_zero=lam, name=f"u^{exponent:g}")


class GenericVolterraKernel:
    """A kernel k(t, s) that vanishes for s >= t.

    ``func(t, s, lag)`` is vectorised and called only where ``0 < s < t``;
    ``lag = t - s`` is passed separately so kernels singular on the
    diagonal stay accurate.  ``diagonal_exponent`` is the exponent of the
    ``(t - s)`` behaviour at the diagonal and ``origin_exponent`` that of
    the ``s`` behaviour near s = 0 (``None`` when bounded).
    """

    def __init__(self, func, diagonal_exponent=None, origin_exponent=None, name="k"):
        self.func = func
        self.diagonal_exponent = diagonal_exponent
        self.origin_exponent = origin_exponent
        self.name = name

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"

    def __call__(self, t, s, lag=None):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        lag = t - s if lag is None else np.broadcast_to(np.asarray(lag, dtype=float), t.shape)
        if np.any(t <= 0) or np.any(s <= 0):
            raise ValueError("kernel arguments must be positive times")
        out = np.zeros(t.shape)
        live = lag > 0
        if np.any(live):
            out[live] = self.func(t[live], s[live], lag[live])
        return out if out.ndim else float(out)


class SelfSimilarKernel(GenericVolterraKernel):
    """Homogeneous kernel ``k(t, s) = t**(beta - 1/2) * F(s / t)``."""

    def __init__(self, beta: float, shape: FFunction):
        if not (math.isfinite(beta) and beta > 0):
            raise ValueError(f"beta must be positive, got {beta!r}")
        self.beta = float(beta)
        self.shape = shape
        expo = self.beta - 0.5

        def func(t, s, lag):
            return t**expo * shape(s / t, lag / t)

        super().__init__(
            func,
            diagonal_exponent=shape.singularity_at_one,
            origin_exponent=shape.singularity_at_zero,
            name=f"{shape.name}, beta={self.beta:g}",
        )

    @property
    def degree(self) -> float:
        return self.beta - 0.5


def kernel_eval(k: GenericVolterraKernel, t: float, s: float) -> float:
    """Evaluate ``k(t, s)``; zero on and above the diagonal."""
    if not (t > 0 and s > 0):
        raise ValueError(f"kernel_eval needs t > 0 and s > 0, got t={t!r}, s={s!r}")
    return float(k(t, s))


@dataclass
class HomogeneityReport:
    passed: bool
    degree: float
    worst_residual: float
    worst_scale: Optional[float] = None
    worst_point: Optional[tuple] = None
    residuals: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_homogeneity(
    k: GenericVolterraKernel,
    degree: float,
    scales: Sequence[float],
    sample_points: Sequence[tuple[float, float]],
    tol: float = 1e-8,
) -> HomogeneityReport:
    """Sample-based test of ``k(a t, a s) == a**degree * k(t, s)``.

    The residual at each point is
    ``|k(a t, a s) - a**degree k(t, s)| / (1 + |k(t, s)|)``.
    """
    pts = list(sample_points)
    scales = list(scales)
    if not pts or not scales:
        raise ValueError("check_homogeneity needs at least one scale and one sample point")
    tt = np.array([p[0] for p in pts], dtype=float)
    ss = np.array([p[1] for p in pts], dtype=float)
    if np.any(ss <= 0) or np.any(tt <= ss):
        raise ValueError("sample points must satisfy 0 < s < t")
    lag = tt - ss
    base = np.asarray(k(tt, ss, lag), dtype=float)
    worst, worst_a, worst_pt = -1.0, None, None
    residuals = []
    for a in scales:
        if not a > 0:
            raise ValueError("scales must be positive")
        scaled = np.asarray(k(a * tt, a * ss, a * lag), dtype=float)
        res = np.abs(scaled - a**degree * base) / (1.0 + np.abs(base))
        residuals.append(res)
        i = int(np.argmax(res))
        if res[i] > worst:
            worst, worst_a, worst_pt = float(res[i]), a, pts[i]
    return HomogeneityReport(
        passed=bool(worst <= tol),
        degree=degree,
        worst_residual=worst,
        worst_scale=worst_a,
        worst_point=worst_pt,
        residuals=residuals,
    )


def f_l2_norm_sq(F: FFunction, rtol: float = 1e-10) -> float:
    """Squared L2 norm of F over (0, 1]."""
    lam0 = None if F.singularity_at_zero is None else 2.0 * F.singularity_at_zero
    lam1 = None if F.singularity_at_one is None else 2.0 * F.singularity_at_one
    spec = QuadratureSpec(singularity_left=lam0, singularity_right=lam1,
                          relative_tolerance=rtol)
    return integrate_offsets(lambda u, dl, dr: F(dl, dr) ** 2, 0.0, 1.0, spec)
