"""Lamperti correspondence between self-similar and stationary processes.

If X is beta-self-similar then ``Y(t) = exp(-beta t) X(exp(t))`` is
stationary.  At the kernel level the shape F of ``k(t, s) = t**(beta-1/2)
F(s/t)`` and the moving-average kernel G of Y are related by

    F(u) = u**(-1/2) G(log(1/u)),        G(v) = exp(-v/2) F(exp(-v)),

and ``int_0^1 F(u)**2 du = int_0^inf G(v)**2 dv`` by the change of variables
``u = exp(-v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import FFunction
from .numerics import QuadratureSpec, integrate_offsets

__all__ = [
    "StationaryShape",
    "f_from_g",
    "g_from_f",
    "g_l2_norm_sq",
    "stationary_covariance_from_selfsimilar",
    "lamperti_path",
    "inverse_lamperti_path",
    "resample_uniform_lags",
    "StationarityReport",
    "stationarity_check",
    "equal_lag_pairs",
    "G_CUTOFF",
]

#: truncation point of integrals over [0, inf)
G_CUTOFF = 40.0


@dataclass(frozen=True)
class StationaryShape:
    """Moving-average kernel G on ``v >= 0`` (zero for v < 0).

    ``func(v)`` is vectorised.  ``singularity_at_zero`` is the exponent of
    G at v -> 0 (``None`` if bounded) and ``decay_rate`` a rate gamma with
    ``|G(v)| <= C exp(-gamma v)`` for large v.
    """

    func: Callable[[np.ndarray], np.ndarray]
    singularity_at_zero: Optional[float] = None
    decay_rate: float = 0.5
    name: str = "G"

    def __post_init__(self):
        lam = self.singularity_at_zero
        if lam is not None and not lam > -0.5:
            raise ValueError(f"G must be square integrable near 0: exponent must exceed -1/2, got {lam}")
        if not (math.isfinite(self.decay_rate) and self.decay_rate > 0):
            raise ValueError("decay_rate must be positive for G to be square integrable")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        pos = v > 0
        if np.any(pos):
            out[pos] = np.asarray(self.func(v[pos]), dtype=float)
        return out if out.ndim else float(out)


def f_from_g(G: StationaryShape) -> FFunction:
    """``F(u) = u**(-1/2) G(log(1/u))``.

    Near u = 1 the lag ``log(1/u)`` is taken as ``-log1p(-w)`` with the
    caller's accurate ``w = 1 - u``.  A decay rate gamma of G gives F the
    exponent ``gamma - 1/2`` at u -> 0 (declared only when negative).
    """
    lam0 = G.decay_rate - 0.5
    lam0 = lam0 if lam0 < 0 else None

    def func(u, w):
        u, w = np.broadcast_arrays(u, w)
        v = np.where(w < 0.5, -np.log1p(-w), -np.log(np.where(u > 0, u, 1.0)))
        out = np.zeros(u.shape)
        live = (u > 0) & (w > 0)
        out[live] = u[live] ** -0.5 * G(v[live])
        return out

    return FFunction(func, singularity_at_zero=lam0,
                     singularity_at_one=G.singularity_at_zero, name=f"F[{G.name}]")


def g_from_f(F: FFunction) -> StationaryShape:
    """``G(v) = exp(-v/2) F(exp(-v))``, with ``1 - exp(-v)`` via expm1.

    An exponent lambda of F at u -> 0 becomes the decay rate
    ``1/2 + lambda`` (1/2 when F is bounded there).
    """
    lam0 = F.singularity_at_zero
    decay = 0.5 + (lam0 if lam0 is not None else 0.0)

    def func(v):
        v = np.asarray(v, dtype=float)
        return np.exp(-0.5 * v) * F(np.exp(-v), -np.expm1(-v))

    return StationaryShape(func, singularity_at_zero=F.singularity_at_one,
                           decay_rate=decay, name=f"G[{F.name}]")


def g_l2_norm_sq(G: StationaryShape, cutoff: float = G_CUTOFF,
                 rtol: float = 1e-10) -> tuple[float, float]:
    """``int_0^cutoff G**2`` and a bound on the neglected tail.

    The tail bound is ``G(cutoff)**2 / (2 gamma)``, exact when G decays
    like ``exp(-gamma v)`` past the cutoff.
    """
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    lam = None if G.singularity_at_zero is None else 2.0 * G.singularity_at_zero
    spec = QuadratureSpec(singularity_left=lam, relative_tolerance=rtol)
    value = integrate_offsets(lambda v, dl, dr: G(dl) ** 2, 0.0, cutoff, spec)
    tail = float(G(cutoff)) ** 2 / (2.0 * G.decay_rate)
    return value, tail


def stationary_covariance_from_selfsimilar(r: Callable, beta: float, tau: float) -> float:
    """``exp(-beta tau) r(exp(tau), 1)``: covariance of the Lamperti image at lag tau."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not tau >= 0:
        raise ValueError("lag must be non-negative")
    return float(math.exp(-beta * tau) * r(math.exp(tau), 1.0))


def _check_positive_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if np.any(~np.isfinite(times)) or np.any(times <= 0):
        raise ValueError("the Lamperti transform needs strictly positive times")
    return times


def lamperti_path(times, values, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Map samples X(t_i) to Y(log t_i) = t_i**(-beta) X(t_i).

    ``values`` may hold one path or a 2-D array with one path per row.
    The log-times are returned as they fall; no resampling is done.
    """
    times = _check_positive_times(times)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != times.size:
        raise ValueError("values must have one column per time")
    return np.log(times), values * times ** (-beta)


def inverse_lamperti_path(log_times, values, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`lamperti_path`: X(t) = t**beta Y(log t)."""
    log_times = np.asarray(log_times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != log_times.size:
        raise ValueError("values must have one column per time")
    times = np.exp(log_times)
    return times, values * times**beta


def resample_uniform_lags(log_times, values, n: int) -> tuple[np.ndarray, np.ndarray]:
    """APPROXIMATE: linear interpolation of Y onto n uniform log-times.

    Interpolation does not preserve the law of the process; use only for
    plotting or rough diagnostics.
    """
    log_times = np.asarray(log_times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if n < 2:
        raise ValueError("n must be at least 2")
    u = np.linspace(log_times[0], log_times[-1], n)
    out = np.array([np.interp(u, log_times, row) for row in values])
    return u, out


@dataclass
class StationarityReport:
    passed: bool
    worst_deviation: float
    tol: float
    values: list

    def __bool__(self):
        return self.passed


def stationarity_check(r: Callable, beta: float, lag_pairs: Sequence, tol: float = 1e-10) -> StationarityReport:
    """Check that ``exp(-beta (u + v)) r(exp(u), exp(v))`` depends on u - v only.

    ``lag_pairs`` is a list of ``((u1, v1), (u2, v2))`` log-time pairs with
    equal lags; the two transformed covariances of each item are compared.
    """
    pairs = list(lag_pairs)
    if not pairs:
        raise ValueError("stationarity_check needs at least one pair")
    if not beta > 0:
        raise ValueError("beta must be positive")

    def ry(u, v):
        return math.exp(-beta * (u + v)) * float(r(math.exp(u), math.exp(v)))

    worst = 0.0
    values = []
    for (u1, v1), (u2, v2) in pairs:
        if not math.isclose(u1 - v1, u2 - v2, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"pair lags differ: {u1 - v1!r} vs {u2 - v2!r}")
        a, b = ry(u1, v1), ry(u2, v2)
        values.append((a, b))
        worst = max(worst, abs(a - b))
    return StationarityReport(worst <= tol, worst, tol, values)


def equal_lag_pairs(lag: float, bases: Sequence[float]) -> list:
    """Pairs ``((b0 + lag, b0), (b + lag, b))`` comparing every base with the first."""
    bases = list(bases)
    if len(bases) < 2:
        raise ValueError("need at least two base points")
    b0 = bases[0]
    return [((b0 + lag, b0), (b + lag, b)) for b in bases[1:]]
