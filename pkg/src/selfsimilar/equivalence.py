"""Equivalent Gaussian measures and perturbed Volterra processes.

A Volterra kernel ``l(t, s)`` (zero for s >= t) changes the Brownian motion
W into

    W~_t = W_t - int_0^t int_0^v l(v, u) dW_u dv,

whose law is equivalent to Wiener measure.  Pushing the change through a
self-similar Volterra process ``X_t = int_0^t t**(beta-1/2) F(s/t) dW_s``
gives the kernel

    k~(t, s) = k(t, s) - t**(beta-1/2) z(t, s),   z(t, s) = int_s^t F(u/t) l(u, s) du,

and the perturbed process stays beta-self-similar only when l = 0.  A
(-1)-homogeneous l is never square integrable near t = 0: the integral of
l**2 over ``eps <= t <= T`` grows like ``log(T/eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .covariance import TimeGrid, factorized_covariance
from .kernels import FFunction, GenericVolterraKernel, SelfSimilarKernel
from .numerics import QuadratureSpec, integrate_batch

__all__ = [
    "PerturbationKernel",
    "constant_perturbation",
    "perturbation",
    "squared_norm",
    "z_kernel",
    "perturbed_kernel",
    "hitsuda_w_covariance",
    "rn_log_density",
    "DivergenceReport",
    "lemma32_divergence",
    "SelfSimilarityCheck",
    "selfsimilar_iff_l_zero_check",
]

#: relative lower cut-off used when validating square integrability
VALIDATION_DELTA = 1e-6
#: reject when [delta T, 1e-3 T] carries more than this fraction of the
#: mass of [1e-3 T, T]; a (-1)-homogeneous kernel gives a ratio of 1
VALIDATION_RATIO = 0.5


def _spec(rtol, left=None, right=None, smooth=False):
    if smooth and left is None and right is None:
        return QuadratureSpec(node_count=8, relative_tolerance=rtol, graded=False)
    return QuadratureSpec(singularity_left=left, singularity_right=right, relative_tolerance=rtol)


def _doubled(lam):
    return None if lam is None else 2.0 * lam


def squared_norm(l: GenericVolterraKernel, eps: float, horizon: float,
                 rtol: float = 1e-10) -> float:
    """``int_eps^T int_0^t l(t, s)**2 ds dt``.

    The outer integral runs in log-time ``t = exp(x)``, which makes it
    exact for (-1)-homogeneous kernels and well conditioned for tiny eps.
    """
    if not 0 < eps < horizon:
        raise ValueError("need 0 < eps < horizon")
    smooth = l.origin_exponent is None and l.diagonal_exponent is None
    inner_spec = _spec(rtol / 10, _doubled(l.origin_exponent), _doubled(l.diagonal_exponent), smooth)

    def outer(x, dl, dr):
        t = np.exp(x.ravel())
        tt = t[:, None]
        inner = integrate_batch(lambda s, a, b: l(tt, s, b) ** 2, np.zeros(t.size), t, inner_spec)
        return (t * inner).reshape(x.shape)

    return float(integrate_batch(outer, [math.log(eps)], [math.log(horizon)],
                                 _spec(rtol, smooth=True))[0])


@dataclass(frozen=True)
class PerturbationKernel:
    """Volterra kernel ``l`` of an equivalent change of measure on [0, T].

    With ``validate=True`` the squared norm over ``[delta T, T]`` must be
    finite and must not keep growing as delta shrinks (the signature of a
    (-1)-homogeneous kernel).
    """

    kernel: GenericVolterraKernel
    horizon: float = 1.0
    is_zero: bool = False
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be positive")
        if self.validate and not self.is_zero:
            T = self.horizon
            mid = 1e-3 * T
            near = squared_norm(self.kernel, VALIDATION_DELTA * T, mid)
            far = squared_norm(self.kernel, mid, T)
            if not (math.isfinite(near) and math.isfinite(far)):
                raise ValueError("perturbation kernel has no finite L2 norm on [delta T, T]")
            if near > VALIDATION_RATIO * far:
                raise ValueError(
                    "perturbation kernel is not square integrable near t = 0: its norm on "
                    f"[{VALIDATION_DELTA:g} T, 1e-3 T] is {near:.3g} against {far:.3g} on "
                    "[1e-3 T, T] (a (-1)-homogeneous kernel?)"
                )

    def __call__(self, t, s, lag=None):
        return self.kernel(t, s, lag)

    @property
    def name(self) -> str:
        return self.kernel.name

    def on_grid(self, times) -> np.ndarray:
        """Matrix ``l(t_i, t_j)`` for j < i (zero elsewhere); t_0 may be 0."""
        times = np.asarray(times, dtype=float)
        ii, jj = np.tril_indices(times.size, -1)
        out = np.zeros((times.size, times.size))
        if ii.size and not self.is_zero:
            t, s = times[ii], times[jj]
            vals = np.asarray(self.kernel.func(t, s, t - s), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError("perturbation kernel is not finite at the grid points")
            out[ii, jj] = vals
        return out


def constant_perturbation(c: float, horizon: float = 1.0) -> PerturbationKernel:
    """``l(t, s) = c`` for s < t."""
    c = float(c)
    k = GenericVolterraKernel(lambda t, s, lag: np.full(np.shape(t), c), name=f"l={c:g}")
    return PerturbationKernel(k, horizon, is_zero=(c == 0.0), validate=False)


def perturbation(func: Callable, horizon: float = 1.0, name: str = "l",
                 diagonal_exponent=None, origin_exponent=None,
                 validate: bool = True) -> PerturbationKernel:
    """Wrap a vectorised ``func(t, s)`` as a validated perturbation kernel."""
    k = GenericVolterraKernel(lambda t, s, lag: func(t, s), diagonal_exponent,
                              origin_exponent, name=name)
    return PerturbationKernel(k, horizon, validate=validate)


def _z(F: FFunction, l: PerturbationKernel, t: np.ndarray, s: np.ndarray,
       lag: np.ndarray, rtol: float) -> np.ndarray:
    if l.is_zero:
        return np.zeros(t.shape)
    # F(u/t) may blow up as u -> t; l may blow up as u -> s
    spec = QuadratureSpec(singularity_left=l.kernel.diagonal_exponent,
                          singularity_right=F.singularity_at_one, relative_tolerance=rtol)
    tt, ss = t[:, None], s[:, None]
    return integrate_batch(lambda u, dl, dr: F(u / tt, dr / tt) * l(u, ss, dl),
                           s, s + lag, spec)


def z_kernel(F: FFunction, l: PerturbationKernel, t: float, s: float,
             rtol: float = 1e-10) -> float:
    """``z(t, s) = int_s^t F(u/t) l(u, s) du`` for ``0 < s < t``."""
    if not 0 < s < t:
        raise ValueError(f"z_kernel needs 0 < s < t, got t={t!r}, s={s!r}")
    return float(_z(F, l, np.array([t], float), np.array([s], float),
                    np.array([t - s], float), rtol)[0])


def perturbed_kernel(k: SelfSimilarKernel, l: PerturbationKernel,
                     rtol: float = 1e-10) -> GenericVolterraKernel:
    """``k~(t, s) = k(t, s) - t**(beta-1/2) z(t, s)``."""
    if not isinstance(k, SelfSimilarKernel):
        raise TypeError("perturbed_kernel needs a SelfSimilarKernel")
    F, expo = k.shape, k.beta - 0.5

    def func(t, s, lag):
        return k.func(t, s, lag) - t**expo * _z(F, l, t, s, lag, rtol)

    return GenericVolterraKernel(func, k.diagonal_exponent, k.origin_exponent,
                                 name=f"{k.name} perturbed by {l.name}")


def _is_smooth(l: PerturbationKernel) -> bool:
    return l.kernel.origin_exponent is None and l.kernel.diagonal_exponent is None


def _line_integral(l: PerturbationKernel, u: np.ndarray, upper: float, rtol: float) -> np.ndarray:
    """``int_u^upper l(v, u) dv`` for each u (zero where u >= upper)."""
    out = np.zeros(u.shape)
    live = u < upper
    if np.any(live):
        uu = u[live][:, None]
        spec = _spec(rtol, l.kernel.diagonal_exponent, None, _is_smooth(l))
        out[live] = integrate_batch(lambda v, dl, dr: l(v, uu, dl), u[live],
                                    np.full(int(live.sum()), upper), spec)
    return out


def _cross_term(l: PerturbationKernel, v1: np.ndarray, v2: np.ndarray, rtol: float) -> np.ndarray:
    """``int_0^{min(v1, v2)} l(v1, u) l(v2, u) du`` elementwise."""
    m = np.minimum(v1, v2)
    out = np.zeros(m.shape)
    live = m > 0
    if np.any(live):
        a1, a2 = v1[live][:, None], v2[live][:, None]
        spec = _spec(rtol, _doubled(l.kernel.origin_exponent), None, _is_smooth(l))
        out[live] = integrate_batch(lambda u, dl, dr: l(a1, u) * l(a2, u),
                                    np.zeros(int(live.sum())), m[live], spec)
    return out


def hitsuda_w_covariance(l: PerturbationKernel, t: float, s: float, rtol: float = 1e-8) -> float:
    """Covariance of W~ at (t, s), term by term from its four-part formula.

    ``t^s - int_0^{t^s} int_u^s l(v,u) dv du - int_0^{t^s} int_u^t l(v,u) dv du
    + int_0^t int_0^s int_0^{v1^v2} l(v1,u) l(v2,u) du dv2 dv1``.
    Each nested level uses a tolerance ten times tighter than the one
    enclosing it.  The ``v1 ^ v2`` kink is handled by splitting at the
    diagonal.
    """
    if not (t > 0 and s > 0):
        raise ValueError("hitsuda_w_covariance needs positive times")
    m = min(t, s)
    if l.is_zero:
        return m
    smooth = _is_smooth(l)
    outer = _spec(rtol, smooth=smooth)

    def single(upper):
        return integrate_batch(
            lambda u, dl, dr: _line_integral(l, u.ravel(), upper, rtol / 10).reshape(u.shape),
            [0.0], [m], outer,
        )[0]

    def middle(v1):
        # int_0^s g(v1, v2) dv2, split where v1 ^ v2 switches branch
        v1 = v1.ravel()
        total = np.zeros(v1.shape)
        cut = np.minimum(v1, s)
        inner_spec = _spec(rtol / 10, smooth=smooth)
        for lo, hi in ((np.zeros(v1.shape), cut), (cut, np.full(v1.shape, s))):
            live = hi > lo
            if not np.any(live):
                continue
            vv = v1[live][:, None]
            total[live] += integrate_batch(
                lambda v2, dl, dr: _cross_term(
                    l, np.broadcast_to(vv, v2.shape).ravel(), v2.ravel(), rtol / 100
                ).reshape(v2.shape),
                lo[live], hi[live], inner_spec,
            )
        return total

    triple = 0.0
    # middle(v1) has a kink at v1 = s when s < t
    pieces = [(0.0, s), (s, t)] if t > s else [(0.0, t)]
    for lo, hi in pieces:
        triple += integrate_batch(lambda v1, dl, dr: middle(v1).reshape(v1.shape),
                                  [lo], [hi], outer)[0]
    return float(m - single(s) - single(t) + triple)


def rn_log_density(l: PerturbationKernel, times, paths) -> np.ndarray:
    """Left-point log Radon-Nikodym density of W~ for sampled Brownian paths.

    ``sum_i phi_i dW_i - 1/2 sum_i phi_i**2 dt_i`` with
    ``phi_i = sum_{j<i} l(t_i, t_j) dW_j``.  ``times`` must start at 0 and
    ``paths`` holds W at those times (one path per row, or a single path).
    Returns one value per path.
    """
    times = np.asarray(times, dtype=float)
    paths = np.asarray(paths, dtype=float)
    single = paths.ndim == 1
    paths = np.atleast_2d(paths)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0:
        raise ValueError("times must be a grid starting at 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if paths.shape[1] != times.size:
        raise ValueError("paths must have one column per time")
    if not np.all(np.isfinite(paths)):
        raise ValueError("paths must be finite")
    dW = np.diff(paths, axis=1)
    dt = np.diff(times)
    Lm = l.on_grid(times[:-1])
    phi = dW @ Lm.T
    out = (phi * dW).sum(axis=1) - 0.5 * (phi**2 * dt).sum(axis=1)
    return out[0] if single else out


@dataclass
class DivergenceReport:
    epsilons: list
    values: list
    predicted: list
    g_norm_sq: float
    max_relative_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tol

    def __bool__(self):
        return self.passed


def lemma32_divergence(g: Callable, horizon: float, epsilons: Sequence[float],
                       g_norm_sq: Optional[float] = None, tol: float = 1e-8,
                       rtol: float = 1e-12) -> DivergenceReport:
    """Squared norms of the (-1)-homogeneous kernel ``l(t, s) = g(s/t)/t``.

    ``N(eps) = int_eps^T int_0^t l**2`` is compared with
    ``log(T/eps) * int_0^1 g**2``; the logarithmic growth as eps -> 0
    shows that such a kernel is square integrable only when g = 0.
    ``g_norm_sq`` may be supplied when known in closed form.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ValueError("need at least one epsilon")
    if any(not 0 < e < horizon for e in eps):
        raise ValueError("epsilons must lie in (0, T)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be decreasing")
    l = GenericVolterraKernel(lambda t, s, lag: g(s / t) / t, name="g(s/t)/t")
    if g_norm_sq is None:
        g_norm_sq = float(integrate_batch(lambda u, dl, dr: g(u) ** 2, [0.0], [1.0],
                                          QuadratureSpec(relative_tolerance=rtol))[0])
    if g_norm_sq == 0:
        raise ValueError("g must be nonzero")
    values = [squared_norm(l, e, horizon, rtol) for e in eps]
    predicted = [math.log(horizon / e) * g_norm_sq for e in eps]
    err = max(abs(v - p) / abs(p) for v, p in zip(values, predicted))
    return DivergenceReport(eps, values, predicted, g_norm_sq, err, tol)


@dataclass
class SelfSimilarityCheck:
    passed: bool
    worst_deviation: float
    tol: float
    pairs: list

    def __bool__(self):
        return self.passed


def selfsimilar_iff_l_zero_check(k: SelfSimilarKernel, l: PerturbationKernel, grid: TimeGrid,
                                 tol: float = 1e-5, scale: float = 2.0,
                                 rtol: float = 1e-8) -> SelfSimilarityCheck:
    """Test ``r~(a t, a s) = a**(2 beta) r~(t, s)`` for the perturbed kernel.

    ``r~`` is the factorised covariance of :func:`perturbed_kernel`; every
    pair of positive grid times whose scaling by ``a`` is again on the grid
    is checked, with the deviation taken relative to ``a**(2 beta) r~(t, s)``.
    """
    times = grid.positive
    scaled = set(np.round(times * scale, 12).tolist())
    base = [t for t in times if round(t * scale, 12) in scaled]
    if not base:
        raise ValueError(f"grid is not closed under scaling by {scale:g}")
    kt = perturbed_kernel(k, l)
    factor = scale ** (2.0 * k.beta)
    worst = 0.0
    pairs = []
    for i, t in enumerate(base):
        for s in base[: i + 1]:
            lo = factorized_covariance(kt, t, s, rtol)
            hi = factorized_covariance(kt, scale * t, scale * s, rtol)
            dev = abs(hi - factor * lo) / max(abs(factor * lo), np.finfo(float).tiny)
            pairs.append(((float(t), float(s)), lo, hi, dev))
            worst = max(worst, dev)
    return SelfSimilarityCheck(worst <= tol, worst, tol, pairs)
