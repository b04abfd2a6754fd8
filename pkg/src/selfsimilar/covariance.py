"""Covariance functions, matrices and the triangular factorisation.

A Volterra kernel k factorises its covariance as
``r(t, s) = int_0^{min(t,s)} k(t, u) k(s, u) du``; the lower Cholesky factor
of a covariance matrix is the discrete counterpart of k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import GenericVolterraKernel, check_homogeneity
from .numerics import QuadratureSpec, integrate_batch

__all__ = [
    "TimeGrid",
    "CovarianceMatrix",
    "CholeskyFactor",
    "NotPSDError",
    "DataError",
    "brownian_covariance",
    "rank1_covariance",
    "factorized_covariance",
    "factorized_covariance_matrix",
    "covariance_matrix",
    "cholesky",
    "discrete_kernel",
    "rank1_demo",
    "write_csv",
    "PSD_TOL",
    "RANK_TOL",
]

FACTORIZED_RTOL = 1e-8
#: pivots below -PSD_TOL * max diagonal mean the matrix is not PSD
PSD_TOL = 1e-10
#: pivots below RANK_TOL * max diagonal are treated as zero
RANK_TOL = 1e-12


class NotPSDError(np.linalg.LinAlgError):
    """Matrix has a pivot clearly below zero."""


class DataError(ValueError):
    """Covariance data is non-finite or degenerate."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times ``t_0 < ... < t_n`` with ``t_0 >= 0``."""

    points: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("a time grid needs at least one point")
        if not np.all(np.isfinite(pts)) or pts[0] < 0:
            raise ValueError("grid times must be finite and non-negative")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid times must be strictly increasing")
        if pts.size == 1 and pts[0] == 0:
            raise ValueError("a grid needs at least one positive time")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform_grid(cls, horizon: float, n: int, include_zero: bool = True) -> "TimeGrid":
        """n equally spaced positive times ``k * horizon / n``, plus 0 if asked."""
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        if not (math.isfinite(horizon) and horizon > 0):
            raise ValueError("horizon must be positive")
        k = np.arange(0 if include_zero else 1, n + 1)
        return cls(horizon * k / n, uniform=True)

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "TimeGrid":
        pts = np.asarray(points, dtype=float)
        d = np.diff(pts)
        uniform = bool(d.size == 0 or np.allclose(d, d[0], rtol=1e-12, atol=0))
        return cls(pts, uniform=uniform)

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def has_zero(self) -> bool:
        return bool(self.points[0] == 0.0)

    @property
    def positive(self) -> np.ndarray:
        """The grid times with ``t = 0`` dropped."""
        return self.points[1:] if self.has_zero else self.points

    @property
    def cell_edges(self) -> np.ndarray:
        """Left edges of the cells ending at each positive time (starting at 0)."""
        pos = self.positive
        return np.concatenate(([0.0], pos[:-1]))

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class CovarianceMatrix:
    """Covariance values over the positive times of a grid."""

    grid: TimeGrid
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.positive

    def to_csv(self, path) -> None:
        write_csv(path, self.times, self.values)


def write_csv(path, header_times, rows) -> None:
    """Comma separated table: header row of times then data rows, %.17g."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    header = ",".join(f"{t:.17g}" for t in header_times)
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")


def brownian_covariance(t, s):
    """``min(t, s)``."""
    return np.minimum(t, s)


def rank1_covariance(beta: float) -> Callable:
    """Covariance ``t**beta s**beta`` of the trivially self-similar process."""
    return lambda t, s: np.asarray(t, dtype=float) ** beta * np.asarray(s, dtype=float) ** beta


def _right_exponent(k: GenericVolterraKernel, on_diagonal: bool) -> Optional[float]:
    lam = k.diagonal_exponent
    if lam is None:
        return None
    return 2.0 * lam if on_diagonal else lam


def _left_exponent(k: GenericVolterraKernel) -> Optional[float]:
    lam = k.origin_exponent
    return None if lam is None else 2.0 * lam


def _column(k, m: float, others: np.ndarray, rtol: float, on_diagonal: bool) -> np.ndarray:
    """``int_0^m k(t, u) k(m, u) du`` for each t in ``others`` (all >= m)."""
    spec = QuadratureSpec(
        singularity_left=_left_exponent(k),
        singularity_right=_right_exponent(k, on_diagonal),
        relative_tolerance=rtol,
    )
    others = np.asarray(others, dtype=float)
    gap = (others - m)[:, None]
    tt = others[:, None]

    def g(u, dl, dr):
        # every row shares the nodes on [0, m]
        k_m = k(m, u[0], dr[0])
        if on_diagonal:
            return np.broadcast_to(k_m * k_m, u.shape)
        return k(tt, u, gap + dr) * k_m

    zeros = np.zeros(others.shape)
    return integrate_batch(g, zeros, zeros + m, spec)


def factorized_covariance(k: GenericVolterraKernel, t: float, s: float,
                          rtol: float = FACTORIZED_RTOL) -> float:
    """``int_0^{min(t, s)} k(t, u) k(s, u) du`` by singular quadrature."""
    if not (t > 0 and s > 0):
        raise ValueError("factorized_covariance needs positive times")
    lo, hi = (t, s) if t <= s else (s, t)
    return float(_column(k, lo, np.array([hi]), rtol, on_diagonal=(lo == hi))[0])


def factorized_covariance_matrix(k: GenericVolterraKernel, grid: TimeGrid,
                                 rtol: float = FACTORIZED_RTOL) -> CovarianceMatrix:
    """Factorised covariance over all pairs of positive grid times."""
    times = grid.positive
    n = times.size
    out = np.empty((n, n))
    for j, m in enumerate(times):
        out[j, j] = _column(k, m, times[j:j + 1], rtol, on_diagonal=True)[0]
        if j + 1 < n:
            col = _column(k, m, times[j + 1:], rtol, on_diagonal=False)
            out[j + 1:, j] = col
            out[j, j + 1:] = col
    return CovarianceMatrix(grid, out)


def covariance_matrix(r: Callable, grid: TimeGrid) -> CovarianceMatrix:
    """Fill ``r(t_i, t_j)`` over the positive grid times (upper half mirrored)."""
    times = grid.positive
    n = times.size
    out = np.empty((n, n))
    for i in range(n):
        row = np.asarray(r(np.full(n - i, times[i]), times[i:]), dtype=float)
        bad = np.flatnonzero(~np.isfinite(row))
        if bad.size:
            j = i + int(bad[0])
            raise DataError(f"non-finite covariance at (t={times[i]:g}, s={times[j]:g})")
        out[i, i:] = row
        out[i:, i] = row
    return CovarianceMatrix(grid, out)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the input, and its rank."""

    L: np.ndarray
    rank: int
    zeroed_columns: tuple = ()


def cholesky(C, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> CholeskyFactor:
    """Pivot-free Cholesky factorisation tolerant of semi-definite input.

    Columns whose pivot falls below ``rank_tol * max(diag)`` are zeroed and
    not counted in the rank; a pivot below ``-psd_tol * max(diag)`` raises
    :class:`NotPSDError`.
    """
    A = np.asarray(C.values if isinstance(C, CovarianceMatrix) else C, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("cholesky needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise DataError("matrix has non-finite entries")
    n = A.shape[0]
    scale = float(np.max(np.diag(A))) if n else 0.0
    L = np.zeros_like(A)
    if scale <= 0:
        if scale < 0 or np.any(A != 0):
            raise NotPSDError("matrix has no positive diagonal entry")
        return CholeskyFactor(L, 0, tuple(range(n)))
    zeroed = []
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -psd_tol * scale:
            raise NotPSDError(f"pivot {pivot:.3g} at column {j} is negative")
        if pivot <= rank_tol * scale:
            zeroed.append(j)
            continue
        d = math.sqrt(pivot)
        L[j, j] = d
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return CholeskyFactor(L, n - len(zeroed), tuple(zeroed))


def discrete_kernel(L: np.ndarray, grid: TimeGrid) -> GenericVolterraKernel:
    """Piecewise-constant kernel ``L[i, j] / sqrt(cell_j)`` read off a factor.

    Row i covers times in ``(t_{i-1}, t_i]`` and column j the cell
    ``(t_{j-1}, t_j]`` of the positive grid times (with ``t_{-1} = 0``).
    """
    times = grid.positive
    edges = grid.cell_edges
    widths = times - edges
    scaled = np.asarray(L, dtype=float) / np.sqrt(widths)[None, :]

    def func(t, s, lag):
        i = np.searchsorted(times, t, side="left")
        j = np.searchsorted(times, s, side="left")
        inside = (i < times.size) & (j < times.size)
        out = np.zeros(np.shape(t))
        out[inside] = scaled[i[inside], j[inside]]
        return out

    # s < t is enforced by the wrapper, but the factor may carry mass above it
    return GenericVolterraKernel(func, name="discrete factor")


@dataclass
class Rank1Report:
    rank: int
    degrees: list
    homogeneous: dict

    @property
    def all_fail(self) -> bool:
        return not any(self.homogeneous.values())


def rank1_demo(beta: float, grid: TimeGrid,
               degrees: Sequence[float] = (-0.5, 0.0, 0.5, 1.0), tol: float = 1e-8) -> Rank1Report:
    """Factor the covariance of ``t**beta * W_1`` and test its discrete kernel.

    The factor collapses to a single column (rank 1) and the resulting
    kernel fails the homogeneity test for every scanned degree.
    """
    times = grid.positive
    if times.size < 3:
        raise ValueError("rank1_demo needs at least 3 positive grid times")
    fac = cholesky(covariance_matrix(rank1_covariance(beta), grid))
    k = discrete_kernel(fac.L, grid)
    edges = grid.cell_edges
    # a point in the first cell whose double lies strictly inside the second
    s0 = edges[0] + 0.75 * (times[0] - edges[0])
    pts = [(t, s0) for t in times[1:] if 2 * t <= times[-1]] or [(times[1], s0)]
    report = {
        deg: bool(check_homogeneity(k, deg, [2.0], pts, tol)) for deg in degrees
    }
    return Rank1Report(fac.rank, list(degrees), report)
