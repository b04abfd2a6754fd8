"""Monte Carlo paths: counter-based Gaussians, Volterra and Cholesky samplers.

Every standard normal is a pure function of ``(master_seed, path_index,
step)``, so a path does not depend on how many other paths are drawn or in
which order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .covariance import (
    CovarianceMatrix,
    DataError,
    TimeGrid,
    cholesky,
    write_csv,
)
from .kernels import GenericVolterraKernel, SelfSimilarKernel
from .numerics import QuadratureSpec, integrate_batch

__all__ = [
    "SeedSpec",
    "PathEnsemble",
    "standard_normals",
    "brownian_increments",
    "brownian_increment_matrix",
    "volterra_weights",
    "scheme_covariance",
    "sample_volterra",
    "sample_cholesky",
    "empirical_covariance",
    "covariance_standard_errors",
    "SelfSimilarityReport",
    "self_similarity_test",
    "read_ensemble_csv",
]

WEIGHT_RTOL = 1e-10
_BLOCK = 8192
_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_STEP_MULT = _U64(0xD1B54A32D192ED03)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> _U64(30))
    x = x * _U64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> _U64(27))
    x = x * _U64(0x94D049BB133111EB)
    return x ^ (x >> _U64(31))


@dataclass(frozen=True)
class SeedSpec:
    """Master seed; path p draws from the stream keyed by (seed, p)."""

    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def standard_normals(seed: SeedSpec, path_indices, n_steps: int) -> np.ndarray:
    """Standard normals of shape (len(path_indices), n_steps).

    Entry (p, j) is ``Phi^{-1}(U)`` with U built from a SplitMix64 hash of
    (master_seed, path_index, j).
    """
    paths = np.asarray(path_indices, dtype=np.uint64)[:, None]
    steps = np.arange(n_steps, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        key = _splitmix(_U64(seed.master_seed) + _GOLDEN)
        x = _splitmix(key ^ (paths * _GOLDEN + _U64(1)))
        x = _splitmix(x + (steps + _U64(1)) * _STEP_MULT)
    u = ((x >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def brownian_increment_matrix(grid: TimeGrid, seed: SeedSpec, n_paths: int,
                              first_path: int = 0) -> np.ndarray:
    """Increments over the cells ending at each positive grid time."""
    widths = grid.positive - grid.cell_edges
    z = standard_normals(seed, np.arange(first_path, first_path + n_paths), widths.size)
    return z * np.sqrt(widths)[None, :]


def brownian_increments(grid: TimeGrid, seed: SeedSpec, path_index: int) -> np.ndarray:
    """One path's Brownian increments ``W(t_j) - W(t_{j-1})`` (with W(0) = 0)."""
    return brownian_increment_matrix(grid, seed, 1, first_path=path_index)[0]


@dataclass
class PathEnsemble:
    """Sampled paths: rows are paths, columns are all grid times."""

    grid: TimeGrid
    values: np.ndarray
    seed: SeedSpec
    method: str
    kernel_name: str = ""
    params: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def positive_values(self) -> np.ndarray:
        return self.values[:, 1:] if self.grid.has_zero else self.values

    def metadata(self) -> dict:
        meta = {
            "seed": str(self.seed.master_seed),
            "method": self.method,
            "kernel": self.kernel_name,
            "n_paths": str(self.n_paths),
            "n_times": str(len(self.grid)),
        }
        meta.update({k: str(v) for k, v in self.params.items()})
        return meta

    def to_csv(self, path, sidecar: Optional[str] = None) -> Path:
        """Write the CSV and a ``key=value`` sidecar; returns the sidecar path."""
        path = Path(path)
        write_csv(path, self.grid.points, self.values)
        side = Path(sidecar) if sidecar else path.with_name(path.name + ".meta")
        side.write_text("".join(f"{k}={v}\n" for k, v in self.metadata().items()))
        return side


def read_ensemble_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (times, values) from an ensemble CSV."""
    with open(path) as fh:
        times = np.array([float(x) for x in fh.readline().strip().split(",")])
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return times, values


def _match_origin(k: GenericVolterraKernel) -> bool:
    """Whether the first cell of rows i >= 2 gets a variance-matched weight.

    A kernel blowing up at s = 0 loses a fixed fraction of the first cell's
    variance under the cell mean, whatever the grid size.  When the kernel
    is also singular on the diagonal the cell-mean choice is kept: there
    row 1's only cell is both the origin and the diagonal cell, and
    variance matching the other rows over-states their covariance with it.
    """
    lam0, lam1 = k.origin_exponent, k.diagonal_exponent
    return lam0 is not None and lam0 < 0 and (lam1 is None or lam1 >= 0)


def _selfsimilar_weights(k: SelfSimilarKernel, grid: TimeGrid, rtol: float):
    """Cell weights through the antiderivative of the shape function.

    ``int_a^b k(t, s) ds = t**(beta + 1/2) * (Phi(b/t) - Phi(a/t))`` with
    ``Phi(v) = int_0^v F``.  Phi is accumulated once over the sorted set of
    ratios, so the cost is linear in the number of distinct ratios.
    """
    times = grid.positive
    edges = grid.cell_edges
    n = times.size
    F = k.shape
    beta = k.beta
    # ratios needed for off-diagonal cells j < i
    ii, jj = np.tril_indices(n, -1)
    lo = edges[jj] / times[ii]
    hi = times[jj] / times[ii]
    knots = np.unique(np.concatenate((lo, hi)))
    knots = knots[knots > 0]
    phi = {0.0: 0.0}
    if knots.size:
        lam0 = F.singularity_at_zero
        first = integrate_batch(
            lambda x, dl, dr: F(dl), [0.0], [knots[0]],
            QuadratureSpec(singularity_left=lam0, relative_tolerance=rtol),
        )
        pieces = integrate_batch(
            lambda x, dl, dr: F(x, 1.0 - x), knots[:-1], knots[1:],
            QuadratureSpec(node_count=8, relative_tolerance=rtol, graded=False),
        ) if knots.size > 1 else np.empty(0)
        cum = first[0] + np.concatenate(([0.0], np.cumsum(pieces)))
        phi.update(zip(knots.tolist(), cum.tolist()))
    W = np.zeros((n, n))
    if ii.size:
        dphi = np.array([phi[b] - phi[a] for a, b in zip(lo.tolist(), hi.tolist())])
        W[ii, jj] = times[ii] ** (beta + 0.5) * dphi / (times[jj] - edges[jj])
    # diagonal: t**(2 beta) * int_{e/t}^1 F(v)**2 dv, measured from v = 1
    lam0 = None if F.singularity_at_zero is None else 2 * F.singularity_at_zero
    lam1 = None if F.singularity_at_one is None else 2 * F.singularity_at_one
    width = (times - edges) / times
    diag = np.empty(n)
    first_cell = edges == 0
    if np.any(~first_cell):
        diag[~first_cell] = integrate_batch(
            lambda x, dl, dr: F(1.0 - dl, dl) ** 2,
            np.zeros(int((~first_cell).sum())), width[~first_cell],
            QuadratureSpec(singularity_left=lam1, relative_tolerance=rtol),
        )
    if np.any(first_cell):
        diag[first_cell] = integrate_batch(
            lambda x, dl, dr: F(dl, dr) ** 2,
            np.zeros(int(first_cell.sum())), np.ones(int(first_cell.sum())),
            QuadratureSpec(singularity_left=lam0, singularity_right=lam1, relative_tolerance=rtol),
        )
    W[np.arange(n), np.arange(n)] = np.sqrt(times ** (2 * beta) * diag / (times - edges))
    if n > 1 and _match_origin(k):
        # int_0^{t_1} k(t_i, s)**2 ds = t_i**(2 beta) int_0^{t_1/t_i} F**2,
        # accumulated over the sorted ratios like Phi above
        ratio = times[0] / times[1:]
        order = np.argsort(ratio)
        r = ratio[order]
        head = integrate_batch(
            lambda x, dl, dr: F(dl, 1.0 - dl) ** 2, [0.0], r[:1],
            QuadratureSpec(singularity_left=lam0, relative_tolerance=rtol),
        )
        steps = integrate_batch(
            lambda x, dl, dr: F(x, 1.0 - x) ** 2, r[:-1], r[1:],
            QuadratureSpec(node_count=8, relative_tolerance=rtol, graded=False),
        ) if n > 2 else np.empty(0)
        sq = np.empty(n - 1)
        sq[order] = head[0] + np.concatenate(([0.0], np.cumsum(steps)))
        W[1:, 0] = np.sign(W[1:, 0]) * np.sqrt(times[1:] ** (2 * beta) * sq / times[0])
    return W


def _generic_weights(k: GenericVolterraKernel, grid: TimeGrid, rtol: float):
    """Cell weights by direct quadrature of k over each cell."""
    times = grid.positive
    edges = grid.cell_edges
    n = times.size
    W = np.zeros((n, n))
    ii, jj = np.tril_indices(n, -1)
    origin = jj == 0
    for mask, left in ((origin, k.origin_exponent), (~origin, None)):
        if not np.any(mask):
            continue
        ti = times[ii[mask]][:, None]
        gap = (times[ii[mask]] - times[jj[mask]])[:, None]
        vals = integrate_batch(
            lambda s, dl, dr, ti=ti, gap=gap: k(ti, s, gap + dr),
            edges[jj[mask]], times[jj[mask]],
            QuadratureSpec(singularity_left=left, relative_tolerance=rtol),
        )
        W[ii[mask], jj[mask]] = vals / (times[jj[mask]] - edges[jj[mask]])
    lam1 = None if k.diagonal_exponent is None else 2 * k.diagonal_exponent
    lam0 = None if k.origin_exponent is None else 2 * k.origin_exponent
    d = np.arange(n)
    tcol = times[:, None]
    diag = np.empty(n)
    first = edges == 0
    for mask, left in ((first, lam0), (~first, None)):
        if not np.any(mask):
            continue
        tm = tcol[mask]
        diag[mask] = integrate_batch(
            lambda s, dl, dr, tm=tm: k(tm, s, dr) ** 2,
            edges[mask], times[mask],
            QuadratureSpec(singularity_left=left, singularity_right=lam1, relative_tolerance=rtol),
        )
    W[d, d] = np.sqrt(diag / (times - edges))
    if n > 1 and _match_origin(k):
        tm = tcol[1:]
        sq = integrate_batch(
            lambda s, dl, dr: k(tm, s, tm - s) ** 2,
            np.zeros(n - 1), np.full(n - 1, times[0]),
            QuadratureSpec(singularity_left=lam0, relative_tolerance=rtol),
        )
        W[1:, 0] = np.sign(W[1:, 0]) * np.sqrt(sq / times[0])
    return W


def volterra_weights(k: GenericVolterraKernel, grid: TimeGrid, rtol: float = WEIGHT_RTOL) -> np.ndarray:
    """Lower-triangular weights ``w[i, j]`` for ``X(t_i) = sum_j w[i, j] dW_j``.

    Off-diagonal entries are cell means of ``k(t_i, .)``; the diagonal entry
    matches the variance of the last cell, ``sqrt(int k(t_i, s)**2 ds / dt)``,
    so pointwise evaluation on the diagonal is never needed.  For kernels
    singular at s = 0 but bounded on the diagonal (fBm with H > 1/2) the
    first cell is variance matched too, keeping the sign of its mean.
    """
    if isinstance(k, SelfSimilarKernel):
        return _selfsimilar_weights(k, grid, rtol)
    return _generic_weights(k, grid, rtol)


def scheme_covariance(weights: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Exact covariance of the discretised process, ``W diag(dt) W^T``."""
    widths = grid.positive - grid.cell_edges
    return (weights * widths[None, :]) @ weights.T


def _with_zero(grid: TimeGrid, positive_values: np.ndarray) -> np.ndarray:
    if not grid.has_zero:
        return positive_values
    return np.hstack((np.zeros((positive_values.shape[0], 1)), positive_values))


def _in_blocks(fn, n_paths: int, threads: int) -> np.ndarray:
    """Stack ``fn(first, count)`` over path blocks, optionally in threads.

    Each block's draws depend only on its path indices, so the result is
    the same for any thread count.
    """
    if int(threads) != threads or threads < 1:
        raise ValueError("threads must be a positive integer")
    if threads == 1 or n_paths < 2 * _BLOCK:
        return fn(0, n_paths)
    starts = range(0, n_paths, _BLOCK)
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        parts = list(pool.map(lambda a: fn(a, min(_BLOCK, n_paths - a)), starts))
    return np.vstack(parts)


def sample_volterra(k: GenericVolterraKernel, grid: TimeGrid, n_paths: int,
                    seed: SeedSpec, weights: Optional[np.ndarray] = None,
                    threads: int = 1) -> PathEnsemble:
    """Paths of ``X_t = int_0^t k(t, s) dW_s`` on the grid.

    All paths share the cell weights and differ only in their increments.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    W = volterra_weights(k, grid) if weights is None else weights
    X = _in_blocks(lambda a, m: brownian_increment_matrix(grid, seed, m, first_path=a) @ W.T,
                   n_paths, threads)
    params = {"beta": getattr(k, "beta", "")}
    return PathEnsemble(grid, _with_zero(grid, X), seed, "volterra", k.name, params)


def sample_cholesky(C: CovarianceMatrix, n_paths: int, seed: SeedSpec,
                    threads: int = 1) -> PathEnsemble:
    """Exact-law paths ``L z`` from the Cholesky factor of C."""
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    L = cholesky(C).L
    X = _in_blocks(lambda a, m: standard_normals(seed, np.arange(a, a + m), L.shape[0]) @ L.T,
                   n_paths, threads)
    return PathEnsemble(C.grid, _with_zero(C.grid, X), seed, "cholesky")


def empirical_covariance(e: PathEnsemble, centered: bool = True) -> CovarianceMatrix:
    """Sample covariance over the positive grid times.

    With ``centered=True`` the known zero mean is used (divide by n); this
    is unbiased for centred processes.  Otherwise the sample mean is removed
    and the divisor is n - 1.
    """
    X = np.asarray(e.positive_values, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise DataError("empirical covariance needs at least two paths")
    if not np.all(np.isfinite(X)):
        raise DataError("ensemble contains non-finite values")
    if centered:
        C = X.T @ X / n
    else:
        Xc = X - X.mean(axis=0)
        C = Xc.T @ Xc / (n - 1)
    C = 0.5 * (C + C.T)
    return CovarianceMatrix(e.grid, C)


def covariance_standard_errors(C: np.ndarray, n_paths: int) -> np.ndarray:
    """Standard error of a zero-mean sample covariance of Gaussians.

    ``Var(X_i X_j) = C_ii C_jj + C_ij**2``.
    """
    d = np.diag(C)
    return np.sqrt((np.outer(d, d) + C**2) / n_paths)


@dataclass
class SelfSimilarityReport:
    passed: bool
    beta: float
    worst_sigma: float
    per_scale: dict

    def __bool__(self):
        return self.passed


def _grid_index(times: np.ndarray, x: float) -> Optional[int]:
    i = int(np.searchsorted(times, x))
    for j in (i - 1, i):
        if 0 <= j < times.size and abs(times[j] - x) <= 1e-12 * max(1.0, abs(x)):
            return j
    return None


def self_similarity_test(e: PathEnsemble, beta: float, scales: Sequence[float],
                         tol_sigma: float = 4.0) -> SelfSimilarityReport:
    """Compare ``Cov(X_at, X_as)`` with ``a**(2 beta) Cov(X_t, X_s)``.

    For every pair of base times whose scaled images lie on the grid the
    per-path difference ``X_at X_as - a**(2 beta) X_t X_s`` is averaged and
    compared with its own Monte Carlo standard error.
    """
    X = e.positive_values
    times = e.grid.positive
    n = X.shape[0]
    worst = 0.0
    per_scale = {}
    for a in scales:
        if not a > 0 or a == 1:
            raise ValueError("scales must be positive and different from 1")
        idx = []
        for i, t in enumerate(times):
            at = a * t
            if at < times[0] * (1 - 1e-12) or at > times[-1] * (1 + 1e-12):
                continue
            j = _grid_index(times, at)
            if j is None:
                raise ValueError(f"grid is not closed under scaling by {a}: {at:g} is missing")
            idx.append((i, j))
        if not idx:
            raise ValueError(f"no grid time has its image under scaling by {a} in the grid")
        base = np.array([i for i, _ in idx])
        img = np.array([j for _, j in idx])
        fac = a ** (2 * beta)
        worst_a = 0.0
        for p in range(len(idx)):
            d = X[:, img[p]][:, None] * X[:, img[p:]] - fac * X[:, base[p]][:, None] * X[:, base[p:]]
            mean = d.mean(axis=0)
            se = d.std(axis=0, ddof=1) / math.sqrt(n)
            z = np.abs(mean) / np.where(se > 0, se, np.inf)
            z[(se == 0) & (mean != 0)] = np.inf
            worst_a = max(worst_a, float(z.max()))
        per_scale[a] = worst_a
        worst = max(worst, worst_a)
    return SelfSimilarityReport(worst <= tol_sigma, beta, worst, per_scale)
