"""Invariant suites behind ``selfsimilar verify``.

Each suite returns a list of :class:`Check` records holding the measured
number, the threshold and the comparison used, so reports can print both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .covariance import (
    TimeGrid,
    brownian_covariance,
    factorized_covariance,
    factorized_covariance_matrix,
    rank1_demo,
)
from .equivalence import (
    constant_perturbation,
    hitsuda_w_covariance,
    lemma32_divergence,
    perturbation,
    perturbed_kernel,
    rn_log_density,
)
from .fbm import fbm_covariance, fbm_f_function, fbm_generic_kernel, fbm_volterra_kernel
from .kernels import GenericVolterraKernel, SelfSimilarKernel, check_homogeneity, constant_shape, f_l2_norm_sq
from .lamperti import equal_lag_pairs, f_from_g, g_from_f, g_l2_norm_sq, stationarity_check
from .sampling import (
    SeedSpec,
    brownian_increment_matrix,
    covariance_standard_errors,
    empirical_covariance,
    sample_volterra,
    self_similarity_test,
)

__all__ = ["Check", "SUITES", "run_suites", "DEFAULT_SEED"]

DEFAULT_SEED = 20240601


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    threshold: float
    relation: str = "<="
    passed: bool = False

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.suite}] {self.name}: {self.measured:.6g} {self.relation} {self.threshold:.6g}"


def _le(suite, name, measured, threshold):
    return Check(suite, name, float(measured), float(threshold), "<=", bool(measured <= threshold))


def _eq(suite, name, measured, target):
    return Check(suite, name, float(measured), float(target), "==", bool(measured == target))


def _gt(suite, name, measured, threshold):
    return Check(suite, name, float(measured), float(threshold), ">", bool(measured > threshold))


def suite_factorization(opts) -> list:
    grid = TimeGrid.uniform_grid(2.0, 8)
    T = grid.positive
    out = []
    for H in (0.25, 0.4, 0.6, 0.75, 0.9):
        C = factorized_covariance_matrix(fbm_volterra_kernel(H), grid).values
        R = fbm_covariance(H, T[:, None], T[None, :])
        scale = np.minimum.outer(T, T) ** (2 * H)  # R_H(t^s, t^s)
        out.append(_le("factorization", f"H={H:g} max |int k k - R_H| / R_H(t^s,t^s)",
                       np.max(np.abs(C - R) / scale), 1e-5))
    return out


def suite_brownian(opts) -> list:
    k = SelfSimilarKernel(0.5, constant_shape(1.0))
    pts = [(2.0, 1.0), (1.0, 1.0), (0.3, 1.7), (5.0, 0.25)]
    err = max(abs(factorized_covariance(k, t, s) - brownian_covariance(t, s)) for t, s in pts)
    return [_le("brownian", "F=1, beta=1/2: max |int k k - min(t,s)|", err, 1e-12)]


def suite_homogeneity(opts) -> list:
    pts = [(1.0, 0.3), (0.7, 0.5), (1.3, 0.05), (0.9, 0.899)]
    out = []
    for H in (0.25, 0.75):
        k = fbm_generic_kernel(H)
        base = np.array([k(t, s) for t, s in pts])
        worst = 0.0
        for a in (0.5, 2.0, 3.0):
            scaled = np.array([k(a * t, a * s) for t, s in pts])
            worst = max(worst, float(np.max(np.abs(scaled - a ** (H - 0.5) * base)
                                            / np.abs(a ** (H - 0.5) * base))))
        out.append(_le("homogeneity", f"fbm_kernel H={H:g} relative scaling residual", worst, 1e-8))
    beta = 1.0
    trivial = GenericVolterraKernel(lambda t, s, lag: t**beta * (s < 1.0), name="t^b 1{s<1}")
    tpts = [(0.8, 0.6), (1.5, 0.7), (0.9, 0.2)]
    best = min(check_homogeneity(trivial, d, [2.0], tpts).worst_residual
               for d in np.linspace(-1.0, 2.0, 13))
    out.append(_gt("homogeneity", "t^b 1{s<1}: smallest residual over degrees in [-1, 2]", best, 1e-8))
    return out


def suite_lamperti(opts) -> list:
    out = []
    worst = 0.0
    for H in (0.25, 0.75):
        rep = stationarity_check(lambda t, s, H=H: fbm_covariance(H, t, s), H,
                                 equal_lag_pairs(math.log(2.0), [0.0, 1.0, 2.0, -1.5]), tol=1e-10)
        worst = max(worst, rep.worst_deviation)
    out.append(_le("lamperti", "fBm Lamperti image: equal-lag covariance spread", worst, 1e-10))
    rt = 0.0
    iso = 0.0
    for H in (0.25, 0.6, 0.75):
        F = fbm_f_function(H)
        F2 = f_from_g(g_from_f(F))
        u = np.linspace(0.02, 0.98, 50)
        rt = max(rt, float(np.max(np.abs(F2(u) - F(u)) / np.abs(F(u)))))
        g2, tail = g_l2_norm_sq(g_from_f(F))
        iso = max(iso, abs(g2 + tail - f_l2_norm_sq(F)))
    out.append(_le("lamperti", "F -> G -> F round trip, max relative error", rt, 1e-12))
    out.append(_le("lamperti", "isometry |int F^2 - int G^2|", iso, 1e-6))
    return out


def suite_mc(opts) -> list:
    H = 0.75
    n_paths = opts.get("paths", 100_000)
    grid = TimeGrid.uniform_grid(1.0, 16)
    e = sample_volterra(fbm_volterra_kernel(H), grid, n_paths, SeedSpec(opts.get("seed", DEFAULT_SEED)))
    T = grid.positive
    R = fbm_covariance(H, T[:, None], T[None, :])
    dev = np.abs(empirical_covariance(e).values - R) / covariance_standard_errors(R, n_paths)
    beta = opts.get("beta_override", H)
    return [
        _le("mc", "Volterra fBm H=0.75 max |C_emp - R_H| / se", dev.max(), 4.0),
        _le("mc", f"self-similarity at a=2, beta={beta:g}: worst z", self_similarity_test(e, beta, [2.0]).worst_sigma, 4.0),
        _gt("mc", "control with wrong beta=0.5: worst z", self_similarity_test(e, 0.5, [2.0]).worst_sigma, 4.0),
    ]


def suite_equivalence(opts) -> list:
    brownian = SelfSimilarKernel(0.5, constant_shape(1.0))
    ls = [constant_perturbation(0.0), constant_perturbation(1.0), perturbation(lambda t, s: t, name="l=u")]
    pts = [(1.0, 1.0), (1.0, 0.5), (0.25, 0.75), (0.5, 0.5)]
    worst = 0.0
    for l in ls:
        kt = perturbed_kernel(brownian, l)
        for t, s in pts:
            a = hitsuda_w_covariance(l, t, s)
            b = factorized_covariance(kt, t, s)
            worst = max(worst, abs(a - b) / abs(b))
    one = hitsuda_w_covariance(constant_perturbation(1.0), 1.0, 1.0)
    return [
        _le("equivalence", "Hitsuda covariance vs factorised perturbed kernel, relative", worst, 1e-5),
        _le("equivalence", "l=1 at (1,1): |cov - 1/3|", abs(one - 1.0 / 3.0), 1e-10),
    ]


def suite_density(opts) -> list:
    n_paths = opts.get("paths", 100_000)
    fine = TimeGrid.uniform_grid(1.0, 128)
    dW = brownian_increment_matrix(fine, SeedSpec(opts.get("seed", DEFAULT_SEED)), n_paths)
    W = np.hstack((np.zeros((n_paths, 1)), np.cumsum(dW, axis=1)))
    l = constant_perturbation(0.5)
    out, devs = [], []
    for n, times, paths in ((64, fine.points[::2], W[:, ::2]), (128, fine.points, W)):
        rho = np.exp(rn_log_density(l, times, paths))
        se = rho.std(ddof=1) / math.sqrt(n_paths)
        devs.append(abs(rho.mean() - 1.0))
        out.append(_le("density", f"{n} points: |mean exp(log density) - 1| / se", devs[-1] / se, 4.0))
    out.append(_le("density", "deviation at 128 points minus deviation at 64", devs[1] - devs[0], 0.0))
    return out


def suite_lemma(opts) -> list:
    r1 = lemma32_divergence(lambda u: np.ones_like(u), 1.0, [1e-1, 1e-2, 1e-3], g_norm_sq=1.0)
    r2 = lemma32_divergence(lambda u: u, 2.0, [0.5, 0.05, 0.005], g_norm_sq=1.0 / 3.0)
    return [
        _le("lemma", "g=1: max |N(eps) - log(T/eps)| / log(T/eps)", r1.max_relative_error, 1e-8),
        _le("lemma", "g=u: max |N(eps) - log(T/eps)/3| / (log(T/eps)/3)", r2.max_relative_error, 1e-8),
    ]


def suite_rank1(opts) -> list:
    rep = rank1_demo(0.75, TimeGrid.uniform_grid(1.0, 16))
    return [
        _eq("rank1", "numerical rank of the t^b s^b covariance (16 points)", rep.rank, 1),
        _eq("rank1", "scanned degrees passing homogeneity", sum(rep.homogeneous.values()), 0),
    ]


SUITES: dict[str, Callable] = {
    "factorization": suite_factorization,
    "brownian": suite_brownian,
    "homogeneity": suite_homogeneity,
    "lamperti": suite_lamperti,
    "mc": suite_mc,
    "equivalence": suite_equivalence,
    "density": suite_density,
    "lemma": suite_lemma,
    "rank1": suite_rank1,
}


def run_suites(names=None, **opts) -> list:
    """Run the named suites (all by default) and return their checks."""
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    checks = []
    for n in names:
        checks.extend(SUITES[n](opts))
    return checks
