"""Command-line front end.

    selfsimilar sample --process fbm --hurst 0.75 --grid 1.0:64 --paths 1000 --seed 42 -o paths.csv
    selfsimilar covariance --process fbm --hurst 0.75 --grid 2.0:8 --compare -o cov.csv
    selfsimilar covariance --rank1 --beta 1.0 --grid 1.0:16
    selfsimilar verify [--suite lamperti ...]
    selfsimilar lamperti --input paths.csv --beta 0.75 -o stationary.csv
    selfsimilar equivalence-demo --l 0.5 --grid 1.0:64 --paths 20000

Exit codes: 0 ok, 1 a check failed, 2 bad configuration, 3 numerical failure.
Options may also come from a ``key=value`` file given with ``--config``;
flags on the command line win.  Every output gets a ``<output>.config``
echo of the resolved configuration, which can be fed back to ``--config``
to reproduce the file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .covariance import (
    DataError,
    NotPSDError,
    TimeGrid,
    brownian_covariance,
    covariance_matrix,
    factorized_covariance,
    factorized_covariance_matrix,
    rank1_demo,
    write_csv,
)
from .equivalence import (
    constant_perturbation,
    hitsuda_w_covariance,
    perturbed_kernel,
    rn_log_density,
    selfsimilar_iff_l_zero_check,
)
from .fbm import HURST_RANGE, check_hurst, fbm_covariance, fbm_volterra_kernel
from .kernels import SelfSimilarKernel, constant_shape
from .lamperti import lamperti_path
from .numerics import ConvergenceError
from .sampling import (
    SeedSpec,
    brownian_increment_matrix,
    read_ensemble_csv,
    sample_cholesky,
    sample_volterra,
)
from .verify import DEFAULT_SEED, SUITES, run_suites

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "SELFSIMILAR_THREADS"

#: built-in defaults, applied after the config file and the flags
DEFAULTS = {
    "process": "fbm",
    "hurst": 0.75,
    "grid": "1.0:16",
    "paths": 1000,
    "seed": DEFAULT_SEED,
    "method": "volterra",
}

_CONFIG_KEYS = ("process", "hurst", "grid", "paths", "seed", "method", "beta", "l", "output", "input")


class ConfigError(ValueError):
    """Invalid command-line or config-file settings (exit code 2)."""


def _threads_default() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def read_config(path) -> dict:
    """Parse a ``key=value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "command":
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def parse_grid(text: str) -> TimeGrid:
    """``T:n`` -> uniform grid ``0, T/n, ..., T`` (n positive times)."""
    try:
        horizon, n = text.split(":")
        horizon, n = float(horizon), int(n)
    except ValueError:
        raise ConfigError(f"grid must look like T:n (e.g. 1.0:64), got {text!r}") from None
    if not (math.isfinite(horizon) and horizon > 0) or n < 1:
        raise ConfigError(f"grid needs T > 0 and n >= 1, got {text!r}")
    return TimeGrid.uniform_grid(horizon, n)


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    try:
        cfg["hurst"] = float(cfg["hurst"])
        cfg["paths"] = int(cfg["paths"])
        cfg["seed"] = int(cfg["seed"])
        if "beta" in cfg:
            cfg["beta"] = float(cfg["beta"])
        if "l" in cfg:
            cfg["l"] = float(cfg["l"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric setting: {exc}") from None
    if cfg["process"] not in ("fbm", "brownian"):
        raise ConfigError(f"process must be fbm or brownian, got {cfg['process']!r}")
    if cfg["method"] not in ("volterra", "cholesky"):
        raise ConfigError(f"method must be volterra or cholesky, got {cfg['method']!r}")
    if cfg["process"] == "fbm":
        try:
            check_hurst(cfg["hurst"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if cfg["paths"] < 1:
        raise ConfigError("paths must be positive")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg["command"] = args.command
    return cfg


def _write_config(output: Path, cfg: dict, keys) -> None:
    lines = [f"command={cfg['command']}"]
    lines += [f"{k}={cfg[k]}" for k in keys if k in cfg]
    output.with_name(output.name + ".config").write_text("\n".join(lines) + "\n")


def _beta(cfg) -> float:
    return cfg["hurst"] if cfg["process"] == "fbm" else 0.5


def _kernel(cfg):
    if cfg["process"] == "fbm":
        return fbm_volterra_kernel(cfg["hurst"])
    return SelfSimilarKernel(0.5, constant_shape(1.0))


def _analytic(cfg):
    if cfg["process"] == "fbm":
        H = cfg["hurst"]
        return lambda t, s: fbm_covariance(H, t, s)
    return brownian_covariance


def cmd_sample(args) -> int:
    cfg = _resolve(args)
    if not cfg.get("output"):
        raise ConfigError("sample needs an output file (-o)")
    grid = parse_grid(cfg["grid"])
    seed = SeedSpec(cfg["seed"])
    if cfg["method"] == "cholesky":
        e = sample_cholesky(covariance_matrix(_analytic(cfg), grid), cfg["paths"], seed,
                            threads=args.threads)
        e.kernel_name = cfg["process"]
    else:
        e = sample_volterra(_kernel(cfg), grid, cfg["paths"], seed, threads=args.threads)
    e.params = {"process": cfg["process"], "beta": _beta(cfg)}
    if cfg["process"] == "fbm":
        e.params["hurst"] = cfg["hurst"]
    out = Path(cfg["output"])
    side = e.to_csv(out)
    if args.timestamp:
        with open(side, "a") as fh:
            fh.write(f"created={datetime.now(timezone.utc).isoformat()}\n")
    _write_config(out, cfg, ("process", "hurst", "grid", "paths", "seed", "method", "output"))
    print(f"wrote {e.n_paths} paths x {len(grid)} times to {out}")
    return EXIT_OK


def cmd_covariance(args) -> int:
    cfg = _resolve(args)
    grid = parse_grid(cfg["grid"])
    out = Path(cfg["output"]) if cfg.get("output") else None
    keys = ("process", "hurst", "grid", "output")
    if args.rank1:
        beta = cfg.get("beta", 1.0)
        rep = rank1_demo(beta, grid)
        print(f"rank: {rep.rank}")
        for d in rep.degrees:
            print(f"homogeneous of degree {d:g}: {'yes' if rep.homogeneous[d] else 'no'}")
        if out:
            C = covariance_matrix(lambda t, s: t**beta * s**beta, grid)
            C.to_csv(out)
            _write_config(out, dict(cfg, beta=beta), ("beta", "grid", "output"))
        return EXIT_OK if rep.rank == 1 and rep.all_fail else EXIT_CHECK
    analytic = covariance_matrix(_analytic(cfg), grid)
    if args.factorized or args.compare:
        fact = factorized_covariance_matrix(_kernel(cfg), grid)
    if args.compare:
        err = np.abs(fact.values - analytic.values) / np.abs(analytic.values)
        print(f"max relative error: {err.max():.6g}")
        if out:
            analytic.to_csv(out)
            write_csv(out.with_name(out.stem + ".factorized.csv"), grid.positive, fact.values)
            write_csv(out.with_name(out.stem + ".relerr.csv"), grid.positive, err)
            _write_config(out, cfg, keys)
        return EXIT_OK
    table = fact if args.factorized else analytic
    if out:
        table.to_csv(out)
        _write_config(out, cfg, keys)
        print(f"wrote {len(grid.positive)}x{len(grid.positive)} covariance table to {out}")
    else:
        write_csv(sys.stdout, grid.positive, table.values)
    return EXIT_OK


def cmd_verify(args) -> int:
    opts = {}
    if args.paths is not None:
        opts["paths"] = args.paths
    if args.seed is not None:
        opts["seed"] = args.seed
    if args.debug_wrong_beta:
        opts["beta_override"] = 0.5
    try:
        checks = run_suites(args.suite, **opts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_lamperti(args) -> int:
    cfg = _resolve(args)
    if not cfg.get("input") or not cfg.get("output"):
        raise ConfigError("lamperti needs --input and -o")
    src = Path(cfg["input"])
    try:
        times, values = read_ensemble_csv(src)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read ensemble {src}: {exc}") from None
    beta = cfg.get("beta")
    if beta is None:
        meta = src.with_name(src.name + ".meta")
        if meta.exists():
            kv = dict(l.split("=", 1) for l in meta.read_text().splitlines() if "=" in l)
            beta = float(kv["beta"]) if kv.get("beta") else None
    if beta is None or not beta > 0:
        raise ConfigError("lamperti needs a positive --beta (or a .meta sidecar with beta)")
    keep = times > 0
    log_t, Y = lamperti_path(times[keep], values[:, keep], beta)
    out = Path(cfg["output"])
    write_csv(out, log_t, Y)
    _write_config(out, dict(cfg, beta=beta), ("input", "beta", "output"))
    print(f"wrote Lamperti image of {Y.shape[0]} paths at {log_t.size} log-times to {out}")
    return EXIT_OK


def cmd_equivalence_demo(args) -> int:
    cfg = _resolve(args)
    c = cfg.get("l", 0.5)
    grid = parse_grid(cfg["grid"])
    l = constant_perturbation(c, horizon=grid.horizon)
    brownian = SelfSimilarKernel(0.5, constant_shape(1.0))
    kt = perturbed_kernel(brownian, l)
    T = grid.horizon
    rows = []
    for t, s in ((T, T), (T, T / 2), (T / 4, 3 * T / 4)):
        a = hitsuda_w_covariance(l, t, s)
        b = factorized_covariance(kt, t, s)
        rows.append((t, s, a, b))
        print(f"cov W~({t:g}, {s:g}): four-term {a:.12g}  factorised {b:.12g}  rel diff {abs(a - b) / abs(b):.3g}")
    n = cfg["paths"]
    dW = brownian_increment_matrix(grid, SeedSpec(cfg["seed"]), n)
    W = np.hstack((np.zeros((n, 1)), np.cumsum(dW, axis=1)))
    rho = np.exp(rn_log_density(l, grid.points, W))
    se = rho.std(ddof=1) / math.sqrt(n)
    print(f"mean density over {n} paths: {rho.mean():.6f} (se {se:.2g}, z {(rho.mean() - 1) / se:+.2f})")
    small = TimeGrid.uniform_grid(T, 2)
    chk = selfsimilar_iff_l_zero_check(brownian, l, small)
    print(f"perturbed Brownian motion 1/2-self-similar: {'yes' if chk.passed else 'no'} "
          f"(worst relative deviation {chk.worst_deviation:.3g})")
    if cfg.get("output"):
        out = Path(cfg["output"])
        np.savetxt(out, np.array(rows), fmt="%.17g", delimiter=",",
                   header="t,s,four_term,factorized", comments="")
        _write_config(out, dict(cfg, l=c), ("l", "grid", "paths", "seed", "output"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selfsimilar",
                                description="Volterra representations of self-similar Gaussian processes.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, paths=True):
        sp.add_argument("--config", help="key=value file; command-line flags win")
        sp.add_argument("--process", choices=("fbm", "brownian"))
        sp.add_argument("--hurst", type=float,
                        help=f"Hurst index in [{HURST_RANGE[0]}, {HURST_RANGE[1]}] (default 0.75)")
        sp.add_argument("--grid", help="T:n, uniform grid of n positive times up to T (default 1.0:16)")
        if paths:
            sp.add_argument("--paths", type=int)
            sp.add_argument("--seed", type=int)
        sp.add_argument("-o", "--output")

    sp = sub.add_parser("sample", help="simulate paths to CSV")
    common(sp)
    sp.add_argument("--method", choices=("volterra", "cholesky"))
    sp.add_argument("--threads", type=int, default=None,
                    help=f"worker threads (default ${THREADS_ENV} or 1)")
    sp.add_argument("--timestamp", action="store_true", help="record creation time in the .meta sidecar")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("covariance", help="covariance tables")
    common(sp, paths=False)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--factorized", action="store_true", help="integrate the kernel instead of the formula")
    g.add_argument("--compare", action="store_true", help="both tables plus relative errors")
    g.add_argument("--rank1", action="store_true", help="rank-1 t^b s^b demonstration")
    sp.add_argument("--beta", type=float, help="index for --rank1 (default 1)")
    sp.set_defaults(func=cmd_covariance)

    sp = sub.add_parser("verify", help="run the invariant suites")
    sp.add_argument("--suite", action="append", choices=sorted(SUITES),
                    help="run only this suite (repeatable)")
    sp.add_argument("--paths", type=int, help="Monte Carlo paths (default 100000)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--debug-wrong-beta", action="store_true",
                    help="negative control: use beta=0.5 in the fBm scaling test")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("lamperti", help="Lamperti transform of a path CSV")
    sp.add_argument("--config")
    sp.add_argument("--input", help="ensemble CSV written by 'sample'")
    sp.add_argument("--beta", type=float, help="self-similarity index (default: from the .meta sidecar)")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_lamperti)

    sp = sub.add_parser("equivalence-demo", help="measure change by a constant kernel l")
    common(sp)
    sp.add_argument("--l", type=float, help="constant perturbation kernel (default 0.5)")
    sp.set_defaults(func=cmd_equivalence_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", 0) is None:
            args.threads = _threads_default()
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("threads must be positive")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NotPSDError, DataError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
