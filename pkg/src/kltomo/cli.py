"""Command-line runner: ``kltomo {validate,bp,ibody,radon}``.

Settings come from an optional flat ``key=value`` config file (``#`` starts a
comment) and from flags; flags win.  Every report embeds the resolved
configuration, the seed, the truncation and the package version, and
contains no timestamps, so identical inputs give byte-identical files.

Exit codes: 0 success, 1 usage or parse error, 2 failed check or violated
precondition, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import CheckFailure, ConvergenceError, PreconditionError

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_CONVERGENCE = 0, 1, 2, 3
SUBCOMMANDS = ("validate", "bp", "ibody", "radon")
MODES = ("positive-a", "positive-b", "negative")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings of one run; ``None`` means "use the subcommand default"."""

    subcommand: str
    n: int | None = None
    i: int | None = None
    ell: int | None = None
    q: float = 4.0
    k: int | None = None
    mode: str | None = None
    lam: str | None = None
    samples: int | None = None
    seed: int = 0
    degree: int = 48
    eps_max: float = 1.0
    tol: float | None = None
    threads: int | None = None
    out: str | None = None
    format: str = "json"

    def dims(self):
        from .grassmann import Dims

        missing = [k for k in ("n", "i", "ell") if getattr(self, k) is None]
        if missing:
            raise PreconditionError(f"{self.subcommand} needs --{' --'.join(missing)}")
        return Dims(self.n, self.i, self.ell)

    def lambdas(self) -> list[float]:
        if not self.lam:
            return []
        try:
            vals = [float(x) for x in self.lam.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"--lambda expects comma-separated numbers, got {self.lam!r}") from exc
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise PreconditionError(f"lambda values must lie in [0, 1], got {vals}")
        return vals

    def echo(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"int | None": int, "float | None": float, "str | None": str, "int": int, "float": float, "str": str}


def _cast(key: str, value: str):
    try:
        return _CASTS[_TYPES[key]](value)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc


def read_config(path) -> dict:
    """Parse a flat ``key=value`` file; keys use the long flag names."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        key = "lam" if key == "lambda" else key
        if key not in _TYPES or key == "subcommand":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _cast(key, value)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kltomo", description="Radon-transform tools and Busemann-Petty experiments.")
    p.add_argument("--version", action="version", version=f"kltomo {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {
        "validate": "run the numerical self-checks of every module",
        "bp": "positive or negative Busemann-Petty experiment",
        "ibody": "k-intersection-body test for a (q, ell)-ball",
        "radon": "dump direct against reduced Radon transforms",
    }
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", help="key=value file; flags override its entries")
        s.add_argument("--n", type=int)
        s.add_argument("--i", type=int)
        s.add_argument("--ell", type=int)
        s.add_argument("--q", type=float, help="exponent of the (q, ell)-ball")
        s.add_argument("--k", type=int, help="intersection-body order (ibody)")
        s.add_argument("--mode", choices=MODES, help="bp experiment mode")
        s.add_argument("--lambda", dest="lam", help="comma-separated equal-angle cos^2 values (radon)")
        s.add_argument("--samples", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--degree", type=int, help="harmonic truncation K")
        s.add_argument("--eps-max", dest="eps_max", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--threads", type=int)
        s.add_argument("--out", help="directory for report files")
        s.add_argument("--format", choices=("json", "csv"), help="what to print on stdout")
    return p


def resolve_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = read_config(args.config) if args.config else {}
    for key in _TYPES:
        if key == "subcommand":
            continue
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(subcommand=args.subcommand, **values)
    if cfg.format not in ("json", "csv"):
        raise UsageError(f"format must be json or csv, got {cfg.format!r}")
    if cfg.mode is not None and cfg.mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError("--threads must be positive")
    if cfg.samples is not None and cfg.samples < 1:
        raise UsageError("--samples must be positive")
    return cfg


# ---------------------------------------------------------------- output


def _dumps(obj) -> str:
    from .experiments import _jsonable

    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


class Output:
    """Collects report files; writes them under ``--out`` and echoes one to stdout."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def finish(self, report: dict, table: str | None = None) -> None:
        report = {"config": self.cfg.echo(), "version": __version__, **report}
        self.add("report.json", _dumps(report))
        if self.cfg.out:
            os.makedirs(self.cfg.out, exist_ok=True)
            for name, text in sorted(self.files.items()):
                with open(os.path.join(self.cfg.out, name), "w", newline="") as fh:
                    fh.write(text)
        if self.cfg.format == "csv" and table is not None:
            sys.stdout.write(table)
        else:
            sys.stdout.write(self.files["report.json"])


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


# ---------------------------------------------------------------- validate


DEFAULT_VALIDATE_DIMS = ((3, 2, 1), (5, 2, 2), (6, 4, 1), (6, 3, 2), (7, 3, 2), (7, 4, 2))


def _check_radon(dims, seed: int, tol: float) -> dict:
    from .experiments import spawn_rngs
    from .grassmann import canonical_lambdas, haar_sample_frame
    from .quadrature import sphere_area
    from .radon import radon_direct, radon_reduced

    rngs = spawn_rngs(seed, 8)
    worst = 0.0
    for rng in rngs:
        coeffs = rng.uniform(-1.0, 1.0, 5)
        f0 = np.polynomial.Polynomial(coeffs)
        frame = haar_sample_frame(dims.n, dims.i, rng)
        f = lambda th, f0=f0: f0(np.sum(th[:, -dims.ell:] ** 2, axis=1))  # noqa: E731
        direct = radon_direct(f, frame, mode="quadrature").value
        red = radon_reduced(f0, canonical_lambdas(frame, dims.ell), dims).value
        worst = max(worst, abs(direct - red) / (1.0 + abs(direct)))
    one = radon_direct(lambda th: np.ones(th.shape[0]), haar_sample_frame(dims.n, dims.i, rngs[0]),
                       mode="quadrature").value
    norm_err = abs(one - sphere_area(dims.i - 1))
    return {"max_rel_residual": worst, "mass_residual": norm_err,
            "passed": bool(worst <= tol and norm_err <= 1e-10)}


def _check_abel(dims, seed: int) -> dict:
    from .abel import AbelParams, abel_duality
    from .experiments import spawn_rngs

    p = AbelParams(dims.n, dims.i, dims.ell)
    worst = 0.0
    for rng in spawn_rngs(seed, 3):
        f0 = np.polynomial.Polynomial(rng.uniform(0.5, 1.5, 4))
        psi = np.polynomial.Polynomial(rng.uniform(0.5, 1.5, 4))
        lhs, rhs = abel_duality(f0, psi, p)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return {"max_rel_residual": worst, "passed": bool(worst <= 1e-8)}


def _check_positivity(dims) -> dict:
    from .abel import AbelParams, solve_g
    from .bodies import profile_of_ql_ball

    p = AbelParams(dims.n, dims.i, dims.ell)
    mins = {}
    for q in (2.0, 3.0, 4.0, 6.0):
        g = solve_g(profile_of_ql_ball(q), p)
        mins[str(q)] = g.min / g.max_abs
    return {"min_g_relative": mins, "passed": bool(min(mins.values()) >= -1e-8)}


def _check_multipliers(n: int) -> dict:
    from .cosine import verify_multipliers

    r = verify_multipliers(n)
    return {"convention": r["convention"], "oracle_max_rel": r["oracle_max_rel"],
            "inversion_max_dev": r["inversion_max_dev"], "passed": True}


def _guard(fn, *args) -> dict:
    try:
        return fn(*args)
    except (CheckFailure, ConvergenceError, PreconditionError) as exc:
        return {"passed": False, "error": f"{type(exc).__name__}: {exc}"}


def cmd_validate(cfg: RunConfig) -> int:
    from .grassmann import Dims

    if any(getattr(cfg, k) is not None for k in ("n", "i", "ell")):
        dims_list = [cfg.dims()]
    else:
        dims_list = [Dims(*d) for d in DEFAULT_VALIDATE_DIMS]
    tol = cfg.tol if cfg.tol is not None else 1e-6
    jobs = []
    for d in dims_list:
        tag = f"n={d.n},i={d.i},ell={d.ell}"
        jobs.append((f"radon_oracle[{tag}]", _check_radon, (d, cfg.seed, tol)))
        if d.ell < d.i <= d.n - d.ell:
            jobs.append((f"abel_duality[{tag}]", _check_abel, (d, cfg.seed)))
        if d.i - d.ell in (1, 2) and d.i <= d.n - d.ell:
            jobs.append((f"g_positivity[{tag}]", _check_positivity, (d,)))
    for n in sorted({d.n for d in dims_list} | ({4, 5, 6, 7, 8} if len(dims_list) > 1 else set())):
        if n >= 2:
            jobs.append((f"multiplier_inversion[n={n}]", _check_multipliers, (n,)))
    # independent checks on a pool; results are collected in job order
    with ThreadPoolExecutor(max_workers=_threads(cfg)) as pool:
        futures = [pool.submit(_guard, fn, *args) for _, fn, args in jobs]
        results = {name: f.result() for (name, _, _), f in zip(jobs, futures)}
    ok = all(r["passed"] for r in results.values())
    out = Output(cfg)
    rows = [(name, r["passed"]) for name, r in results.items()]
    out.finish({"checks": results, "passed": ok, "seed": cfg.seed}, _csv_text(["check", "passed"], rows))
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------- bp


def _profile_table(t, columns: dict) -> str:
    return _csv_text(["t", *columns], zip(t, *columns.values()))


def cmd_bp(cfg: RunConfig) -> int:
    from .bodies import profile_of_ql_ball
    from .quadrature import chebyshev_closed_grid
    from .experiments import (
        bp_positive_check,
        construct_counterexample,
        tight_comparison_scale,
        verify_counterexample,
    )

    if cfg.mode is None:
        raise UsageError("bp needs --mode")
    dims = cfg.dims()
    out = Output(cfg)
    tol = cfg.tol if cfg.tol is not None else 1e-8
    if cfg.mode == "negative":
        if not dims.ell + 2 < dims.i <= dims.n - 1:
            raise PreconditionError(f"negative mode needs ell + 2 < i <= n - 1 (got n={dims.n}, i={dims.i}, "
                                    f"ell={dims.ell})")
        A, spec = construct_counterexample(dims, eps_max=cfg.eps_max, K=cfg.degree, seed=cfg.seed)
        samples = cfg.samples if cfg.samples is not None else 10_000
        B = profile_of_ql_ball(4.0)
        rep = verify_counterexample(A, dims, B=B, samples=samples, seed=cfg.seed, tol=tol)
        t = chebyshev_closed_grid(257)
        P = spec.perturbation()
        from .cosine import cosine_transform, expand_invariant
        from .experiments import _bump_expansion

        phi = cosine_transform(expand_invariant(B.power(dims.n - dims.i), dims.n, dims.ell, cfg.degree),
                               1.0 - dims.i)
        h = _bump_expansion(dims.n, dims.ell, cfg.degree, spec.bump["terms"])
        out.add("profile_A.csv", _profile_table(t, {"rho": A(t)}))
        out.add("profile_B.csv", _profile_table(t, {"rho": B(t)}))
        out.add("diagnostics.csv", _profile_table(t, {"phi": phi(t), "h": h(t), "m_h": P(t)}))
        ok = rep.verdict == "TRUE"
        report = {"bp": rep.to_dict(), "counterexample": spec.to_dict(), "truncation": cfg.degree}
    else:
        A = profile_of_ql_ball(cfg.q)
        ball = profile_of_ql_ball(2.0)
        c = tight_comparison_scale(A, ball, dims)
        B = ball.scaled(c)
        samples = cfg.samples if cfg.samples is not None else 264
        rep = bp_positive_check(A, B, dims, mode=cfg.mode, samples=samples, seed=cfg.seed, tol=tol)
        ok = rep.verdict != "VIOLATION"
        report = {"bp": rep.to_dict(), "b_scale": c}
    sections = _section_table(A, B, dims, cfg.seed)
    out.add("sections.csv", sections)
    out.finish({**report, "passed": ok, "seed": cfg.seed}, sections)
    return EXIT_OK if ok else EXIT_CHECK


def _section_table(A, B, dims, seed: int) -> str:
    """Equal-angle section volumes of A and B on the default lambda grid."""
    from .experiments import _child_seeds, equal_angle_sample
    from .radon import radon_reduced_batch

    _, _, spectra = equal_angle_sample(dims, _child_seeds(seed, 1)[0])
    va = radon_reduced_batch(A.power(dims.i), spectra, dims) / dims.i
    vb = radon_reduced_batch(B.power(dims.i), spectra, dims) / dims.i
    header = [f"lambda{j + 1}" for j in range(dims.m)] + ["volA", "volB"]
    return _csv_text(header, [list(sp) + [a, b] for sp, a, b in zip(spectra, va, vb)])


# ---------------------------------------------------------------- ibody


def cmd_ibody(cfg: RunConfig) -> int:
    from .bodies import profile_of_ql_ball
    from .cosine import intersection_body_test

    if cfg.n is None or cfg.ell is None or cfg.k is None:
        raise PreconditionError("ibody needs --n, --ell and --k")
    if cfg.q <= 0:
        raise PreconditionError(f"q must be positive, got {cfg.q}")
    rtol = cfg.tol if cfg.tol is not None else 1e-6
    res = intersection_body_test(profile_of_ql_ball(cfg.q), cfg.n, cfg.ell, cfg.k, K=cfg.degree, rtol=rtol)
    table = _csv_text(["t", "mu"], zip(res.t, res.mu))
    out = Output(cfg)
    out.add("mu.csv", table)
    out.finish({"ibody": res.to_dict(), "member": res.is_member, "truncation": cfg.degree}, table)
    return EXIT_OK


# ---------------------------------------------------------------- radon


def cmd_radon(cfg: RunConfig) -> int:
    from .experiments import spawn_rngs
    from .grassmann import canonical_lambdas, equal_angle_frame, haar_sample_frame
    from .radon import radon_direct, radon_equal_angle, radon_reduced

    dims = cfg.dims()
    samples = cfg.samples if cfg.samples is not None else 20
    tol = cfg.tol if cfg.tol is not None else 1e-6
    f0 = np.polynomial.Polynomial([1.0, 0.5, -0.3, 0.2])

    def f(th):
        return f0(np.sum(th[:, -dims.ell:] ** 2, axis=1))

    lams = cfg.lambdas()
    rngs = spawn_rngs(cfg.seed, samples + len(lams))
    rows, worst, ok = [], 0.0, True
    for k, rng in enumerate(rngs):
        if k < samples:
            frame, kind = haar_sample_frame(dims.n, dims.i, rng), "haar"
        else:
            frame, kind = equal_angle_frame(dims, lams[k - samples], rng), "equal-angle"
        spec = canonical_lambdas(frame, dims.ell)
        direct = radon_direct(f, frame, seed=rng)
        red = radon_reduced(f0, spec, dims)
        closed = radon_equal_angle(f0, lams[k - samples], dims).value if kind == "equal-angle" else float("nan")
        if direct.method.endswith("mc"):
            # Monte-Carlo rows pass within four standard errors
            res = abs(direct.value - red.value) / (4.0 * direct.error)
            passed = res <= 1.0
        else:
            res = abs(direct.value - red.value) / (1.0 + abs(direct.value))
            passed = res <= tol
        ok = ok and passed
        worst = max(worst, res)
        rows.append([kind, *spec, direct.value, red.value, closed, res, int(passed)])
    header = ["kind", *[f"lambda{j + 1}" for j in range(dims.m)], "direct", "reduced", "equal_angle",
              "residual", "passed"]
    table = _csv_text(header, rows)
    out = Output(cfg)
    out.add("radon.csv", table)
    out.finish({"max_residual": worst, "passed": bool(ok), "samples": samples, "seed": cfg.seed}, table)
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"validate": cmd_validate, "bp": cmd_bp, "ibody": cmd_ibody, "radon": cmd_radon}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"kltomo: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"kltomo: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, CheckFailure) as exc:
        print(f"kltomo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ConvergenceError as exc:
        print(f"kltomo: ConvergenceError: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
