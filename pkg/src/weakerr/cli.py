"""Command-line front end.

One subcommand per experiment: ``oracle`` (noise-free weak error), ``mc``
(Monte Carlo report), ``psi`` (density values on a grid), ``c1`` (leading
constant), ``converge`` (order fit), ``expand`` (first-order expansion
check), and ``richardson`` (extrapolated errors).

Exit codes: 0 success, 2 configuration or precondition error, 3 numerical
failure, 4 IO failure.  Seeded runs are bit-reproducible, emitted files
included.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .expansion import PSI_NAMES, PsiKind, leading_constant, psi_at
from .jets import InsufficientJetOrder
from .montecarlo import McConfig, estimate_weak_error, oracle_report, richardson
from .moments_oracle import weak_error_exact
from .problems import Problem, gbm_family_problem, get_problem, ou_family_problem
from .rates import TooFewPoints, expansion_check, fit_rate
from .reports import emit_report
from .schemes import NoConvergence, SchemeConfig, SingularSh
from . import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_SOLVER_ALIASES = {"fp": "fixed_point", "newton": "newton", "affine": "closed_form_affine"}

_CONFIG_KEYS = ("name", "x0", "horizon", "theta", "sigma", "mu", "s", "f_poly")


def parse_problem_config(text: str) -> Problem:
    """Build a custom affine problem from key = value lines.

    Grammar (one ``key = value`` pair per line, ``#`` comments allowed):
    ``name``, ``x0``, ``horizon``, ``f_poly`` (comma-separated coefficients,
    constant term first), and either ``theta`` with ``sigma`` (drift -theta*x,
    constant diffusion) or ``mu`` with ``s`` (drift mu*x, diffusion s*x).
    """
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()

    name = entries.pop("name", "custom")
    try:
        x0 = float(entries.pop("x0", "1.0"))
        horizon = float(entries.pop("horizon", "1.0"))
        f_poly = tuple(float(c) for c in entries.pop("f_poly", "0, 0, 1").split(","))
        params = {k: float(v) for k, v in entries.items()}
    except ValueError as err:
        raise ValueError(f"config value does not parse as a number: {err}") from None

    if "theta" in params:
        if "mu" in params:
            raise ValueError("config must set either theta or mu, not both")
        if "s" in params:
            raise ValueError("theta-form problems use 'sigma', not 's'")
        return ou_family_problem(name, theta=params["theta"],
                                 sigma=params.get("sigma", 1.0),
                                 f_poly=f_poly, x0=x0, horizon=horizon)
    if "mu" in params:
        if "sigma" in params:
            raise ValueError("mu-form problems use 's', not 'sigma'")
        return gbm_family_problem(name, mu=params["mu"], s=params.get("s", 0.2),
                                  f_poly=f_poly, x0=x0, horizon=horizon)
    raise ValueError("config must set one of theta (mean-reverting) or mu (proportional)")


def _resolve_problem(args) -> Problem:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            return parse_problem_config(fh.read())
    return get_problem(args.problem)


def _psi_kind(args) -> PsiKind:
    h = getattr(args, "h", None)
    if args.kind == "psi_ih":
        if h is None:
            raise ValueError("kind psi_ih needs --h")
        return PsiKind("psi_ih", h=h)
    if h is not None:
        raise ValueError(f"kind {args.kind} is h-free; drop --h")
    return PsiKind(args.kind)


def _parse_levels(text: str) -> tuple:
    try:
        levels = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ValueError(f"levels must be comma-separated integers, got {text!r}") from None
    if not levels or any(n < 1 for n in levels):
        raise ValueError("levels must be positive integers")
    return levels


def _scheme_config(args, n_steps: int) -> SchemeConfig:
    return SchemeConfig(n_steps=n_steps, kind=args.scheme,
                        fp_tol=args.fp_tol, fp_max_iter=args.fp_max_iter,
                        solver=_SOLVER_ALIASES[args.solver])


def _deliver(report, args, default_format: str = "json") -> None:
    fmt = args.format or default_format
    if args.out:
        emit_report(report, fmt, args.out)
    elif fmt == "json":
        from .reports import _json_payload
        print(json.dumps(_json_payload(report), indent=2))
    elif fmt == "csv":
        from .reports import _csv_table
        header, rows = _csv_table(report)
        print(",".join(header))
        for row in rows:
            print(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    else:
        raise ValueError("svg output needs --out")


def _cmd_oracle(args) -> None:
    p = _resolve_problem(args)
    cfg = _scheme_config(args, args.n_steps)
    we = weak_error_exact(p, cfg)
    _deliver({"problem": p.name, "scheme": cfg.kind, "n_steps": cfg.n_steps,
              "h": p.horizon / cfg.n_steps, "weak_error": we}, args)


def _cmd_mc(args) -> None:
    p = _resolve_problem(args)
    levels = _parse_levels(args.levels)
    finest = args.finest_n
    if finest is None:
        finest = max(levels) if p.exact_terminal is not None else 8 * max(levels)
    mc = McConfig(n_paths=args.paths, seed=args.seed, finest_n=finest,
                  levels=levels, antithetic=args.antithetic)
    report = estimate_weak_error(p, mc, args.scheme, fp_tol=args.fp_tol,
                                 fp_max_iter=args.fp_max_iter,
                                 solver=_SOLVER_ALIASES[args.solver]
                                 if args.solver != "auto" else None)
    _deliver(report, args)


def _cmd_psi(args) -> None:
    p = _resolve_problem(args)
    if p.u_jet is None:
        raise ValueError(f"problem {p.name!r} has no closed-form u; psi is unavailable")
    if args.format not in (None, "csv"):
        raise ValueError("the psi table is emitted as csv only")
    kind = _psi_kind(args)
    try:
        nt, nx = (int(tok) for tok in args.grid.lower().split("x"))
    except ValueError:
        raise ValueError(f"--grid must look like 20x20, got {args.grid!r}") from None
    ts = np.linspace(0.0, p.horizon - 1e-3, nt)
    xs = np.linspace(p.x0 - 3.0, p.x0 + 3.0, nx)
    rows = [[float(t), float(x), psi_at(p, kind, float(t), float(x))]
            for t in ts for x in xs]
    text_rows = [",".join(repr(float(v)) for v in row) for row in rows]
    payload = "t,x,psi\n" + "\n".join(text_rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    else:
        print(payload, end="")


def _cmd_c1(args) -> None:
    p = _resolve_problem(args)
    kind = _psi_kind(args)
    _deliver(leading_constant(p, kind, quad_nodes=args.quad_nodes), args)


def _cmd_converge(args) -> None:
    p = _resolve_problem(args)
    levels = _parse_levels(args.levels)
    points = [(p.horizon / n, weak_error_exact(p, _scheme_config(args, n)))
              for n in sorted(set(levels))]
    _deliver(fit_rate(points), args)


def _cmd_expand(args) -> None:
    p = _resolve_problem(args)
    table = expansion_check(p, _parse_levels(args.levels), kind=_psi_kind(args),
                            quad_nodes=args.quad_nodes)
    _deliver(table, args)


def _cmd_richardson(args) -> None:
    p = _resolve_problem(args)
    levels = _parse_levels(args.levels)
    if args.estimator == "oracle":
        report = oracle_report(p, args.scheme, levels)
    else:
        finest = args.finest_n
        if finest is None:
            finest = max(levels) if p.exact_terminal is not None else 8 * max(levels)
        mc = McConfig(n_paths=args.paths, seed=args.seed, finest_n=finest,
                      levels=levels, antithetic=args.antithetic)
        report = estimate_weak_error(p, mc, args.scheme, fp_tol=args.fp_tol,
                                     fp_max_iter=args.fp_max_iter)
    _deliver(richardson(report), args)


def _add_common(sub, scheme: bool = True) -> None:
    sub.add_argument("--problem", default="ou", help="builtin problem name (bm, ou, gbm, tanh)")
    sub.add_argument("--config", help="custom problem definition file (overrides --problem)")
    sub.add_argument("--out", help="write the report to this path instead of stdout")
    sub.add_argument("--format", choices=("json", "csv", "svg"),
                     help="output format (default json; psi emits csv)")
    if scheme:
        sub.add_argument("--scheme", choices=("explicit", "implicit"), default="implicit")
        sub.add_argument("--fp-tol", type=float, default=1e-12)
        sub.add_argument("--fp-max-iter", type=int, default=100)
        sub.add_argument("--solver", choices=tuple(_SOLVER_ALIASES), default="fp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakerr",
        description="Weak-error experiments for explicit and drift-implicit Euler schemes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("oracle", help="noise-free weak error from the moment oracle")
    _add_common(sub)
    sub.add_argument("--n-steps", type=int, required=True)
    sub.set_defaults(func=_cmd_oracle)

    sub = subs.add_parser("mc", help="Monte Carlo weak-error report on coupled levels")
    _add_common(sub)
    sub.add_argument("--levels", required=True, help="comma-separated grid sizes")
    sub.add_argument("--paths", type=int, default=1_000_000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--finest-n", type=int, default=None)
    sub.add_argument("--antithetic", action=argparse.BooleanOptionalAction, default=True)
    sub.set_defaults(func=_cmd_mc, solver="auto")

    sub = subs.add_parser("psi", help="density values on a (t, x) grid, as CSV")
    _add_common(sub, scheme=False)
    sub.add_argument("--kind", choices=PSI_NAMES, default="psi_i")
    sub.add_argument("--h", type=float, default=None, help="step size for psi_ih")
    sub.add_argument("--grid", default="20x20")
    sub.set_defaults(func=_cmd_psi)

    sub = subs.add_parser("c1", help="leading constant E int psi(t, X_t) dt")
    _add_common(sub, scheme=False)
    sub.add_argument("--kind", choices=PSI_NAMES, default="psi_i")
    sub.add_argument("--h", type=float, default=None, help="step size for psi_ih")
    sub.add_argument("--quad-nodes", type=int, default=64)
    sub.set_defaults(func=_cmd_c1)

    sub = subs.add_parser("converge", help="log-log order fit of oracle weak errors")
    _add_common(sub)
    sub.add_argument("--levels", default="16,32,64,128,256,512")
    sub.set_defaults(func=_cmd_converge)

    sub = subs.add_parser("expand", help="first-order expansion check: weak_err - h*C1")
    _add_common(sub, scheme=False)
    sub.add_argument("--levels", default="16,32,64,128,256,512")
    sub.add_argument("--kind", choices=PSI_NAMES, default="psi_i")
    sub.add_argument("--h", type=float, default=None)
    sub.add_argument("--quad-nodes", type=int, default=64)
    sub.set_defaults(func=_cmd_expand)

    sub = subs.add_parser("richardson", help="extrapolated errors on matched level pairs")
    _add_common(sub)
    sub.add_argument("--levels", default="16,32,64,128,256,512")
    sub.add_argument("--estimator", choices=("oracle", "mc"), default="oracle")
    sub.add_argument("--paths", type=int, default=1_000_000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--finest-n", type=int, default=None)
    sub.add_argument("--antithetic", action=argparse.BooleanOptionalAction, default=True)
    sub.set_defaults(func=_cmd_richardson)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (NoConvergence, SingularSh) as err:
        print(f"weakerr: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TooFewPoints, InsufficientJetOrder) as err:
        print(f"weakerr: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        path = getattr(err, "filename", None)
        print(f"weakerr: IO failure{f' on {path}' if path else ''}: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
