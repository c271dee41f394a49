"""Command-line front end.

    treediffusion solve        numerical solution -> field.csv + summary.json
    treediffusion axioms       averaging-axiom report -> axioms.json
    treediffusion decay-check  solve + decay bound report -> decay.json, decay.csv
    treediffusion eigen-check  separable eigen-solution vs numerics -> eigen.json, eigen.csv
    treediffusion compare      comparison principle on ordered data -> compare.json
    treediffusion closed-form  exact solution values / polynomials -> closed_form.csv
    treediffusion picard       fixed-point iteration trace -> picard.json

Exit status: 0 on success, 2 when a mathematical check fails (the report
names the counterexample), 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .averaging import verify_axioms
from .closedform import (finite_support_exact, geometric_eigen, level_constant_solution,
                         monomial_example, scaling_eigen, subfactorial_datum)
from .config import ExperimentConfig, load_config
from .data import (FiniteSupport, Geometric, LevelFunction, ScalingEigen, TimeGrid,
                   datum_from_dict, matching_closure)
from .decay import check_decay, support_stats
from .exceptions import ConfigError, IterationLimitError, TreeDiffusionError
from .fuzz import fuzz_operator, random_ordered_pair
from .solver import (contraction_factor, picard_iterate, residual_norm, sample_field,
                     solve_ivp)
from .tree import format_path

logger = logging.getLogger("treediffusion")

EXIT_OK, EXIT_USAGE, EXIT_CHECK_FAILED = 0, 1, 2

DEFAULT_DT = 1e-3
DEFAULT_T = 10.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(parser):
    g = parser.add_argument_group("experiment")
    g.add_argument("--config", help="JSON config file; flags override its fields")
    g.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    g.add_argument("--operator", help="mean | p_average | median_mean | median_midrange | minmax_mean")
    g.add_argument("--p", type=float)
    g.add_argument("--alpha", type=float, help="blend weight of the averaging operator")
    g.add_argument("--m", type=int)
    g.add_argument("--depth", type=int)
    g.add_argument("--T", type=float, dest="t_end")
    g.add_argument("--dt", type=float)
    g.add_argument("--steps", type=int)
    g.add_argument("--closure", help="zero | geometric_envelope | eigen_extension | level_extension | auto")
    g.add_argument("--seed", type=int)
    d = parser.add_argument_group("initial datum")
    d.add_argument("--datum", help="fn | finite_support | geometric | level_function | scaling_eigen")
    d.add_argument("--n", type=int, help="level of the n! datum (fn)")
    d.add_argument("--k", type=float)
    d.add_argument("--lambda", type=float, dest="lam")
    d.add_argument("--C", type=float)
    d.add_argument("--levels", help="comma-separated per-level values")
    d.add_argument("--table", help='JSON object {"0.1": 2.0, ...}')
    d.add_argument("--a0-alpha", type=float, dest="a0_alpha",
                   help="exponent of a_0(t) = (1+t)^-alpha for level_extension closures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="treediffusion", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the initial-value problem")
    _common(p)
    p.add_argument("--store", choices=("full", "stream"), default="full")
    p.add_argument("--root-only", action="store_true", help="export only the root trajectory")

    p = sub.add_parser("axioms", help="check the averaging axioms")
    _common(p)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("decay-check", help="compare a solution against its decay bound")
    _common(p)
    p.add_argument("--atol", type=float)
    p.add_argument("--rtol", type=float, default=1e-6)

    p = sub.add_parser("eigen-check", help="separable eigen-solution against the solver")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-5)

    p = sub.add_parser("compare", help="comparison principle on seeded ordered pairs")
    _common(p)
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--mixed", action="store_true", help="draw a random operator per pair")

    p = sub.add_parser("closed-form", help="emit exact oracle values")
    _common(p)
    p.add_argument("--kind", required=True,
                   choices=("monomial", "geometric", "scaling", "level", "subfactorial", "polynomial"))
    p.add_argument("--max-level", type=int, default=6)

    p = sub.add_parser("picard", help="fixed-point iteration with contraction ratios")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    return parser


# -- configuration assembly


def _datum_from_flags(args):
    kind = args.datum
    if kind is None:
        return None
    if kind == "fn":
        if args.n is None:
            raise ConfigError("--datum fn needs --n")
        return {"kind": "fn", "n": args.n}
    if kind == "geometric":
        return {"kind": "geometric", "k": 1.0 if args.k is None else args.k,
                "lambda": _need(args.lam, "--lambda")}
    if kind == "scaling_eigen":
        return {"kind": "scaling_eigen", "C": 1.0 if args.C is None else args.C,
                "lambda": _need(args.lam, "--lambda")}
    if kind == "level_function":
        levels = _need(args.levels, "--levels")
        try:
            return {"kind": "level_function", "levels": [float(v) for v in levels.split(",")]}
        except ValueError:
            raise ConfigError(f"--levels: cannot parse {levels!r}") from None
    if kind == "finite_support":
        try:
            table = json.loads(_need(args.table, "--table"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--table: {exc.msg}") from None
        return {"kind": "finite_support", "table": table}
    raise ConfigError(f"--datum: unknown kind {kind!r}")


def _need(value, flag):
    if value is None:
        raise ConfigError(f"missing {flag}")
    return value


def assemble_config(args) -> ExperimentConfig:
    raw = load_config(args.config) if args.config else {}
    raw = json.loads(json.dumps(raw))  # detached copy
    tree = raw.setdefault("tree", {})
    op = dict(raw.get("operator") or {})
    grid = raw.setdefault("grid", {})

    if args.m is not None:
        tree["m"] = args.m
    m = int(tree.get("m", 2))
    if args.operator is not None:
        op = {"kind": args.operator}
    if args.p is not None:
        op["p"] = args.p
    if args.alpha is not None:
        op["alpha"] = args.alpha
    op.setdefault("kind", "mean")
    op["arity"] = m if args.m is not None or "arity" not in op else op["arity"]
    raw["operator"] = op

    datum = _datum_from_flags(args)
    if datum is not None:
        raw["datum"] = datum
    if args.depth is not None:
        tree["depth"] = args.depth
    elif "depth" not in tree and raw.get("datum", {}) and raw["datum"].get("kind") == "fn":
        tree["depth"] = int(raw["datum"]["n"])

    t_end = args.t_end if args.t_end is not None else grid.get("t_end", DEFAULT_T)
    grid["t_end"] = float(t_end)
    if args.steps is not None:
        grid["steps"] = args.steps
    elif args.dt is not None or "steps" not in grid:
        dt = args.dt if args.dt is not None else DEFAULT_DT
        grid["steps"] = max(1, int(round(float(t_end) / dt)))

    if args.seed is not None:
        raw["seed"] = args.seed
    if args.closure is not None and args.closure != "auto":
        closure = {"kind": args.closure}
        if args.closure == "level_extension" and args.a0_alpha is not None:
            closure["alpha"] = args.a0_alpha
        if args.closure in ("geometric_envelope", "eigen_extension"):
            closure["lambda"] = args.lam
            closure["k" if args.closure == "geometric_envelope" else "C"] = (
                args.k if args.closure == "geometric_envelope" else args.C) or 1.0
        raw["closure"] = closure
        auto_closure = False
    else:
        auto_closure = args.closure == "auto" or "closure" not in raw

    cfg = ExperimentConfig.from_dict(raw)
    if auto_closure and cfg.datum is not None:
        cfg.closure = matching_closure(cfg.datum)
    return cfg.validate()


def _require_datum(cfg):
    if cfg.datum is None:
        raise ConfigError("datum: this command needs an initial datum (--datum or config)")
    return cfg.datum


def _out_dir(args) -> Path:
    path = Path(args.out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: cannot create {path}: {exc.strerror}") from None
    return path


def _say(line):
    print(line)


# -- commands


def cmd_solve(args):
    cfg = assemble_config(args)
    datum = _require_datum(cfg)
    shape = cfg.shape()
    field = solve_ivp(shape, cfg.operator, datum, cfg.grid, cfg.closure, store=args.store)
    residual = residual_norm(field) if field.is_full else None
    out = _out_dir(args)
    io.export_field_csv(field, out / "field.csv", root_only=args.root_only)
    summary = field.summary(residual)
    summary["config"] = cfg.to_dict()
    io.export_json(summary, out / "summary.json")
    _say(f"solved {shape.n_vertices} vertices x {cfg.grid.steps} steps; "
         f"root u(T) = {field.root[-1]:.10g}; max |u| = {field.sup_norm.max():.10g}")
    return EXIT_OK


def cmd_axioms(args):
    cfg = assemble_config(args)
    report = verify_axioms(cfg.operator, args.samples, cfg.seed)
    io.export_json(report.to_dict(), _out_dir(args) / "axioms.json")
    for name, ok in report.passed.items():
        _say(f"{name:14s} {'PASS' if ok else 'FAIL'}")
    if not report.all_passed:
        _say(f"counterexample: {report.counterexample}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_decay_check(args):
    cfg = assemble_config(args)
    datum = _require_datum(cfg)
    field = solve_ivp(cfg.shape(), cfg.operator, datum, cfg.grid, cfg.closure, store="stream")
    if isinstance(datum, Geometric):
        report = check_decay(field, datum, "geometric", rtol=args.rtol, atol=args.atol)
    elif isinstance(datum, (FiniteSupport, LevelFunction)):
        report = check_decay(field, support_stats(datum), "finite_support",
                             rtol=args.rtol, atol=args.atol)
    else:
        raise ConfigError(f"datum: decay bounds do not cover {datum.kind} data")
    out = _out_dir(args)
    io.export_json(report.to_dict(), out / "decay.json")
    io.export_decay_csv(report, out / "decay.csv")
    ratio = report.ratio
    finite = np.isfinite(ratio)
    last = float(ratio[finite][-1]) if finite.any() else float("nan")
    _say(f"{report.kind} bound: first_valid_time = {report.first_valid_time}; "
         f"final max|u|/bound = {last:.8g}; monotone = {report.monotone}")
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def cmd_eigen_check(args):
    if args.datum is None and args.config is None:
        lam = 0.5 if args.lam is None else args.lam
        args.datum = "geometric" if lam < 1 else "scaling_eigen"
        args.lam = lam
        if args.depth is None:
            args.depth = 8
        if args.t_end is None:
            args.t_end = 5.0
    cfg = assemble_config(args)
    datum = _require_datum(cfg)
    shape = cfg.shape()
    if isinstance(datum, Geometric) and not datum.weights:
        k, lam = datum.k, datum.lam
        exact = lambda lv, t: k * np.exp(-lam * t) * (1.0 - lam) ** lv  # noqa: E731
    elif isinstance(datum, ScalingEigen):
        C, lam = datum.C, datum.lam
        exact = lambda lv, t: C * np.exp((lam - 1.0) * t) * lam ** lv  # noqa: E731
    else:
        raise ConfigError("datum: eigen-check needs an unweighted geometric or a scaling_eigen datum")
    numeric = solve_ivp(shape, cfg.operator, datum, cfg.grid, cfg.closure, store="stream")
    t = cfg.grid.nodes
    root_exact = exact(0.0, t)
    root_error = float(np.abs(numeric.root - root_exact).max())
    sampled = sample_field(shape, cfg.grid, exact, cfg.closure, cfg.operator, datum)
    residual = residual_norm(sampled)
    del sampled
    ok = root_error <= args.tol and residual <= args.tol
    out = _out_dir(args)
    io.export_json({"operator": cfg.operator.to_dict(), "datum": datum.to_dict(),
                    "closure": cfg.closure.to_dict(), "depth": shape.depth, "m": shape.m,
                    "dt": cfg.grid.dt, "T": cfg.grid.t_end, "root_sup_error": root_error,
                    "residual": residual, "tol": args.tol, "pass": ok}, out / "eigen.json")
    io.export_rows_csv(("vertex", "level", "psi", "t", "value", "exact"),
                       (("", 0, 0.0, tk, u, e) for tk, u, e in zip(t, numeric.root, root_exact)),
                       out / "eigen.csv")
    _say(f"root sup error = {root_error:.3e}; residual = {residual:.3e}; tol = {args.tol:g}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_compare(args):
    cfg = assemble_config(args)
    shape = cfg.shape()
    rng = np.random.default_rng(cfg.seed)
    upper = cfg.options.get("upper")
    results = []
    worst = -math.inf
    counterexample = None
    if cfg.datum is not None and upper is not None:
        pairs = [(cfg.datum.values(shape), datum_from_dict(upper).values(shape), cfg.operator)]
        if np.any(pairs[0][0] > pairs[0][1]):
            raise ConfigError("options.upper: the upper datum must dominate the datum pointwise")
    else:
        pairs = []
        for _ in range(args.pairs):
            f, g = random_ordered_pair(shape, rng)
            spec = fuzz_operator(rng, shape.m) if args.mixed else cfg.operator
            pairs.append((f, g, spec))
    for i, (f, g, spec) in enumerate(pairs):
        u = solve_ivp(shape, spec, f, cfg.grid, cfg.closure)
        v = solve_ivp(shape, spec, g, cfg.grid, cfg.closure)
        gap = u.values - v.values
        excess = float(gap.max())
        results.append({"pair": i, "operator": spec.to_dict(), "max_u_minus_v": excess})
        if excess > worst:
            worst = excess
        if excess > args.tol and counterexample is None:
            k, r = np.unravel_index(int(np.argmax(gap)), gap.shape)
            counterexample = {"pair": i, "node": int(k), "t": float(cfg.grid.nodes[k]),
                              "vertex": format_path(shape.path(int(r))), "excess": excess}
    ok = counterexample is None
    io.export_json({"pairs": results, "worst": worst, "tol": args.tol, "pass": ok,
                    "counterexample": counterexample}, _out_dir(args) / "compare.json")
    _say(f"{len(pairs)} ordered pairs; max(u - v) = {worst:.3e}; tol = {args.tol:g}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_closed_form(args):
    out = _out_dir(args)
    kind = args.kind
    t_end = DEFAULT_T if args.t_end is None else args.t_end
    steps = args.steps or 10
    times = TimeGrid(t_end, steps).nodes
    levels = range(args.max_level + 1)
    if kind == "subfactorial":
        rows = [(n, subfactorial_datum(n)) for n in levels]
        io.export_rows_csv(("level", "value"), rows, out / "closed_form.csv")
        _say(", ".join(str(v) for _, v in rows))
        return EXIT_OK
    if kind == "polynomial":
        cfg = assemble_config(args)
        datum = _require_datum(cfg)
        solution = finite_support_exact(cfg.shape(), datum, cfg.operator)
        io.export_polynomial_csv(solution, out / "closed_form.csv")
        _say("root coefficients: " + ", ".join(str(c) for c in solution.root_coeffs()))
        return EXIT_OK
    if kind == "monomial":
        fn = lambda lvl, t: monomial_example(_need(args.n, "--n"), lvl, t)  # noqa: E731
    elif kind == "geometric":
        fn = lambda lvl, t: geometric_eigen(args.k or 1.0, _need(args.lam, "--lambda"), lvl, t)  # noqa: E731
    elif kind == "scaling":
        fn = lambda lvl, t: scaling_eigen(args.C if args.C is not None else 1.0,  # noqa: E731
                                          _need(args.lam, "--lambda"), lvl, t)
    else:
        alpha = 1.0 if args.a0_alpha is None else args.a0_alpha
        fn = lambda lvl, t: level_constant_solution(alpha, lvl, t)  # noqa: E731
    rows = [(lvl, t, fn(lvl, float(t))) for lvl in levels for t in times]
    io.export_rows_csv(("level", "t", "value"), rows, out / "closed_form.csv")
    _say(f"wrote {len(rows)} rows")
    return EXIT_OK


def cmd_picard(args):
    if args.t_end is None and args.config is None:
        args.t_end = 1.0
    cfg = assemble_config(args)
    datum = _require_datum(cfg)
    factor = contraction_factor(cfg.grid.t_end)
    out = _out_dir(args)
    try:
        result = picard_iterate(cfg.shape(), cfg.operator, datum, cfg.grid, cfg.closure,
                                max_iter=args.max_iter, tol=args.tol)
    except IterationLimitError as exc:
        io.export_json({"trace": exc.trace, "converged": False, "factor": factor},
                       out / "picard.json")
        _say(str(exc))
        return EXIT_CHECK_FAILED
    ratios = result.ratios
    bad = [i for i, r in enumerate(ratios) if r > factor + 1e-9]
    ok = not bad
    report = {"trace": result.trace, "ratios": ratios, "factor": factor, "converged": True,
              "iterations": result.iterations, "pass": ok,
              "counterexample": None if ok else {"iteration": bad[0] + 1, "ratio": ratios[bad[0]]}}
    io.export_json(report, out / "picard.json")
    io.export_field_csv(result.field, out / "picard_root.csv", root_only=True)
    _say(f"{result.iterations} iterations; max ratio = {max(ratios, default=0.0):.4f} "
         f"<= 1 - e^-T = {factor:.4f}: {ok}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "axioms": cmd_axioms,
    "decay-check": cmd_decay_check,
    "eigen-check": cmd_eigen_check,
    "compare": cmd_compare,
    "closed-form": cmd_closed_form,
    "picard": cmd_picard,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except (TreeDiffusionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
