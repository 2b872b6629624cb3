"""Command-line interface: ``rhpemm solve | verify | bench``."""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .certificates import CertificateError, certificate_from_dict
from .hpe import ergodic_history, loglog_slope
from .problems import PrimalDual, builtin_problem, encode_floats, problem_from_json, problem_to_json
from .solver import SolverConfig, complexity_budget, run, trace_to_csv

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_VERIFY_FAILED = 0, 1, 3, 4

DEFAULT_SUITE = [{"family": "known_kkt", "params": {"seed": s}} for s in (0, 1, 2)]


class CliError(Exception):
    pass


def _load_json(text_or_path, what):
    """Parse inline JSON or the contents of a file path."""
    if os.path.isfile(text_or_path):
        with open(text_or_path, encoding="utf-8") as fh:
            text = fh.read()
        where = text_or_path
    else:
        text, where = text_or_path, f"--{what}"
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{where}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")


def load_problem(problem, params=None, seed=None):
    """Registry name (with optional params) or a ``{"family", "params"}`` JSON file."""
    if problem.endswith(".json") or os.path.isfile(problem):
        doc = _load_json(problem, "problem")
        if params:
            raise CliError("--params cannot be combined with a problem file")
    else:
        p = _load_json(params, "params") if params else {}
        if not isinstance(p, dict):
            raise CliError("--params must be a JSON object")
        if seed is not None:
            p.setdefault("seed", seed)
        doc = {"family": problem, "params": p}
    try:
        return problem_from_json(doc)
    except KeyError as exc:
        raise CliError(str(exc.args[0]))
    except ValueError as exc:
        raise CliError(f"problem: {exc}")


def _config_from_args(args):
    cfg = {}
    if args.config:
        loaded = _load_json(args.config, "config")
        if not isinstance(loaded, dict):
            raise CliError("--config must be a JSON object")
        cfg.update(loaded)
    for name in ("sigma", "theta", "delta", "eps", "max_iters", "seed"):
        val = getattr(args, name)
        if val is not None:
            cfg[name] = val
    try:
        return SolverConfig(**cfg)
    except TypeError as exc:
        raise CliError(f"config: {exc}")
    except ValueError as exc:
        raise CliError(f"config: {exc}")


def _budgets(prog, result, config, d0):
    if d0 is None or result.n_iter == 0:
        return None
    M, Me, eta, c, rho_bar = complexity_budget(
        prog, d0, result.lambda1, config.sigma, config.theta, result.tau,
        config.delta, config.eps, np.zeros(prog.m))
    return {"d0": d0, "M": M, "M_ergodic": Me, "eta": eta, "c": c, "rho_bar": rho_bar}


def _d0(prog, given):
    if given is not None:
        return float(given), "user"
    if prog.known_solution is not None:
        z0 = PrimalDual(np.zeros(prog.n), np.zeros(prog.m))
        return z0.distance(prog.known_solution), "known_solution"
    return None, None


def build_report(prog, config, result, d0=None, d0_source=None):
    return encode_floats({
        "problem": problem_to_json(prog),
        "config": config.to_dict(),
        "termination": result.reason,
        "converged": result.converged,
        "iterations": {"total": result.n_iter, "A": result.n_A, "B": result.n_B},
        "lambda1": result.lambda1,
        "tau": result.tau,
        "h": result.h,
        "budgets": _budgets(prog, result, config, d0),
        "d0_source": d0_source,
        "pointwise": result.pointwise.to_dict() if result.pointwise else None,
        "ergodic": result.ergodic.to_dict() if result.ergodic else None,
        "trace_file": "trace.csv",
    })


def _dump(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_solve(args):
    prog = load_problem(args.problem, args.params, args.seed)
    config = _config_from_args(args)
    d0, source = _d0(prog, args.d0)
    result = run(prog, None, config)
    report = build_report(prog, config, result, d0, source)
    os.makedirs(args.out, exist_ok=True)
    _dump(os.path.join(args.out, "report.json"), report)
    with open(os.path.join(args.out, "trace.csv"), "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(result.trace))
    b = report["budgets"]
    print(f"termination={result.reason} iterations={result.n_iter} "
          f"(A={result.n_A}, B={result.n_B})"
          + (f" budget M={b['M']} M_ergodic={b['M_ergodic']}" if b else ""))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_verify(args):
    doc = _load_json(args.certificate, "certificate")
    if not isinstance(doc, dict):
        raise CliError("certificate document must be a JSON object")
    if args.problem:
        prog = load_problem(args.problem, args.params, args.seed)
    elif "problem" in doc:
        try:
            prog = problem_from_json(doc["problem"])
        except (KeyError, ValueError) as exc:
            raise CliError(f"embedded problem: {exc}")
    else:
        raise CliError("no problem given and none embedded in the certificate file")
    certs = [doc[k] for k in ("pointwise", "ergodic") if doc.get(k)] if "kind" not in doc else [doc]
    if not certs:
        raise CliError("no certificate found in file")
    status = EXIT_OK
    for c in certs:
        try:
            cert = certificate_from_dict(c, prog)
        except CertificateError as exc:
            print(f"{c.get('kind')}: FAILED {exc.relation} (excess {exc.margin:.3e})")
            status = EXIT_VERIFY_FAILED
            continue
        except ValueError as exc:
            raise CliError(str(exc))
        margins = " ".join(f"{k}={v:.3e}" for k, v in cert.margins.items())
        print(f"{cert.kind}: ok residual={cert.residual_norm:.3e} eps={cert.eps:.3e} {margins}")
    return status


BENCH_FIELDS = ("problem", "d0", "eta", "c", "rho_bar", "M", "M_ergodic", "iterations",
                "A", "B", "converged", "slope_pointwise", "slope_ergodic")


def _suite(arg):
    if arg is None:
        return DEFAULT_SUITE
    doc = _load_json(arg, "suite")
    if not isinstance(doc, list):
        raise CliError("--suite must be a JSON list")
    out = []
    for entry in doc:
        if isinstance(entry, str):
            entry = {"family": entry, "params": {}}
        if not isinstance(entry, dict) or "family" not in entry:
            raise CliError("suite entries need a 'family' field")
        out.append(entry)
    return out


def bench_rows(suite, config):
    rows = []
    for entry in suite:
        try:
            prog = problem_from_json(entry)
        except KeyError as exc:
            raise CliError(str(exc.args[0]))
        except ValueError as exc:
            raise CliError(f"problem {entry.get('family')!r}: {exc}")
        if prog.known_solution is None:
            raise CliError(f"problem {entry['family']!r} has no known KKT point")
        d0, _ = _d0(prog, None)
        result = run(prog, None, config)
        b = _budgets(prog, result, config, d0) or dict.fromkeys(("eta", "c", "rho_bar", "M", "M_ergodic"))
        vmin = np.minimum.accumulate([np.linalg.norm(r.v) for r in result.records]) if result.records else []
        hist = ergodic_history(result.records, prog.n + prog.m)
        rows.append({
            "problem": json.dumps(problem_to_json(prog), sort_keys=True),
            "d0": d0, **{k: b[k] for k in ("eta", "c", "rho_bar", "M", "M_ergodic")},
            "iterations": result.n_iter, "A": result.n_A, "B": result.n_B,
            "converged": result.converged,
            "slope_pointwise": loglog_slope(vmin),
            "slope_ergodic": loglog_slope([h[0] for h in hist]),
        })
    return rows


def cmd_bench(args):
    suite = _suite(args.suite)
    config = _config_from_args(args)
    rows = bench_rows(suite, config)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "bench.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (format(v, ".17e") if isinstance(v, float) and math.isfinite(v) else v)
                        for k, v in row.items()})
    for row in rows:
        print(f"{row['problem']}: iterations={row['iterations']} M={row['M']}")
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="solver config as JSON text or file")
    p.add_argument("--sigma", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--delta", type=float, help="residual tolerance")
    p.add_argument("--eps", type=float, help="gap tolerance")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rhpemm", description="Solve smooth convex programs, verify certificates, run benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem and write report.json and trace.csv")
    s.add_argument("--problem", required=True, help="registry name or problem JSON file")
    s.add_argument("--params", help="family parameters as JSON text or file")
    s.add_argument("--d0", type=float, help="estimate of the distance to the solution set")
    _add_config_flags(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="re-check a certificate or report against a problem")
    v.add_argument("certificate")
    v.add_argument("--problem", help="registry name or problem JSON file (default: embedded)")
    v.add_argument("--params")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="budgets versus actual iterations on a suite")
    b.add_argument("--suite", help="JSON list of problem descriptors (default: three known_kkt seeds)")
    _add_config_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
