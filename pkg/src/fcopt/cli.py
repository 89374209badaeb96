"""Command-line entry point: ``fcopt run|verify|compare|regularize-solve|corpus``.

Exit codes: 0 success, 1 unreadable input or failed checks, 2 configuration
error, 3 solver failure.  ``--problem`` takes a path to a problem file or
``corpus:<id>`` for a bundled instance.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import corpus
from .errors import ConfigError, ConvergenceError, DomainError, ModelInfeasibleError
from .methods import METHODS, MethodConfig, run_method
from .problem_io import load_problem, problem_to_dict, trace_summary, trace_to_csv
from .regularization import solve_via_regularization
from . import verify as V

log = logging.getLogger("fcopt")

CHECKS = ("theorem_main", "remark_convexity", "vector_growth", "subhomogeneous",
          "constants", "rate")


class _Unreadable(Exception):
    pass


def _setup_logging():
    level = os.environ.get("FCOPT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def get_problem(ref):
    if ref.startswith("corpus:"):
        return corpus.corpus_get(ref.split(":", 1)[1]).problem
    if not os.path.isfile(ref):
        raise _Unreadable(f"cannot read problem file {ref!r}")
    try:
        return load_problem(ref)
    except OSError as exc:
        raise _Unreadable(str(exc)) from None


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _config(args, method, p=None):
    cfg = MethodConfig(method=method, p=p or args.p, iters=args.iters, alpha=args.alpha,
                       beta=args.beta, delta=args.delta, seed=args.seed)
    if getattr(args, "epsilon", None) is not None:
        cfg.epsilon = args.epsilon
    return cfg


def cmd_run(args):
    problem = get_problem(args.problem)
    trace = run_method(problem, _config(args, args.method))
    _emit(trace_to_csv(trace), args.out)
    for w in trace.warnings:
        log.info("warning: %s", w)
    return 0


def _scale(problem):
    cand = [problem.D0, problem.diameter, float(np.linalg.norm(problem.x0))]
    return max([1.0] + [c for c in cand if c is not None and np.isfinite(c)])


def _rate_runs(problem):
    """Traces of every applicable method (100 iterations each)."""
    methods = problem.metadata.get("applicable_methods") or ["full"]
    out = []
    for m in methods:
        for p in ((1, 2) if m in ("full", "restricted") else (1,)):
            try:
                out.append(run_method(problem, MethodConfig(method=m, p=p, iters=100)))
            except ConfigError as exc:
                if len(methods) == 1 and p == 1:
                    raise
                log.info("skipping %s p=%d: %s", m, p, exc)
    return out


def run_checks(problem, checks, samples, seed):
    """All requested checks that apply to ``problem``, as CheckReports."""
    reports = []
    scale = _scale(problem)
    comps = problem.f.components
    norm = problem.norm
    for name in checks:
        if name == "subhomogeneous":
            reports.append(V.check_subhomo_equivalence(problem.F, samples, seed))
        elif name == "constants":
            for c in comps:
                reports.append(V.check_constants(c, samples, seed, scale, norm))
        elif name in ("theorem_main", "remark_convexity"):
            for c in comps:
                for p in (1, 2):
                    if not np.isfinite(c.constants.L(p)):
                        continue
                    if name == "theorem_main":
                        for alpha in sorted({1.0, float(p)}):
                            reports.append(V.check_theorem_main(c, p, alpha, samples, seed,
                                                                scale, norm))
                    else:
                        reports.append(V.check_remark_convexity(c, p, float(p), samples, seed,
                                                                scale, norm))
        elif name == "vector_growth":
            for p in (1, 2):
                if np.all(np.isfinite(problem.f.L(p))):
                    reports.append(V.check_vector_growth(problem.f, p, None, samples, seed, scale))
        elif name == "rate":
            for tr in _rate_runs(problem):
                rep = V.check_rate(tr)
                rep.check = f"rate[{tr.method},p={tr.config.p}]"
                reports.append(rep)
        else:
            raise ConfigError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
    return reports


def _parse_checks(text):
    names = [c.strip() for c in text.split(",") if c.strip()]
    if not names:
        raise ConfigError("empty check list")
    if names == ["all"]:
        return list(CHECKS)
    return names


def cmd_verify(args):
    checks = _parse_checks(args.checks)
    problem = get_problem(args.problem)
    reports = run_checks(problem, checks, args.samples, args.seed)
    _emit("".join(r.to_json() + "\n" for r in reports), args.out)
    return 0 if all(r.passed for r in reports) else 1


def compare_methods(problem, methods, iters, p=1, alpha=1.0, seed=0):
    """Run each method; returns (traces, summary dict, config errors)."""
    traces, errors = {}, {}
    for m in methods:
        try:
            traces[m] = run_method(problem, MethodConfig(method=m, p=p, iters=iters, alpha=alpha,
                                                         seed=seed))
        except ConfigError as exc:
            errors[m] = str(exc)
    summary = {"methods": {}, "errors": errors}
    if problem.known_opt is not None:
        ps, source, margin = problem.known_opt, "known_opt", 0.0
    elif traces:
        best = min(float(np.nanmin(t.phi)) for t in traces.values())
        margin = 1e-9 * (1 + abs(best))
        ps, source = best - margin, "best_final_value"
    else:
        ps, source, margin = None, "none", 0.0
    summary.update(phi_star=ps, phi_star_source=source, margin=margin)
    for m, t in traces.items():
        if source == "best_final_value":
            # proxy reference: rewrite the gap column against it
            t.phi_star = ps
            for r in t.rows:
                r["gap"] = r["phi"] - ps
        rep = V.check_rate(t, ps)
        summary["methods"][m] = {
            "final_phi": float(t.phi[-1]),
            "final_gap": None if ps is None else float(t.phi[-1] - ps),
            "bound_satisfied": bool(rep.passed) if rep.status != "inconclusive" else None,
            "status": t.status, "warnings": t.warnings,
        }
    return traces, summary, errors


def cmd_compare(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ConfigError("empty method list")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    problem = get_problem(args.problem)
    traces, summary, errors = compare_methods(problem, methods, args.iters, args.p, args.alpha,
                                              args.seed)
    os.makedirs(args.out, exist_ok=True)
    for m, t in traces.items():
        with open(os.path.join(args.out, f"{m}.csv"), "w", newline="") as fh:
            fh.write(trace_to_csv(t))
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for m, msg in errors.items():
        print(f"{m}: {msg}", file=sys.stderr)
    return 2 if errors else 0


def cmd_regularize(args):
    problem = get_problem(args.problem)
    trace = solve_via_regularization(problem, args.p, args.epsilon, iters=args.iters)
    _emit(trace_to_csv(trace), args.out)
    info = {k: v for k, v in trace.info.items() if k != "regularized"}
    info.update(trace_summary(trace))
    print(json.dumps(info, sort_keys=True, default=float), file=sys.stderr)
    return 0


def cmd_corpus(args):
    if args.action == "list":
        for e in corpus.corpus_list():
            meta = e.metadata
            print(f"{e.id}\t{','.join(e.applicable_methods)}\t{meta.get('analytic_opt', '')}")
        return 0
    if not args.id:
        raise ConfigError("corpus show/export needs an entry id")
    entry = corpus.corpus_get(args.id)
    text = json.dumps(problem_to_dict(entry.problem), indent=1) + "\n"
    _emit(text, args.out if args.action == "export" else None)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="fcopt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, method=True):
        sp.add_argument("--problem", required=True, help="problem file or corpus:<id>")
        sp.add_argument("--p", type=int, choices=(1, 2), default=1)
        sp.add_argument("--iters", type=int, default=100)
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="run one method and write its trace CSV")
    common(run)
    run.add_argument("--method", required=True, choices=sorted(METHODS))
    run.add_argument("--beta", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="sampled inequality checks, JSON lines")
    ver.add_argument("--problem", required=True)
    ver.add_argument("--checks", default="all", help="all or a comma-separated list of "
                     + ", ".join(CHECKS))
    ver.add_argument("--samples", type=int, default=10000)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)

    cmp_ = sub.add_parser("compare", help="run several methods on one problem")
    common(cmp_)
    cmp_.add_argument("--methods", required=True, help="comma-separated method names")
    cmp_.add_argument("--out", required=True, help="output directory")
    cmp_.set_defaults(func=cmd_compare)

    reg = sub.add_parser("regularize-solve", help="solve a convex problem via regularization")
    reg.add_argument("--problem", required=True)
    reg.add_argument("--p", type=int, choices=(1, 2), default=1)
    reg.add_argument("--epsilon", type=float, default=1e-3)
    reg.add_argument("--iters", type=int, default=20000)
    reg.add_argument("--out")
    reg.set_defaults(func=cmd_regularize)

    cor = sub.add_parser("corpus", help="list or export bundled problems")
    cor.add_argument("action", choices=("list", "show", "export"))
    cor.add_argument("id", nargs="?")
    cor.add_argument("--out")
    cor.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Unreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ModelInfeasibleError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
