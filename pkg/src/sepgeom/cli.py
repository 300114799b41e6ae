"""Command-line front end.

Every command produces a report holding the computed quantity, a short
description tag, error estimates and a verbatim echo of the run
configuration.  Reports are rendered as JSON (sorted keys) or CSV (``#``
comment header followed by a table); neither contains timestamps, so
identical configurations give byte-identical output.

Exit codes: 0 success, 1 acceptance failures (``selftest``), 2 domain
errors and bad arguments, 3 convergence failures, 4 normalisation or
support failures.  Failures are also reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__, acceptance, husimi, integration, metrics, priors, states
from .errors import ConvergenceError, DomainError, NormalizationFailure, SepGeomError

EXIT_OK, EXIT_ACCEPTANCE, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_NORMALIZATION = 0, 1, 2, 3, 4

FAMILY_ALIASES = {"bloch": "bloch_qubit", "escort": "escort_qubit", "qutrit": "qutrit_v",
                  "ar": "ar_bell", "trivariate": "jaynes_alpha", "bivariate": "jaynes_alpha_bivariate"}
#: Metric ids accepted by ``metric``; ``bures_extended`` is the Bures metric on a chart that includes q.
METRIC_CHOICES = ("bures", "bures_extended", "wigner_yanase", "hs")


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class RunConfig:
    seed: int
    tol: Optional[float]
    q_range: tuple
    output_format: str
    kappa_convention: str
    command: list = field(default_factory=list)

    def echo(self) -> dict:
        d = asdict(self)
        d["q_range"] = list(self.q_range)
        return d


@dataclass
class Report:
    quantity: str
    tag: str
    result: dict
    columns: Optional[Sequence[str]] = None
    rows: Optional[list] = None
    exit_code: int = EXIT_OK


def _clean(v):
    """JSON-safe values: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def render(report: Report, config: RunConfig) -> str:
    if config.output_format == "json":
        payload = {"quantity": report.quantity, "tag": report.tag, "config": config.echo(),
                   "result": report.result, "version": __version__}
        if report.rows is not None:
            payload["columns"] = list(report.columns)
            payload["rows"] = [dict(zip(report.columns, r)) for r in report.rows]
        return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# quantity: {report.quantity}\n# tag: {report.tag}\n")
    buf.write(f"# config: {json.dumps(_clean(config.echo()), sort_keys=True)}\n")
    wr = csv.writer(buf, lineterminator="\n")
    if report.rows is not None:
        wr.writerow(report.columns)
        for r in report.rows:
            wr.writerow(["" if x is None else (repr(float(x)) if isinstance(x, (float, np.floating)) else x)
                         for x in r])
    else:
        wr.writerow(["key", "value"])
        for k, v in sorted(_flatten(_clean(report.result)).items()):
            wr.writerow([k, "" if v is None else v])
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


# ----------------------------------------------------------------- helpers


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse number list {text!r}") from exc


def _range(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 2:
        raise DomainError(f"expected lo:hi, got {text!r}")
    lo, hi = (float(p) for p in parts)
    if not lo < hi:
        raise DomainError("range needs lo < hi")
    return lo, hi


def _chart(args) -> states.FamilyChart:
    fam = FAMILY_ALIASES.get(args.family, args.family)
    params = {}
    if fam in ("ar_bell",):
        params["q"] = args.q if args.q is not None else 1.0
        if args.extended:
            params["extended"] = True
    elif fam == "qutrit_v":
        params["extended"] = bool(args.extended or args.metric == "bures_extended")
    elif fam in ("jaynes_alpha", "jaynes_alpha_bivariate"):
        params["alpha"] = args.alpha if args.alpha is not None else 1.0
    return states.get_chart(fam, **params)


def _tol(config: RunConfig, default: float) -> float:
    return config.tol if config.tol is not None else default


# ---------------------------------------------------------------- commands


def cmd_metric(args, config: RunConfig) -> Report:
    if args.closed_form:
        if args.point is None:
            raise DomainError("--closed-form needs --point")
        g = metrics.closed_form_tensor(args.closed_form, _floats(args.point))
        ve = metrics.volume_element(g)
        return Report("closed-form metric tensor", f"closed form '{args.closed_form}'",
                      {"model": args.closed_form, "coords": list(g.coords), "tensor": g.g,
                       "sqrt_det": ve.value, "null_flag": ve.null_flag, "error_estimate": 0.0})
    if args.family is None:
        raise DomainError("metric needs --family (or --closed-form)")
    chart = _chart(args)
    metric = "bures" if args.metric == "bures_extended" else args.metric
    if args.metric == "bures_extended" and "q" not in chart.param_names:
        raise DomainError(f"{chart.family_id} has no q coordinate; bures_extended needs an extended chart")
    result = {"family": chart.family_id, "metric": args.metric, "coords": list(chart.param_names),
              "fixed": chart.fixed}
    if metric == "hs":
        result["kappa"] = metrics.KAPPA_HS
    if args.point is not None:
        p = _floats(args.point)
        if metric == "hs":
            g = metrics.hs_tensor(chart, p)
        elif metric == "bures":
            g = metrics.bures_tensor(chart, p)
        else:
            g = metrics.monotone_tensor(chart, p, metric)
        ve = metrics.volume_element(g)
        # Richardson differences on non-polynomial charts carry ~h⁴ relative error
        result.update(point=p, tensor=g.g, sqrt_det=ve.value, null_flag=ve.null_flag,
                      error_estimate=float(np.abs(g.g).max() * metrics.REL_STEP**4))
    if args.null_check:
        result.update(null=metrics.nullity_check(chart, metric, args.samples, seed=config.seed),
                      samples=args.samples)
    if args.point is None and not args.null_check:
        raise DomainError("give --point and/or --null-check")
    return Report("metric tensor and volume element", f"{args.metric} metric on {chart.family_id}", result)


def _scan_report(family: str, metric: str, grid: Optional[list], args, config: RunConfig) -> Report:
    fam = integration.FAMILY_ALIASES.get(family, family)
    tol = _tol(config, 1e-6)
    kw = {"workers": args.threads}
    if grid is None:  # parameter-free family: errors propagate to the exit code
        res = integration.sep_probability(fam, metric, None, tol=tol, seed=config.seed, method=args.method, **kw)
        rows = [integration.ScanRow(float("nan"), metric, res.total.value, res.total.abs_error,
                                    res.separable.value, res.separable.abs_error, res.value, res.abs_error,
                                    res.n_evals)]
    else:
        rows = integration.scan(fam, metric, grid, tol=tol, seed=config.seed, method=args.method,
                                compare_closed_form=getattr(args, "compare_closed_form", False), **kw)
    columns = list(integration.SCAN_COLUMNS) + ["closed_form", "error"]
    table = [[getattr(r, c) for c in integration.SCAN_COLUMNS] + [r.closed_form, r.error] for r in rows]
    result = {"family": fam, "metric": metric, "method": args.method}
    if metric == "hs":
        result.update(kappa=metrics.KAPPA_HS)
    known = integration.KNOWN_VALUES.get((fam, metric))
    if known:
        result["reference_total"], result["reference_separable"] = known
    compared = [r for r in rows if r.closed_form is not None and not r.error]
    if compared:
        result["max_closed_form_deviation"] = max(abs(r.prob - r.closed_form) for r in compared)
    # Singular parameter values (e.g. alpha = 0, -1) are reported per row and do
    # not fail the scan; convergence failures do.
    errors = [r.error for r in rows if r.error]
    code = EXIT_OK
    if any(e.startswith(("NonConvergence", "QuadratureFailure", "DegenerateTotal")) for e in errors):
        code = EXIT_CONVERGENCE
    elif errors and len(errors) == len(rows):
        code = EXIT_DOMAIN
    result["failed_points"] = len(errors)
    return Report("separability probability scan", f"separable/total {metric} volume ratio", result,
                  columns, table, code)


def cmd_sepprob(args, config: RunConfig) -> Report:
    fam = integration.FAMILY_ALIASES.get(args.family, args.family)
    if args.q is not None and args.alpha_grid is not None:
        raise DomainError("give either --q or --alpha-grid")
    grid = None
    if args.q is not None:
        if fam != "ar_bell":
            raise DomainError("--q applies to the ar_bell family")
        grid = _floats(args.q)
    elif args.alpha_grid is not None:
        if fam not in ("jaynes_alpha", "jaynes_alpha_bivariate"):
            raise DomainError("--alpha-grid applies to the trivariate/bivariate models")
        grid = integration.parse_grid(args.alpha_grid)
    elif fam == "ar_bell":
        grid = [1.0]
    elif fam in ("jaynes_alpha", "jaynes_alpha_bivariate"):
        raise DomainError("the alpha models need --alpha-grid")
    return _scan_report(fam, args.metric, grid, args, config)


def cmd_scan(args, config: RunConfig) -> Report:
    return _scan_report(args.family, args.metric, integration.parse_grid(args.grid), args, config)


def cmd_volume(args, config: RunConfig) -> Report:
    fam = integration.FAMILY_ALIASES.get(args.family, args.family)
    fixed = {}
    if args.q is not None:
        fixed["q"] = args.q
    if args.alpha is not None:
        fixed["alpha"] = args.alpha
    fn = integration.separable_volume if args.predicate == "separable" else integration.total_volume
    res = fn(fam, args.metric, fixed, tol=_tol(config, 1e-6), seed=config.seed, method=args.method,
             workers=args.threads)
    return Report(f"{args.predicate} volume", f"{args.metric} volume of the {args.predicate} region of {fam}",
                  {"value": res.value, "abs_error": res.abs_error, "n_evals": res.n_evals,
                   "method": res.method, "meta": res.meta})


def cmd_priors(args, config: RunConfig) -> Report:
    action = args.action
    record = priors.get_record(args.record) if getattr(args, "record", None) else None
    if action == "compare":
        v = priors.clarke_compare(args.prior_a, args.prior_b, record, power=args.power)
        return Report("comparative noninformativity", "relative entropies before/after a formal update",
                      dict(v.as_dict(), record=record.label, tie_tol=priors.TIE_TOL))
    if action == "rank":
        ids = list(priors.RANKED_PRIORS) if args.all or not args.priors else args.priors.split(",")
        order, verdicts = priors.rank(ids, record, power=args.power)
        return Report("comparative noninformativity ranking", "pairwise verdicts and induced order",
                      {"order": order, "transitive": order is not None, "record": record.label,
                       "comparisons": [v.as_dict() for v in verdicts]})
    if action == "kl":
        a, b = priors.get_prior(args.prior_a), priors.get_prior(args.prior_b)
        return Report("relative entropy", "KL(a||b) in nats",
                      {"pair": [args.prior_a, args.prior_b], "kl": priors.kl(a, b),
                       "error_estimate": _kl_refinement_error(a, b)})
    if action == "biasedness":
        parts = args.r.split(":")
        if len(parts) != 3:
            raise DomainError("--r expects lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        ids = args.priors.split(",") if args.priors else list(priors.RANKED_PRIORS)
        curve = priors.biasedness_curve(ids, lo, hi, n)
        rows = [[float(r)] + [float(curve.values[i][k]) for i in ids] + [">".join(curve.ordering()[k])]
                for k, r in enumerate(curve.r)]
        return Report("radial marginal densities", "biasedness curves near the pure states",
                      {"priors": ids, "r_lo": lo, "r_hi": hi, "n": n}, ["r"] + ids + ["ordering"], rows)
    if action == "gain":
        if args.extended:
            lo, hi = config.q_range
            ext = priors.q_truncated_prior(lo, hi)
            rec = priors.get_record(args.record, q_extended=True)
            value = ext.information_gain(rec)
            extra = {"q_range": [lo, hi], "record_assumption": priors.EXTENDED_RECORD_ASSUMPTION,
                     "normalization": ext.normalization}
        else:
            value = priors.information_gain(priors.get_prior(args.prior), record)
            extra = {}
        return Report("information gain", "KL(posterior||prior) with the full likelihood",
                      dict({"prior": "q-truncated Bures" if args.extended else args.prior, "record": args.record,
                            "gain": value}, **extra))
    if action == "normalization":
        return Report("normalisation constant", f"ball integral of the {args.which} volume element",
                      {"which": args.which, "value": priors.normalization_constant(args.which)})
    raise DomainError(f"unknown priors action {action!r}")


def _kl_refinement_error(a, b) -> float:
    coarse = priors.kl(a, b, priors.ball_rule(8, 32, 64))
    return abs(priors.kl(a, b) - coarse)


def cmd_husimi(args, config: RunConfig) -> Report:
    if args.action == "tensor":
        p = _floats(args.point)
        g = husimi.fisher_tensor_numeric(p)
        result = {"point": p, "coords": list(g.coords), "tensor": g.g,
                  "sqrt_det": metrics.volume_element(g).value,
                  "error_estimate": g.meta.get("quadrature_error")}
        if len(p) == 3:
            result["closed_form"] = metrics.closed_form_tensor("husimi_fisher", p).g
        return Report("Husimi Fisher tensor", "Fisher information of the (escort) Husimi family", result)
    if args.action in ("marginal-q", "marginal-r"):
        grid = integration.parse_grid(args.grid)
        if args.action == "marginal-q":
            vals = [husimi.marginal_q(q) for q in grid]
            coord = "q"
        else:
            vals = [husimi.marginal_r(r, config.q_range) for r in grid]
            coord = "r"
        rows = [[x, v.value, v.error_estimate] for x, v in zip(grid, vals)]
        return Report(f"{coord}-marginal of the extended Husimi volume element", "marginal volume-element curve",
                      {"coordinate": coord, "n": len(grid)}, [coord, "value", "error_estimate"], rows)
    if args.action == "peak":
        loc, height = husimi.marginal_q_peak()
        return Report("q-marginal peak", "maximum of the extended Husimi q-marginal",
                      {"q": loc, "height": height, "error_estimate": 1e-5})
    raise DomainError(f"unknown husimi action {args.action!r}")


def cmd_selftest(args, config: RunConfig) -> Report:
    numbers = sorted({int(x) for x in args.criteria.split(",")}) if args.criteria else None
    echo = (lambda line: print(line, file=sys.stderr if args.out else sys.stdout, flush=True))
    results = acceptance.run_all(numbers, seed=config.seed, workers=args.threads, echo=echo)
    code = EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
    return Report("acceptance suite", "PASS/FAIL per criterion",
                  {"passed": sum(r.passed for r in results), "total": len(results),
                   "criteria": [r.as_dict() for r in results]}, exit_code=code)


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sepgeom", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")
    ap.add_argument("--tol", type=float, default=None, help="relative tolerance (command-specific default)")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                    help="worker threads for Monte Carlo batches (results do not depend on it)")
    ap.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
    ap.add_argument("--out", default=None, help="write the report to this file instead of stdout")
    ap.add_argument("--q-range", default="0.5:500", help="escort-order interval lo:hi (default 0.5:500)")
    sub = ap.add_subparsers(dest="command", required=True)

    def family_args(p, required=True):
        p.add_argument("--family", required=required)
        p.add_argument("--q", type=float, default=None)
        p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("metric", help="metric tensor, volume element, nullity check")
    p.add_argument("--family", default=None)
    p.add_argument("--metric", choices=METRIC_CHOICES, default="bures")
    p.add_argument("--point", default=None, help="comma-separated coordinates")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--extended", action="store_true", help="use the q-extended chart (ar_bell, qutrit_v)")
    p.add_argument("--null-check", action="store_true")
    p.add_argument("--samples", type=int, default=30)
    p.add_argument("--closed-form", default=None, choices=sorted(metrics.CLOSED_FORM_MODELS))
    p.set_defaults(func=cmd_metric)

    method_kw = dict(choices=integration.METHODS, default="auto")
    p = sub.add_parser("sepprob", help="separability probabilities")
    p.add_argument("--family", required=True)
    p.add_argument("--metric", choices=metrics.METRIC_IDS, default="bures")
    p.add_argument("--q", default=None, help="comma list of escort orders (ar_bell)")
    p.add_argument("--alpha-grid", default=None, help="lo:hi:step or comma list (alpha models)")
    p.add_argument("--compare-closed-form", action="store_true")
    p.add_argument("--method", **method_kw)
    p.set_defaults(func=cmd_sepprob)

    p = sub.add_parser("scan", help="volumes and probabilities over a parameter grid")
    p.add_argument("--family", required=True)
    p.add_argument("--metric", choices=metrics.METRIC_IDS, default="bures")
    p.add_argument("--grid", required=True, help="lo:hi:step or comma list (q for ar_bell, alpha otherwise)")
    p.add_argument("--compare-closed-form", action="store_true")
    p.add_argument("--method", **method_kw)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("volume", help="total or separable volume")
    family_args(p)
    p.add_argument("--metric", choices=metrics.METRIC_IDS, default="bures")
    p.add_argument("--predicate", choices=("feasible", "separable"), default="feasible")
    p.add_argument("--method", **method_kw)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("priors", help="priors, relative entropy, comparative tests")
    psub = p.add_subparsers(dest="action", required=True)
    prior_ids = list(priors.PROFILES)
    c = psub.add_parser("compare")
    c.add_argument("prior_a", choices=prior_ids)
    c.add_argument("prior_b", choices=prior_ids)
    c.add_argument("--record", default="xyz-pairs", choices=sorted(priors.RECORDS))
    c.add_argument("--power", type=float, default=priors.CLARKE_POWER, choices=(0.5, 1.0))
    c = psub.add_parser("rank")
    c.add_argument("--all", action="store_true", help="rank the four standard priors")
    c.add_argument("--priors", default=None, help="comma-separated prior ids")
    c.add_argument("--record", default="xyz-pairs", choices=sorted(priors.RECORDS))
    c.add_argument("--power", type=float, default=priors.CLARKE_POWER, choices=(0.5, 1.0))
    c = psub.add_parser("kl")
    c.add_argument("prior_a", choices=prior_ids)
    c.add_argument("prior_b", choices=prior_ids)
    c = psub.add_parser("biasedness")
    c.add_argument("--r", default="0.995:0.9999:50", help="lo:hi:n")
    c.add_argument("--priors", default=None)
    c = psub.add_parser("gain")
    c.add_argument("prior", nargs="?", default="p_B", choices=prior_ids)
    c.add_argument("--record", default="z-pair", choices=sorted(priors.RECORDS))
    c.add_argument("--extended", action="store_true", help="q-truncated prior with the escort likelihood")
    c = psub.add_parser("normalization")
    c.add_argument("which", choices=("fisher", "fisher_q1"))
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("husimi", help="Husimi Fisher tensors and marginal curves")
    hsub = p.add_subparsers(dest="action", required=True)
    c = hsub.add_parser("tensor")
    c.add_argument("--point", required=True, help="r,theta1,theta2[,q]")
    c = hsub.add_parser("marginal-q")
    c.add_argument("--grid", required=True)
    c = hsub.add_parser("marginal-r")
    c.add_argument("--grid", required=True)
    hsub.add_parser("peak")
    p.set_defaults(func=cmd_husimi)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default: all)")
    p.set_defaults(func=cmd_selftest)
    return ap


def _echo_argv(argv: list) -> list:
    """Command line without --threads/--out, which do not affect results."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a in ("--threads", "--out"):
            skip = True
        elif not a.startswith(("--threads=", "--out=")):
            out.append(a)
    return out


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, NormalizationFailure):
        return EXIT_NORMALIZATION
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    return EXIT_DOMAIN


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    argv_list = list(sys.argv[1:] if argv is None else argv)
    try:
        if args.threads < 1:
            raise DomainError("--threads must be at least 1")
        if args.tol is not None and not args.tol > 0:
            raise DomainError("--tol must be positive")
        config = RunConfig(args.seed, args.tol, _range(args.q_range), args.output_format,
                           metrics.KAPPA_CONVENTION, _echo_argv(argv_list))
        report = args.func(args, config)
    except SepGeomError as exc:
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sort_keys=True),
              file=sys.stderr)
        return code
    text = render(report, config)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if report.exit_code != EXIT_OK:
        print(json.dumps({"error": "partial failure" if report.exit_code != EXIT_ACCEPTANCE else "acceptance",
                          "exit_code": report.exit_code}, sort_keys=True), file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
