"""Command-line front end.

Exit codes: 0 ok, 2 user or data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from contextlib import contextmanager
from dataclasses import asdict

import numpy as np

from . import gof, inference, report
from .clm import Control, InvalidParameters, convergence_report, fit_newton
from .clmm import MixedControl, fit_mixed
from .data import ColumnSchema, DataTable, infer_schema, load_csv, load_schema, make_column
from .errors import ClmError, ClmWarning, ConvergenceError, SingularHessianError
from .formula import build_design, parse_formula
from .links import LINKS
from .simulate import SimConfig, simulate_responses

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 2, 3
NUMERICAL = (ConvergenceError, SingularHessianError, InvalidParameters)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _data_args(p: argparse.ArgumentParser, formula: bool = True):
    p.add_argument("--data", help="CSV file (comma separated, header row)")
    p.add_argument("--schema", help="JSON schema file: list of {name, kind, levels?, reference?}")
    p.add_argument("--levels", action="append", type=_kv, default=[], metavar="COL=L1,L2,...",
                   help="declare an ordinal column and its level order (schema inference)")
    p.add_argument("--categorical", type=_csv_list, default=[], help="columns forced to categorical")
    p.add_argument("--group", type=_csv_list, default=[], help="columns holding group ids")
    if formula:
        p.add_argument("--formula", help="model formula, e.g. 'response ~ study + sex'")
        p.add_argument("--link", choices=LINKS, default=None)
        p.add_argument("--threshold", choices=("flexible", "symmetric", "equidistant"), default=None)
        p.add_argument("--nominal", type=_csv_list, default=[])
        p.add_argument("--scale", type=_csv_list, default=[])
        p.add_argument("--n-quad", type=int, default=7, help="quadrature nodes for mixed models")


def _out_args(p: argparse.ArgumentParser):
    p.add_argument("--output", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", help="write the main output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clmkit", description="Cumulative link models for ordinal responses")
    ap.add_argument("--job", help="JSON job file; its keys fill options not given on the command line")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("fit", help="fit a model and print its summary")
    _data_args(p)
    _out_args(p)
    p.add_argument("--save", help="also write the JSON fit document here")

    p = sub.add_parser("predict", help="predictions at covariate cells")
    _data_args(p)
    _out_args(p)
    p.add_argument("--fit", help="JSON fit document (instead of refitting)")
    p.add_argument("--cell", action="append", default=[], help="cell as NAME=VALUE,NAME=VALUE")
    p.add_argument("--grid", help="JSON file with a list of cells")
    p.add_argument("--mode", choices=inference.MODES, default="prob")
    p.add_argument("--cut")
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("margins", help="marginal means over the reference grid, and pairwise contrasts")
    _data_args(p)
    _out_args(p)
    p.add_argument("--fit")
    p.add_argument("--by", type=_csv_list, default=[])
    p.add_argument("--at", action="append", type=_kv, default=[], metavar="NAME=VALUE")
    p.add_argument("--mode", choices=inference.MODES, default="latent")
    p.add_argument("--cut")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--pairwise", help="factor whose levels are compared pairwise")
    p.add_argument("--adjust", choices=("none", "tukey"), default="tukey")

    p = sub.add_parser("anova", help="likelihood ratio test of two nested models")
    _data_args(p)
    _out_args(p)
    p.add_argument("--fits", nargs=2, metavar=("NULL", "ALT"), help="two JSON fit documents")
    p.add_argument("--formula2", help="alternative formula (with --formula as the null)")

    p = sub.add_parser("gof", help="Lipsitz, ordinal Hosmer-Lemeshow and Pulkstenis-Robinson tests")
    _data_args(p)
    _out_args(p)
    p.add_argument("--groups", type=int, default=10)
    p.add_argument("--catvars", type=_csv_list, default=[])

    p = sub.add_parser("simulate", help="simulate responses from known parameters")
    _data_args(p)
    _out_args(p)
    p.add_argument("--theta", type=lambda s: [float(x) for x in _csv_list(s)], help="thresholds, increasing")
    p.add_argument("--beta", type=lambda s: [float(x) for x in _csv_list(s)], default=[])
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="rows to simulate when no covariate data is given")
    p.add_argument("--method", choices=("latent", "inverse_cdf"), default="latent")
    p.add_argument("--response-levels", type=_csv_list, help="labels for the simulated levels")

    p = sub.add_parser("plotdata", help="data behind alluvial and stream plots")
    _data_args(p)
    _out_args(p)
    p.add_argument("--kind", choices=("alluvial", "stream"))
    p.add_argument("--fit")
    p.add_argument("--id", help="subject id column (alluvial)")
    p.add_argument("--wave", help="time/wave column (alluvial)")
    p.add_argument("--response", help="ordinal response column (alluvial)")
    p.add_argument("--var", help="numeric covariate to sweep (stream)")
    p.add_argument("--from", dest="lo", type=float)
    p.add_argument("--to", dest="hi", type=float)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--by", type=_csv_list, default=[])
    p.add_argument("--at", action="append", type=_kv, default=[])

    p = sub.add_parser("convergence", help="per-parameter error bounds and correct decimals")
    _data_args(p)
    _out_args(p)
    return ap


def _apply_job(args, parser) -> None:
    if not args.job:
        return
    with open(args.job, encoding="utf-8") as fh:
        job = json.load(fh)
    if not isinstance(job, dict):
        raise UsageError("job file must hold a JSON object")
    cmd = job.pop("subcommand", None) or job.pop("command", None)
    if cmd and args.command and cmd != args.command:
        raise UsageError(f"job file is for {cmd!r} but the command line asks for {args.command!r}")
    if cmd and not args.command:
        parser.parse_args([cmd], namespace=args)
    if not args.command:
        raise UsageError("no subcommand given on the command line or in the job file")
    defaults = vars(parser._subparsers._group_actions[0].choices[args.command].parse_args([]))
    for k, v in job.items():
        key = k.replace("-", "_")
        if key not in defaults:
            raise UsageError(f"unknown job option {k!r} for {args.command!r}")
        if getattr(args, key) == defaults[key]:
            if key in ("levels", "at") and isinstance(v, dict):
                v = [(a, ",".join(b) if isinstance(b, list) else str(b)) for a, b in v.items()]
            elif isinstance(defaults[key], list) and isinstance(v, str):
                v = _csv_list(v)
            setattr(args, key, v)


def _validate(args) -> None:
    """Reject conflicting options before any data is read."""
    if getattr(args, "schema", None) and (args.levels or args.categorical or args.group):
        raise UsageError("--schema conflicts with --levels/--categorical/--group; use one or the other")
    mode = getattr(args, "mode", None)
    if mode in ("cum.prob", "exc.prob") and not args.cut:
        raise UsageError(f"--mode {mode} needs --cut")
    if mode in ("prob", "latent") and getattr(args, "cut", None):
        raise UsageError(f"--mode {mode} does not take --cut")
    level = getattr(args, "level", None)
    if level is not None and not 0 < level < 1:
        raise UsageError("--level must be in (0, 1)")
    cmd = args.command
    if cmd in ("fit", "gof", "convergence") and not (args.data and args.formula):
        raise UsageError(f"{cmd} needs --data and --formula")
    if cmd in ("predict", "margins") and not args.fit and not (args.data and args.formula):
        raise UsageError(f"{cmd} needs --fit or --data with --formula")
    if cmd == "predict" and not (args.cell or args.grid):
        raise UsageError("predict needs --cell or --grid")
    if cmd == "anova":
        if args.fits and (args.formula2 or args.data):
            raise UsageError("give either --fits or --data with --formula/--formula2, not both")
        if not args.fits and not (args.data and args.formula and args.formula2):
            raise UsageError("anova needs --fits NULL ALT or --data with --formula and --formula2")
    if cmd == "simulate":
        if not args.theta:
            raise UsageError("simulate needs --theta")
        if not args.data and args.n is None:
            raise UsageError("simulate needs --data or --n")
        if args.data and not args.formula:
            raise UsageError("simulate with --data needs --formula to define the covariates")
        if args.response_levels and len(args.response_levels) != len(args.theta) + 1:
            raise UsageError("--response-levels must name len(theta) + 1 levels")
    if cmd == "plotdata":
        if args.kind is None:
            raise UsageError("plotdata needs --kind alluvial|stream")
        if args.kind == "alluvial":
            if not args.id:
                raise UsageError("alluvial plot data needs a subject id column (--id)")
            if not (args.data and args.wave and args.response):
                raise UsageError("alluvial plot data needs --data, --wave and --response")
        else:
            if not (args.var and args.lo is not None and args.hi is not None):
                raise UsageError("stream plot data needs --var, --from and --to")
            if not args.fit and not (args.data and args.formula):
                raise UsageError("stream plot data needs --fit or --data with --formula")
            if args.step <= 0:
                raise UsageError("--step must be positive")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _table(args) -> DataTable:
    if args.schema:
        return load_csv(args.data, load_schema(args.schema))
    ordinal = {k: _csv_list(v) for k, v in args.levels}
    if args.formula and not ordinal:
        resp = parse_formula(args.formula).response
        raise UsageError(f"declare the level order of {resp!r} with --levels {resp}=L1,L2,... or give --schema")
    schema = infer_schema(args.data, ordinal, args.categorical, args.group)
    return load_csv(args.data, schema)


def _fit_from_data(args, formula: str | None = None):
    table = _table(args)
    ast = parse_formula(formula or args.formula)
    design = build_design(ast, table, args.nominal, args.scale)
    link = args.link or "logit"
    ts = args.threshold or "flexible"
    if ast.random_terms:
        fit = fit_mixed(design, link, ts, MixedControl(n_nodes=args.n_quad))
    else:
        fit = fit_newton(design, link, ts, Control())
    return fit, design, table


def _load_fit(path):
    with open(path, encoding="utf-8") as fh:
        return report.fit_from_dict(json.load(fh))


def _get_fit(args):
    if getattr(args, "fit", None):
        return _load_fit(args.fit)
    return _fit_from_data(args)[0]


def _parse_value(coding, text):
    if coding is not None and coding.kind == "numeric":
        try:
            return float(text)
        except ValueError:
            raise UsageError(f"{coding.name}: {text!r} is not a number") from None
    return text


def _cells(args, fit) -> list[dict]:
    codings = fit.encoder.codings if fit.encoder else {}
    cells = []
    for spec in args.cell:
        cell = {}
        for part in _csv_list(spec):
            k, v = _kv(part)
            cell[k] = _parse_value(codings.get(k), v)
        cells.append(cell)
    if args.grid:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
        cells += [dict(c) for c in grid]
    return cells


def _at(args, fit) -> dict:
    codings = fit.encoder.codings if fit.encoder else {}
    out = {}
    for k, v in args.at:
        vals = [_parse_value(codings.get(k), x) for x in _csv_list(v)]
        out[k] = vals if len(vals) > 1 else vals[0]
    return out


def _records_csv(records: list[dict]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _json(obj) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, np.generic):
            return clean(x.item())
        return x
    return json.dumps(clean(obj), indent=2) + "\n"


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


@contextmanager
def _collect_warnings(stream):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClmWarning)
        yield caught
    for w in caught:
        if issubclass(w.category, ClmWarning):
            stream.write(f"Warning: {w.message}\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    with _collect_warnings(sys.stderr):
        fit, _, _ = _fit_from_data(args)
    doc = report.fit_to_dict(fit)
    if args.save:
        with open(args.save, "w", encoding="utf-8") as fh:
            fh.write(_json(doc))
    if args.output == "json":
        _emit(args, _json(doc))
    elif args.output == "csv":
        recs = [dict(r, part=part) for part in ("coefficients", "thresholds", "nominal", "scale") for r in doc[part]]
        _emit(args, _records_csv(recs))
    else:
        _emit(args, report.summary_text(fit))
    if not fit.converged and not fit.boundary:
        sys.stderr.write("error: the fit did not converge\n")
        return EXIT_NUMERIC
    return EXIT_OK


def _render_prediction(args, table) -> None:
    if args.output == "json":
        _emit(args, table.to_json() + "\n")
    elif args.output == "csv":
        _emit(args, table.to_csv())
    else:
        _emit(args, report.prediction_text(table))


def cmd_predict(args) -> int:
    with _collect_warnings(sys.stderr):
        fit = _get_fit(args)
        table = inference.predict_cells(fit, _cells(args, fit), args.mode, args.cut, args.level)
    _render_prediction(args, table)
    return EXIT_OK


def cmd_margins(args) -> int:
    with _collect_warnings(sys.stderr):
        fit = _get_fit(args)
        at = _at(args, fit)
        if args.pairwise:
            ct = inference.pairwise_compare(fit, args.pairwise, args.adjust, at)
            if args.output == "json":
                _emit(args, _json({"factor": ct.factor, "adjust": ct.adjust, "rows": ct.records(),
                                   "averaged_over": list(ct.averaged_over)}))
            elif args.output == "csv":
                _emit(args, _records_csv(ct.records()))
            else:
                _emit(args, report.contrast_text(ct))
            return EXIT_OK
        table = inference.marginal_means(fit, args.by, args.mode, args.cut, at, args.level)
    _render_prediction(args, table)
    return EXIT_OK


def cmd_anova(args) -> int:
    with _collect_warnings(sys.stderr):
        if args.fits:
            fits = [_load_fit(p) for p in args.fits]
            names = [p.rsplit("/", 1)[-1].removesuffix(".json") for p in args.fits]
        else:
            fits = [_fit_from_data(args)[0], _fit_from_data(args, args.formula2)[0]]
            names = ["null", "alt"]
    res = inference.lrt(fits[0], fits[1])
    rows = [
        {"model": names[0], "no_par": fits[0].n_params, "AIC": fits[0].aic, "logLik": fits[0].loglik,
         "LR_stat": None, "df": None, "p": None},
        {"model": names[1], "no_par": fits[1].n_params, "AIC": fits[1].aic, "logLik": fits[1].loglik,
         "LR_stat": res.stat, "df": res.df, "p": res.p},
    ]
    if args.output == "json":
        _emit(args, _json(rows))
    elif args.output == "csv":
        _emit(args, _records_csv([{k: ("" if v is None else v) for k, v in r.items()} for r in rows]))
    else:
        _emit(args, report.anova_text(names, fits, res))
    return EXIT_OK


def cmd_gof(args) -> int:
    with _collect_warnings(sys.stderr):
        fit, design, _ = _fit_from_data(args)
    results, failures = [], []
    stream = io.StringIO()
    with _collect_warnings(stream):
        for name, run in [
            ("Lipsitz", lambda: gof.lipsitz_test(fit, design, args.groups)),
            ("Hosmer-Lemeshow", lambda: gof.hosmer_lemeshow_ordinal(fit, design, args.groups)),
            ("Pulkstenis-Robinson", lambda: gof.pulkstenis_robinson(fit, design, args.catvars, "chisq")),
            ("Pulkstenis-Robinson deviance", lambda: gof.pulkstenis_robinson(fit, design, args.catvars, "deviance")),
        ]:
            if name.startswith("Pulkstenis") and not args.catvars:
                failures.append((name, "needs --catvars"))
                continue
            try:
                results.append(run())
            except (ClmError, ValueError) as e:
                failures.append((name, str(e)))
    if args.output == "json":
        _emit(args, _json({"results": [{"test": r.test, "statistic": r.statistic, "df": r.df, "p": r.p,
                                        "warnings": list(r.warnings)} for r in results],
                           "errors": [{"test": n, "error": m} for n, m in failures]}))
    elif args.output == "csv":
        _emit(args, _records_csv([{"test": r.test, "statistic": r.statistic, "df": r.df, "p": r.p,
                                   "warnings": "; ".join(r.warnings)} for r in results]))
    else:
        _emit(args, "\n".join(report.gof_text(r) for r in results))
    for n, m in failures:
        sys.stderr.write(f"error: {n}: {m}\n")
    return EXIT_USER if failures else EXIT_OK


def cmd_simulate(args) -> int:
    L = len(args.theta) + 1
    labels = args.response_levels or [str(i) for i in range(1, L + 1)]
    cfg = SimConfig(theta=tuple(args.theta), beta=tuple(args.beta), link=args.link or "logit",
                    sigma=args.sigma, seed=args.seed, method=args.method)
    if args.data:
        ast = parse_formula(args.formula)
        table = _table_for_simulation(args, ast.response, labels)
        design = build_design(ast, table, args.nominal, args.scale)
        if design.X.shape[1] != len(args.beta):
            raise UsageError(f"the formula gives {design.X.shape[1]} coefficients but --beta has {len(args.beta)}")
        keep = table.row_mask([v for v in ast.variables + list(ast.random_terms)])
        table = table.take(keep)
        groups = None
        if ast.random_terms:
            groups = table[ast.random_terms[0]].labels()
        y = simulate_responses(cfg, design.X, groups=groups)
        out_cols = [c for c in table.columns if c.name != ast.response]
        col = make_column(ColumnSchema(ast.response, "ordinal", tuple(labels)), [labels[i - 1] for i in y])
        names = [c.name for c in out_cols] + [ast.response]
        cols = [c.labels() for c in out_cols] + [col.labels()]
    else:
        if args.beta:
            raise UsageError("--beta needs covariate --data")
        y = simulate_responses(cfg, n=args.n)
        names = ["response"]
        cols = [[labels[i - 1] for i in y]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(len(y)):
        w.writerow(["" if c[i] is None else c[i] for c in cols])
    _emit(args, buf.getvalue())
    return EXIT_OK


def _table_for_simulation(args, response: str, labels) -> DataTable:
    """Covariate table plus a placeholder response column (replaced on output)."""
    if args.schema:
        schema = [s for s in load_schema(args.schema) if s.name != response]
        table = load_csv(args.data, schema) if not _has_column(args.data, response) else None
        if table is None:
            full = load_schema(args.schema)
            table = load_csv(args.data, full)
    else:
        schema = infer_schema(args.data, {}, args.categorical, args.group)
        schema = [s for s in schema if s.name != response]
        if _has_column(args.data, response):
            schema.append(ColumnSchema(response, "categorical"))
        table = load_csv(args.data, schema)
    placeholder = make_column(ColumnSchema(response, "ordinal", tuple(labels)), [labels[0]] * table.n_rows)
    return table.with_column(placeholder)


def _has_column(path, name) -> bool:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return name in header


def _alluvial(args) -> list[dict]:
    table = _table(args)
    for c in (args.id, args.wave, args.response):
        if c not in table:
            raise UsageError(f"unknown column {c!r}")
    idc, wc, rc = table[args.id], table[args.wave], table[args.response]
    if idc.kind not in ("group", "categorical", "numeric"):
        raise UsageError("--id must name a subject id column")
    ids, waves, resp = idc.labels(), wc.labels(), rc.labels()
    if wc.kind == "numeric":
        wave_order = sorted({float(w) for w in waves if w is not None})
        wave_order = [repr(w) for w in wave_order]
    else:
        wave_order = list(wc.levels)
    levels = list(rc.levels) if rc.kind != "numeric" else sorted(set(r for r in resp if r is not None))
    by_subject: dict[str, dict[str, str]] = {}
    for i, w, r in zip(ids, waves, resp):
        if i is None or w is None or r is None:
            continue
        by_subject.setdefault(i, {})[w] = r
    rows = []
    for a, b in zip(wave_order[:-1], wave_order[1:]):
        counts = {}
        for subj in by_subject.values():
            if a in subj and b in subj:
                key = (subj[a], subj[b])
                counts[key] = counts.get(key, 0) + 1
        for la in levels:
            for lb in levels:
                if (la, lb) in counts:
                    rows.append({"wave_from": a, "wave_to": b, "level_from": la, "level_to": lb,
                                 "count": counts[(la, lb)]})
    return rows


def _stream(args) -> list[dict]:
    fit = _get_fit(args)
    enc = fit.encoder
    if enc is None or args.var not in enc.codings or enc.codings[args.var].kind != "numeric":
        raise UsageError(f"{args.var!r} is not a numeric covariate of the model")
    n_pts = int(math.floor((args.hi - args.lo) / args.step + 1e-9)) + 1
    values = [args.lo + i * args.step for i in range(n_pts)]
    at = _at(args, fit)
    at[args.var] = values
    by = list(args.by) + [args.var]
    table = inference.marginal_means(fit, by, "prob", None, at, 0.95)
    return [dict(r.cell) | {"level": r.response, "probability": r.estimate} for r in table.rows]


def cmd_plotdata(args) -> int:
    with _collect_warnings(sys.stderr):
        rows = _alluvial(args) if args.kind == "alluvial" else _stream(args)
    if args.output == "json":
        _emit(args, _json(rows))
    else:
        _emit(args, _records_csv(rows))
    return EXIT_OK


def cmd_convergence(args) -> int:
    with _collect_warnings(sys.stderr):
        fit, _, _ = _fit_from_data(args)
    rows = convergence_report(fit)
    if args.output == "json":
        _emit(args, _json([asdict(r) for r in rows]))
    elif args.output == "csv":
        _emit(args, _records_csv([asdict(r) for r in rows]))
    else:
        body = [[r.name, f"{r.estimate:.6f}", f"{r.error_bound:.2e}", str(r.correct_decimals)] for r in rows]
        lines = report._grid(["", "Estimate", "Error", "Cor.Dec"], body)
        lines.append("")
        lines.append(f"max.grad {fit.max_grad:.2e}  cond.H {fit.cond_H:.1e}  niter {fit.niter_str}")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit, "predict": cmd_predict, "margins": cmd_margins, "anova": cmd_anova,
    "gof": cmd_gof, "simulate": cmd_simulate, "plotdata": cmd_plotdata, "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USER if e.code else EXIT_OK
    try:
        _apply_job(args, parser)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USER
        _validate(args)
        return COMMANDS[args.command](args)
    except NUMERICAL as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERIC
    except (UsageError, ClmError, ValueError, KeyError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
