"""Fit documents (JSON) and text renderings of fits, tests and tables."""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .clm import FitResult
from .clmm import MixedFitResult
from .formula import DesignEncoder
from .inference import LrtResult, wald_table

SIGNIF_LEGEND = "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _unnum(x):
    return math.nan if x is None else float(x)


def fit_to_dict(fit: FitResult) -> dict:
    """JSON-ready fit document; non-finite numbers become null."""
    mixed = isinstance(fit, MixedFitResult)
    rows = wald_table(fit)
    sl = fit.slices()
    by_name = {r.name: r for r in rows}

    def table(part):
        out = []
        for j in range(sl[part].start, sl[part].stop):
            r = by_name[fit.names[j]]
            d = {"name": r.name, "estimate": _num(r.estimate), "se": _num(r.se), "z": _num(r.z)}
            if part != "alpha":
                d["p"] = _num(r.p)
            out.append(d)
        return out

    doc = {
        "model": "clmm" if mixed else "clm",
        "formula": fit.formula,
        "link": fit.link,
        "threshold": fit.threshold,
        "nobs": fit.nobs,
        "n_dropped": fit.n_dropped,
        "logLik": _num(fit.loglik),
        "AIC": _num(fit.aic),
        "no_par": fit.n_params,
        "niter": fit.niter_str,
        "max_grad": _num(fit.max_grad),
        "cond_H": _num(fit.cond_H),
        "converged": bool(fit.converged),
        "boundary": bool(fit.boundary),
        "coefficients": table("beta"),
        "thresholds": table("alpha"),
        "nominal": table("nominal"),
        "scale": table("zeta"),
        "parameter_names": list(fit.names),
        "estimates": [_num(v) for v in fit.coef],
        "vcov": [[_num(v) for v in row] for row in np.asarray(fit.vcov)],
        "response_levels": list(fit.response_labels),
        "n_alpha": fit.n_alpha,
        "x_names": list(fit.x_names),
        "w_names": list(fit.w_names),
        "z_names": list(fit.z_names),
        "design": fit.encoder.to_dict() if fit.encoder is not None else None,
        "response_fingerprint": fit.response_fingerprint,
        "messages": list(fit.messages),
    }
    if mixed:
        doc["sigma"] = _num(fit.sigma)
        doc["n_quad"] = fit.n_quad
        doc["n_groups"] = fit.n_groups
    return doc


def fit_from_dict(doc: dict) -> FitResult:
    niter, _, rest = doc["niter"].partition("(")
    common = dict(
        coef=np.array([_unnum(v) for v in doc["estimates"]]),
        names=tuple(doc["parameter_names"]),
        vcov=np.array([[_unnum(v) for v in row] for row in doc["vcov"]], dtype=float).reshape(len(doc["estimates"]), -1),
        loglik=_unnum(doc["logLik"]),
        nobs=int(doc["nobs"]),
        n_dropped=int(doc["n_dropped"]),
        niter=int(niter),
        n_halvings=int(rest.rstrip(")") or 0),
        max_grad=_unnum(doc["max_grad"]),
        cond_H=_unnum(doc["cond_H"]),
        converged=bool(doc["converged"]),
        link=doc["link"],
        threshold=doc["threshold"],
        response_labels=tuple(doc["response_levels"]),
        n_alpha=int(doc["n_alpha"]),
        x_names=tuple(doc["x_names"]),
        w_names=tuple(doc["w_names"]),
        z_names=tuple(doc["z_names"]),
        boundary=bool(doc["boundary"]),
        formula=doc.get("formula", ""),
        encoder=DesignEncoder.from_dict(doc["design"]) if doc.get("design") else None,
        response_fingerprint=doc.get("response_fingerprint", ""),
        messages=tuple(doc.get("messages", ())),
    )
    if doc.get("model") == "clmm":
        sigma = doc.get("sigma")
        coef = common["coef"]
        if sigma is not None and sigma == 0.0:
            coef[-1] = -math.inf
        return MixedFitResult(**common, sigma=_unnum(sigma) if sigma is not None else 0.0,
                              n_quad=int(doc.get("n_quad", 7)), n_groups=int(doc.get("n_groups", 0)))
    return FitResult(**common)


def dumps_fit(fit: FitResult) -> str:
    return json.dumps(fit_to_dict(fit), indent=2)


def loads_fit(text: str) -> FitResult:
    return fit_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def stars(p: float | None) -> str:
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def fmt_p(p: float | None) -> str:
    if p is None or not math.isfinite(p):
        return ""
    if p < 1e-4:
        return f"{p:.2e}"
    return f"{p:.4f}"


def fmt_num(x: float, digits: int = 4) -> str:
    if x is None or not math.isfinite(x):
        return "NA" if x is None or math.isnan(x) else ("Inf" if x > 0 else "-Inf")
    return f"{x:.{digits}f}"


def _grid(header: Sequence[str], rows: Sequence[Sequence[str]], first_left: bool = True) -> list[str]:
    cols = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[j]) for r in cols) for j in range(len(header))]
    lines = []
    for r in cols:
        cells = []
        for j, c in enumerate(r):
            cells.append(c.ljust(widths[j]) if (j == 0 and first_left) else c.rjust(widths[j]))
        lines.append(" ".join(cells).rstrip())
    return lines


def summary_text(fit: FitResult) -> str:
    """Summary block: header line, coefficients with stars, thresholds, deletions."""
    mixed = isinstance(fit, MixedFitResult)
    out = []
    if fit.formula:
        out.append(f"formula: {fit.formula}")
        out.append("")
    head = ["link", "threshold", "nobs", "logLik", "AIC", "niter", "max.grad", "cond.H"]
    vals = [fit.link, fit.threshold, str(fit.nobs), f"{fit.loglik:.2f}", f"{fit.aic:.2f}",
            fit.niter_str, f"{fit.max_grad:.2e}", f"{fit.cond_H:.1e}"]
    if mixed:
        head.insert(6, "nAGQ")
        vals.insert(6, str(fit.n_quad))
    out += _grid(head, [vals])
    out.append("")
    if mixed:
        out.append("Random effects:")
        out.append(f" Std.Dev. {fit.sigma:.4f}  (groups: {fit.n_groups})")
        out.append("")
    rows = wald_table(fit)
    coef = [r for r in rows if r.p is not None]
    thr = [r for r in rows if r.p is None]
    if coef:
        out.append("Coefficients:")
        body = [[r.name, fmt_num(r.estimate), fmt_num(r.se), f"{r.z:.3f}", fmt_p(r.p), stars(r.p)] for r in coef]
        out += _grid(["", "Estimate", "Std. Error", "z value", "Pr(>|z|)", ""], body)
        out.append("---")
        out.append(SIGNIF_LEGEND)
        out.append("")
    out.append("Threshold coefficients:")
    body = [[r.name, fmt_num(r.estimate), fmt_num(r.se), f"{r.z:.3f}"] for r in thr]
    out += _grid(["", "Estimate", "Std. Error", "z value"], body)
    if fit.n_dropped:
        out.append(f"({fit.n_dropped} observations deleted due to missingness)")
    for m in fit.messages:
        out.append(f"Note: {m}")
    return "\n".join(out) + "\n"


def anova_text(names: Sequence[str], fits: Sequence[FitResult], res: LrtResult) -> str:
    header = ["", "no.par", "AIC", "logLik", "LR.stat", "df", "Pr(>Chisq)", ""]
    r0 = [names[0], str(fits[0].n_params), f"{fits[0].aic:.2f}", f"{fits[0].loglik:.2f}", "", "", "", ""]
    r1 = [names[1], str(fits[1].n_params), f"{fits[1].aic:.2f}", f"{fits[1].loglik:.2f}",
          f"{res.stat:.4f}", str(res.df), fmt_p(res.p), stars(res.p)]
    lines = ["Likelihood ratio tests of cumulative link models:", ""]
    lines += _grid(header, [r0, r1])
    return "\n".join(lines) + "\n"


def prediction_text(table) -> str:
    """Per-cell blocks with asymptotic interval columns."""
    est_col = {"prob": "prob", "cum.prob": "cumprob", "exc.prob": "exc.prob", "latent": "emmean"}[table.mode]
    lines = []
    blocks: dict[tuple, list] = {}
    for r in table.rows:
        blocks.setdefault(tuple(r.cell.items()), []).append(r)
    first_col = "cut" if table.mode in ("cum.prob", "exc.prob") else ("" if table.mode == "latent" else "response")
    for key, rows in blocks.items():
        if key:
            lines.append(", ".join(f"{k} = {v}" for k, v in key) + ":")
        body = [[r.response if first_col else "", f"{r.estimate:.4f}", f"{r.se:.5f}", "Inf", f"{r.lower:.4f}", f"{r.upper:.4f}"]
                for r in rows]
        lines += [" " + x for x in _grid([first_col, est_col, "SE", "df", "asymp.LCL", "asymp.UCL"], body)]
        lines.append("")
    if table.averaged_over:
        lines.append(f"Results are averaged over the levels of: {', '.join(table.averaged_over)}")
    lines.append(f"Confidence level used: {table.level:g}")
    return "\n".join(lines) + "\n"


def contrast_text(table) -> str:
    body = [[r.contrast, f"{r.estimate:.4f}", f"{r.se:.4f}", "Inf", f"{r.z:.3f}",
             "<.0001" if r.p < 1e-4 else f"{r.p:.4f}"] for r in table.rows]
    lines = _grid(["contrast", "estimate", "SE", "df", "z.ratio", "p.value"], body)
    lines.append("")
    if table.averaged_over:
        lines.append(f"Results are averaged over the levels of: {', '.join(table.averaged_over)}")
    if table.adjust == "tukey":
        k = len({p for r in table.rows for p in r.contrast.split(" - ")})
        lines.append(f"P value adjustment: tukey method for comparing a family of {k} estimates")
    return "\n".join(lines) + "\n"


def gof_text(res) -> str:
    if res.test == "Lipsitz":
        line = f"LR statistic = {res.statistic:.4f}, df = {res.df}, p-value = {res.p:.4f}"
    elif res.test.endswith("deviance"):
        line = f"Deviance-squared = {res.statistic:.3f}, df = {res.df}, p-value = {res.p:.4f}"
    else:
        line = f"X-squared = {res.statistic:.3f}, df = {res.df}, p-value = {res.p:.4f}"
    out = [res.test, line]
    out += [f"Warning: {w}" for w in res.warnings]
    return "\n".join(out) + "\n"
