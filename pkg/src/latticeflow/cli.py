"""Command-line driver: run a registered check and write ``report.json`` (plus a CSV).

Usage::

    latticeflow list
    latticeflow run --prop heat_ruc --eps 0.5,0.1,0.05 --out out/
    latticeflow run --job job.json --out out/

A job file is a JSON object with a ``prop`` key and that check's inputs;
``--prop``, ``--grid``, ``--eps`` and ``--set key=json`` override it.
Exit status: 0 pass, 1 fail, 2 unparsable job, 3 precondition violated.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import textwrap
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import constructions as cons
from . import semiflows as sf
from .funcspace import (TOL_ARITH, ClosedForm, GridSpec, PiecewiseAffineFunction, closed, constant,
                        function_from_json, hat_pa, one)
from .ru_conv import FunctionFamily, check_cc_characterization, verify_ru_convergence
from .semigroups import (LAW_TOL, check_positivity, check_semigroup_law, gamma_constant,
                         heat_guaranteed_delta, lp_counterexample_probe, make_heat,
                         make_translation, orbit_order_bound, test_ruc_at_zero)

EXIT_PASS, EXIT_FAIL, EXIT_PARSE, EXIT_PRECONDITION = 0, 1, 2, 3

HEAT_GRID = GridSpec(-10.0, 10.0, 2001)
FLOW_GRID = GridSpec(-10.0, 10.0, 2001)


class JobError(ValueError):
    """The job cannot be parsed or does not fit the check's schema."""


# ---------------------------------------------------------------------------
# spec parsing


def _function(doc, grid):
    try:
        return function_from_json(doc, grid)
    except (ValueError, KeyError, TypeError) as exc:
        raise JobError(f"bad function spec {doc!r}: {exc}") from None


def _flow(expr):
    try:
        return sf.semiflow(expr)
    except (ValueError, TypeError) as exc:
        raise JobError(str(exc)) from None


def _iso(doc):
    if doc in ("identity", "id"):
        return cons.identity_iso()
    for head, make in (("dilation", cons.dilation_iso), ("scaling", cons.scaling_iso)):
        if isinstance(doc, str) and doc.startswith(head + "(") and doc.endswith(")"):
            try:
                return make(float(doc[len(head) + 1:-1]))
            except ValueError as exc:
                raise JobError(str(exc)) from None
    raise JobError(f"unknown lattice isomorphism {doc!r}")


def semigroup_from_spec(doc, grid, corpus=(), pairs=((0.1, 0.2),)):
    """``"translation"``, ``"heat"``, ``"koopman(<flow>)"`` or a nested construction.

    Constructions are objects: ``{"op": "similar", "base": ..., "iso": "dilation(2)"}``,
    ``{"op": "rescale", "base": ..., "mu": m, "alpha": a}`` and
    ``{"op": "product", "left": ..., "right": ...}``.
    """
    if isinstance(doc, str):
        if doc == "translation":
            return make_translation()
        if doc == "heat":
            return make_heat()
        if doc.startswith("koopman(") and doc.endswith(")"):
            return sf.make_koopman(_flow(doc[len("koopman("):-1]))
        raise JobError(f"unknown semigroup {doc!r}")
    if not isinstance(doc, dict) or "op" not in doc:
        raise JobError(f"bad semigroup spec {doc!r}")
    op = doc["op"]
    try:
        if op == "similar":
            return cons.similar(semigroup_from_spec(doc["base"], grid, corpus, pairs),
                                _iso(doc["iso"]), list(corpus) or None, grid)
        if op == "rescale":
            return cons.rescale(semigroup_from_spec(doc["base"], grid, corpus, pairs),
                                float(doc.get("mu", 0.0)), float(doc.get("alpha", 1.0)))
        if op == "product":
            return cons.product(semigroup_from_spec(doc["left"], grid, corpus, pairs),
                                semigroup_from_spec(doc["right"], grid, corpus, pairs),
                                list(corpus), pairs, grid)
    except KeyError as exc:
        raise JobError(f"construction {op!r} needs {exc}") from None
    raise JobError(f"unknown construction {op!r}")


def _pairs(doc):
    try:
        return [(float(s), float(t)) for s, t in doc]
    except (TypeError, ValueError):
        raise JobError(f"bad (s, t) pairs {doc!r}") from None


def _floats(doc, what):
    try:
        return [float(v) for v in doc]
    except (TypeError, ValueError):
        raise JobError(f"bad {what} {doc!r}") from None


# ---------------------------------------------------------------------------
# results


@dataclass
class Outcome:
    passed: bool
    result: dict
    csv_name: str | None = None
    csv_rows: list | None = None


def _schedule_rows(rows, extra=None):
    out = [["eps", "delta" if extra is None else extra[0]] + ([] if extra is None else extra[1:])]
    return out + rows


def _thr(v):
    if v is None:
        return None
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def _report_rows(report):
    return [[r.eps, _thr(r.threshold)] for r in report.rows]


def _expect(job, observed: bool) -> bool:
    want = job.get("expect", True)
    if not isinstance(want, bool):
        raise JobError("'expect' must be true or false")
    return observed == want


CORPUS = ["hat(0,1,1)", "hat(2,0.5,3)", "gauss(1)", "1+|x|"]
CORPUS_PAIRS = [[0.1, 0.2], [0.25, 0.5], [0.5, 1.0]]


# ---------------------------------------------------------------------------
# checks


def p_gamma_constant(job, grid, eps):
    Ns = [int(n) for n in job.get("N", [1, 2, 3])]
    if any(n < 1 for n in Ns):
        raise ValueError("N must be a positive integer")
    vals = [gamma_constant(n) for n in Ns]
    oracle = [2.0 * math.exp(gammaln((n + 1) / 2) - gammaln(n / 2)) for n in Ns]
    known = {1: 2.0 / math.sqrt(math.pi), 2: math.sqrt(math.pi)}
    errs = [abs(v - known.get(n, o)) for n, v, o in zip(Ns, vals, oracle)]
    return Outcome(all(e <= 1e-10 for e in errs),
                   {"N": Ns, "C_N": vals, "oracle": oracle, "abs_error": errs, "tol": 1e-10})


def p_heat_moments(job, grid, eps):
    times = _floats(job.get("times", [0.01, 0.1, 1.0]), "times")
    H = make_heat()
    x = grid.points()
    rows = []
    for t in times:
        e0 = float(np.max(np.abs(H.apply(t, one()).on(grid) - 1.0)))
        e2 = float(np.max(np.abs(H.apply(t, closed("square")).on(grid) - (x * x + 2 * t))))
        rows.append([t, e0, e2])
    ok = all(r[1] <= 1e-8 and r[2] <= 1e-6 for r in rows)
    return Outcome(ok, {"times": times, "err_one": [r[1] for r in rows],
                        "err_square": [r[2] for r in rows], "tol_one": 1e-8, "tol_square": 1e-6},
                   "moments.csv", [["t", "err_one", "err_square"]] + rows)


def p_heat_ruc(job, grid, eps):
    f = _function(job.get("f", "clip(1+|x|)"), grid)
    reg = _function(job.get("regulator", "one"), grid)
    lip = job.get("lipschitz", getattr(f, "lipschitz", None))
    if lip is None:
        raise ValueError(f"{f.label} has no Lipschitz constant; pass 'lipschitz'")
    rep = test_ruc_at_zero(make_heat(), f, reg, eps, grid)
    guaranteed = [heat_guaranteed_delta(e, float(lip)) for e in eps]
    rows = [[r.eps, _thr(r.threshold), gd] for r, gd in zip(rep.rows, guaranteed)]
    ok = rep.converged and all(r.threshold >= gd for r, gd in zip(rep.rows, guaranteed))
    return Outcome(ok, {"report": rep.to_dict(), "lipschitz": float(lip),
                        "guaranteed_delta": guaranteed},
                   "schedule.csv", [["eps", "delta", "guaranteed_delta"]] + rows)


def _translate_family(f):
    T = make_translation()
    return FunctionFamily.continuum(lambda h: T.apply(h, f), t_hi=1.0, label=f"T(h){f.label}")


def _widening_family():
    return FunctionFamily.sequence(lambda n: closed(f"hat(0,{int(n)},{1.0 / float(n)!r})"), 20,
                                   label="hat(0,n,1/n)")


def p_translation_cc(job, grid, eps):
    hats = [_function(h, grid) for h in job.get("hats", ["hat(0,1,1)", "hat(2,0.5,3)",
                                                         "hat(-3,2,0.5)"])]
    rows, per = [], []
    ok = True
    for f in hats:
        rep = verify_ru_convergence(_translate_family(f), f, one(), eps, grid)
        cc = check_cc_characterization(_translate_family(f), f, grid, eps)
        ok &= rep.converged and cc.verdict
        per.append({"f": f.label, "report": rep.to_dict(), "cc_verdict": cc.verdict,
                    "common_support": cc.common_support})
        rows += [[f.label] + r for r in _report_rows(rep)]
    wide = check_cc_characterization(_widening_family(), _zero_cc(), grid, eps)
    ok &= not wide.verdict
    return Outcome(ok, {"hats": per, "widening": {"uniform_conv": wide.uniform_conv,
                                                  "common_support": wide.common_support,
                                                  "verdict": wide.verdict}},
                   "schedule.csv", [["f", "eps", "delta"]] + rows)


def _zero_cc():
    return ClosedForm(lambda x: np.zeros_like(x), "0", name="zero", support=(0.0, 0.0))


def p_cc_characterization(job, grid, eps):
    fam = job.get("family", "translate")
    if fam == "translate":
        f = _function(job.get("f", "hat(0,1,1)"), grid)
        family, limit = _translate_family(f), f
    elif fam == "widening":
        family, limit = _widening_family(), _zero_cc()
    else:
        raise JobError(f"unknown family {fam!r} (translate, widening)")
    v = check_cc_characterization(family, limit, grid, eps)
    return Outcome(_expect(job, v.verdict),
                   {"family": fam, "uniform_conv": v.uniform_conv,
                    "common_support": v.common_support, "verdict": v.verdict,
                    "expect": job.get("expect", True), "report": v.report.to_dict()},
                   "schedule.csv", _schedule_rows(_report_rows(v.report)))


def p_lp_probe(job, grid, eps):
    p = float(job.get("p", 1.0))
    delta = float(job.get("delta", job.get("δ", 0.25)))
    grids = [int(float(n)) for n in job.get("grids", [1000, 10000, 100000])]
    tab = lp_counterexample_probe(p, delta, grids, float(job.get("min_growth", 2.0)))
    return Outcome(tab.diverging, tab.to_dict(), "divergence.csv",
                   [["grid_n", "max_value"]] + [[n, m] for n, m in zip(tab.grid_n, tab.max_value)])


def p_orbit_bound(job, grid, eps):
    S = semigroup_from_spec(job.get("semigroup", "translation"), grid)
    x = _function(job.get("x", "hat(0,1,1)"), grid)
    u = _function(job.get("u", "hat(0,2,1)"), grid)
    s, delta = float(job.get("s", 1.0)), float(job.get("delta", 0.25))
    b = orbit_order_bound(S, x, u, s, delta, grid, strict=False,
                          slack=float(job.get("slack", 1e-8)))
    return Outcome(b.violations == 0,
                   {"semigroup": S.label, "x": x.label, "u": u.label, "s": s, "delta": delta,
                    "n0": b.n0, "violations": b.violations, "worst_violation": b.worst_violation,
                    "certificate_slack": b.certificate_slack,
                    "orbit_times": b.orbit_times.tolist()})


def _law_and_positivity(S, job, grid):
    fs = [_function(f, grid) for f in job.get("corpus", CORPUS)]
    pairs = _pairs(job.get("pairs", CORPUS_PAIRS))
    law_tol = float(job.get("law_tol", LAW_TOL))
    laws = [(f.label, check_semigroup_law(S, f, pairs, grid, law_tol)) for f in fs]
    pos_ok, lowest = check_positivity(S, fs, sorted({t for p in pairs for t in p}), grid)
    worst = max(r.worst for _, r in laws)
    ok = all(r.passes for _, r in laws) and pos_ok
    rows = [[lab, s, t, d] for lab, r in laws for s, t, d in r.defects]
    return ok, {"semigroup": S.label, "law_tol": law_tol, "worst_law_defect": worst,
                "positive": pos_ok, "lowest_value": lowest,
                "defects": [{"f": a, "s": s, "t": t, "defect": d} for a, s, t, d in rows]}, rows


def p_semigroup_law(job, grid, eps):
    S = semigroup_from_spec(job.get("semigroup", "translation"), grid)
    ok, res, rows = _law_and_positivity(S, job, grid)
    return Outcome(ok, res, "law.csv", [["f", "s", "t", "defect"]] + rows)


def p_constructions(job, grid, eps):
    corpus = [_function(f, grid) for f in job.get("corpus", CORPUS)]
    pairs = _pairs(job.get("commute_pairs", CORPUS_PAIRS))
    spec = job.get("construction", {"op": "product", "left": "heat", "right": "translation"})
    S = semigroup_from_spec(spec, grid, corpus, pairs)
    ok, res, rows = _law_and_positivity(S, job, grid)
    res["construction"] = spec
    res["meta"] = S.meta
    return Outcome(ok, res, "law.csv", [["f", "s", "t", "defect"]] + rows)


def p_product_commutation(job, grid, eps):
    left = semigroup_from_spec(job.get("left", "heat"), grid)
    right = semigroup_from_spec(job.get("right", "translation"), grid)
    fs = [_function(f, grid) for f in job.get("corpus", CORPUS)]
    pairs = _pairs(job.get("pairs", CORPUS_PAIRS))
    law_tol = float(job.get("law_tol", LAW_TOL))
    defects = cons.commutation_defects(left, right, fs, pairs, grid)
    worst = max(d[-1] for d in defects)
    commute = worst <= law_tol
    return Outcome(_expect(job, commute),
                   {"left": left.label, "right": right.label, "law_tol": law_tol,
                    "commute": commute, "worst_defect": worst, "expect": job.get("expect", True),
                    "defects": [{"f": a, "s": s, "t": t, "defect": d} for a, s, t, d in defects]},
                   "commutation.csv", [["f", "s", "t", "defect"]] + [list(d) for d in defects])


def p_semiflow_laws(job, grid, eps):
    phi = _flow(job.get("flow", "shift"))
    times = _floats(job.get("times", [0.0, 0.05, 0.1, 0.25, 0.5, 1.0]), "times")
    tol = float(job.get("flow_tol", sf.FLOW_TOL))
    rep = sf.check_semiflow_laws(phi, grid, times, tol)
    return Outcome(_expect(job, rep.passes),
                   {"flow": job.get("flow", "shift"), "times": times, "flow_tol": tol,
                    "identity_defect": rep.identity_defect,
                    "composition_defect": rep.composition_defect, "passes": rep.passes,
                    "expect": job.get("expect", True)})


def p_criterion_c(job, grid, eps):
    phi = _flow(job.get("flow", "shift"))
    u = _function(job.get("u", "one"), grid)
    rep = sf.check_criterion_C(phi, u, eps, grid)
    return Outcome(_expect(job, rep.converged),
                   {"flow": job.get("flow", "shift"), "u": u.label, "report": rep.to_dict(),
                    "expect": job.get("expect", True)},
                   "schedule.csv", _schedule_rows(_report_rows(rep)))


def p_criterion_lipuc(job, grid, eps):
    flow = job.get("flow", "shift")
    phi = _flow(flow)
    windows = _floats(job.get("windows", []), "windows")
    rep = sf.check_criterion_LipUC(phi, eps, grid)
    res = {"flow": flow, "report": rep.to_dict()}
    rows = [[grid.x_hi, r.eps, _thr(r.threshold)] for r in rep.rows]
    if not windows:
        return Outcome(_expect(job, rep.converged), dict(res, expect=job.get("expect", True)),
                       "schedule.csv", [["half_width", "eps", "delta"]] + rows)
    # widening windows: uniform in x means delta(eps) must not collapse
    e0 = float(job.get("probe_eps", eps[-1]))
    ppu = (grid.n - 1) / grid.width
    deltas = []
    for w in windows:
        g = GridSpec(-w, w, int(round(2 * w * ppu)) + 1)
        r = sf.check_criterion_LipUC(phi, [e0], g)
        deltas.append(r.rows[0].threshold)
    ratios = [None if a is None or b is None else b / a for a, b in zip(deltas, deltas[1:])]
    collapsing = all(q is not None and q < 0.5 for q in ratios)
    res.update({"windows": windows, "probe_eps": e0, "delta": deltas, "ratios": ratios,
                "collapsing": collapsing, "uniform": not collapsing,
                "expect": job.get("expect", True)})
    return Outcome(_expect(job, not collapsing), res, "windows.csv",
                   [["half_width", "eps", "delta"]] + [[w, e0, d] for w, d in zip(windows, deltas)])


def p_lpa_regulator(job, grid, eps):
    phi = _flow(job.get("flow", "shift"))
    fdoc = job.get("f", {"hat": [0.0, 1.0, 1.0]})
    if isinstance(fdoc, dict) and "hat" in fdoc:
        f = hat_pa(*_floats(fdoc["hat"], "hat"))
    else:
        f = _function(fdoc, grid)
    if not isinstance(f, PiecewiseAffineFunction):
        raise JobError("lpa_regulator needs a piecewise-affine f")
    u = _function(job.get("u", "one"), grid)
    tr = sf.build_lpa_regulator(phi, f, u, grid, eps)
    ok = tr.verified and tr.cross_check.converged
    return Outcome(ok, tr.to_dict(), "schedule.csv",
                   _schedule_rows([[r.eps, r.threshold] for r in tr.rows]))


def p_condition_r(job, grid, eps):
    fam = job.get("family", "plateau")
    n = int(job.get("n", 10))
    if fam == "plateau":
        family = FunctionFamily.sequence(lambda k: closed(f"plateau({int(k)})"), n, "plateau(n)")
        want = False
    elif fam == "scaled_constant":
        family = [constant(float(k)) for k in range(1, n + 1)]
        want = True
    else:
        raise JobError(f"unknown family {fam!r} (plateau, scaled_constant)")
    cand = job.get("candidate", None if fam == "plateau" else "one")
    bound = None if cand is None else _function(cand, grid)
    r = cons.condition_r_witness(family, grid, bound)
    ok = r.holds == job.get("expect", want)
    if not r.holds:
        ok &= bool(r.evidence) and all(e["index"] is not None for e in r.evidence) \
            if job.get("expect", want) is False else True
    return Outcome(ok, {"family": fam, "n": n, "holds": r.holds, "reason": r.reason,
                        "lambdas": r.lambdas, "evidence": r.evidence,
                        "bound": None if r.bound is None else r.bound.label})


@dataclass(frozen=True)
class Prop:
    run: Callable
    description: str
    grid: GridSpec | None = None
    eps: tuple = (0.5, 0.1)
    csv_doc: str = ""


PROPS: dict[str, Prop] = {
    "gamma_constant": Prop(p_gamma_constant, "heat kernel moment constant C_N against closed-form Gamma"),
    "heat_moments": Prop(p_heat_moments, "heat kernel preserves 1 and maps x^2 to x^2 + 2t",
                         HEAT_GRID, csv_doc="moments.csv: t,err_one,err_square"),
    "heat_ruc": Prop(p_heat_ruc, "heat orbit is ru-continuous at 0, delta above the guaranteed bound",
                     None, (0.5, 0.1, 0.05), "schedule.csv: eps,delta,guaranteed_delta"),
    "translation_cc": Prop(p_translation_cc, "translation is ru-continuous on compactly "
                           "supported functions", GridSpec(-10.0, 10.0, 2001), (0.5, 0.1),
                           "schedule.csv: f,eps,delta"),
    "cc_characterization": Prop(p_cc_characterization, "ru-convergence in C_c is uniform "
                                "convergence plus a common compact support",
                                GridSpec(-30.0, 30.0, 3001), (0.5, 0.25, 0.1),
                                "schedule.csv: eps,delta"),
    "lp_probe": Prop(p_lp_probe, "translation on L^p: orbit maxima near a singularity diverge "
                     "under refinement", csv_doc="divergence.csv: grid_n,max_value"),
    "orbit_bound": Prop(p_orbit_bound, "orbit over [0,s] lies under v = max_k T(delta)^k(|x|+u)",
                        GridSpec(-10.0, 10.0, 2001)),
    "semigroup_law": Prop(p_semigroup_law, "T(s+t) = T(t)T(s) and positivity on a corpus",
                          HEAT_GRID, csv_doc="law.csv: f,s,t,defect"),
    "constructions": Prop(p_constructions, "similar/rescaled/product semigroups keep the law "
                          "and positivity", HEAT_GRID, csv_doc="law.csv: f,s,t,defect"),
    "product_commutation": Prop(p_product_commutation, "commutation defect of two semigroups",
                                HEAT_GRID, csv_doc="commutation.csv: f,s,t,defect"),
    "semiflow_laws": Prop(p_semiflow_laws, "phi(0,x) = x and phi(t+s,x) = phi(t,phi(s,x))",
                          FLOW_GRID),
    "criterion_c": Prop(p_criterion_c, "|phi(h,x) - x| <= eps u(x) for small h", FLOW_GRID,
                        csv_doc="schedule.csv: eps,delta"),
    "criterion_lipuc": Prop(p_criterion_lipuc, "criterion with u = 1+|x|; optional widening "
                            "windows test uniformity", FLOW_GRID, (0.5, 0.1),
                            "schedule.csv: half_width,eps,delta (windows.csv with windows)"),
    "lpa_regulator": Prop(p_lpa_regulator, "the piecewise-affine v regulates T_phi(h)f -> f",
                          FLOW_GRID, csv_doc="schedule.csv: eps,delta"),
    "condition_r": Prop(p_condition_r, "scalars making a positive family order bounded, "
                        "or evidence none exist", GridSpec(-50.0, 50.0, 10001)),
}


def list_props() -> list[str]:
    return [f"{k}: {p.description}" for k, p in sorted(PROPS.items())]


# ---------------------------------------------------------------------------
# report writing


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in _clean(rows):
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def run_job(job: dict, out_dir: str | None = None) -> tuple[int, dict]:
    """Run one job; return ``(exit_code, report)`` and write files into ``out_dir``."""
    try:
        if not isinstance(job, dict):
            raise JobError("job must be a JSON object")
        prop_id = job.get("prop")
        if prop_id not in PROPS:
            raise JobError(f"unknown prop {prop_id!r}; see 'latticeflow list'")
        prop = PROPS[prop_id]
        grid = job.get("grid")
        if grid is None:
            grid = prop.grid or GridSpec()
        elif isinstance(grid, str):
            grid = GridSpec.parse(grid)
        elif isinstance(grid, dict):
            grid = GridSpec.from_dict(grid)
        else:
            raise JobError(f"bad grid {grid!r}")
        eps = _floats(job.get("eps", prop.eps), "eps")
        inputs = {k: v for k, v in job.items() if k not in ("prop", "grid", "eps")}
    except (JobError, ValueError, TypeError) as exc:
        report = {"verdict": "error", "error": f"parse: {exc}", "job": _clean(job)}
        _write(out_dir, report, None, None)
        return EXIT_PARSE, report

    config = {"prop": prop_id, "grid": grid.to_dict(), "eps": eps, "inputs": inputs,
              "tolerances": {"tol_arith": TOL_ARITH, "law_tol": LAW_TOL,
                             "flow_tol": sf.FLOW_TOL},
              "threads_note": "results do not depend on LATTICEFLOW_THREADS"}
    try:
        outcome = prop.run(inputs, grid, eps)
    except JobError as exc:
        report = {"verdict": "error", "error": f"parse: {exc}", "config": config}
        _write(out_dir, report, None, None)
        return EXIT_PARSE, report
    except (ValueError, ArithmeticError) as exc:
        report = {"verdict": "error", "error": f"precondition: {exc}", "config": config}
        _write(out_dir, report, None, None)
        return EXIT_PRECONDITION, report
    report = {"verdict": "pass" if outcome.passed else "fail", "config": config,
              "result": outcome.result}
    report = _clean(report)
    _write(out_dir, report, outcome.csv_name, outcome.csv_rows)
    return (EXIT_PASS if outcome.passed else EXIT_FAIL), report


def report_text(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write(out_dir, report, csv_name, csv_rows):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_text(report))
    if csv_name and csv_rows:
        with open(os.path.join(out_dir, csv_name), "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(csv_rows))


# ---------------------------------------------------------------------------
# argument handling


def _epilog() -> str:
    lines = ["checks and their CSV columns:"]
    for k, p in sorted(PROPS.items()):
        lines.append(f"  {k:22s}{p.csv_doc or '(report.json only)'}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="latticeflow", description=textwrap.dedent(__doc__).split("\n\n")[0],
        formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_epilog())
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the registered checks")
    run = sub.add_parser("run", help="run one check", epilog=_epilog(),
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--job", help="JSON job file")
    run.add_argument("--prop", help="check id (overrides the job's)")
    run.add_argument("--grid", help='sampling window "lo,hi,n"')
    run.add_argument("--eps", help='comma-separated eps values, e.g. "0.5,0.1"')
    run.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                     help="override one job input (value parsed as JSON, else a string)")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--quiet", action="store_true", help="do not echo the verdict")
    return ap


def _load_job(args) -> dict:
    job = {}
    if args.job:
        with open(args.job, encoding="utf-8") as fh:
            job = json.load(fh)
        if not isinstance(job, dict):
            raise JobError("job file must hold a JSON object")
    if args.prop:
        job["prop"] = args.prop
    if args.grid:
        job["grid"] = args.grid
    if args.eps:
        job["eps"] = [float(e) for e in args.eps.split(",")]
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise JobError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            job[key] = json.loads(val)
        except json.JSONDecodeError:
            job[key] = val
    return job


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for line in list_props():
            print(line)
        return EXIT_PASS
    try:
        job = _load_job(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    code, report = run_job(job, args.out)
    if not args.quiet:
        msg = report["verdict"] + (f": {report['error']}" if "error" in report else "")
        print(f"{job.get('prop')}: {msg}")
    return code


if __name__ == "__main__":
    sys.exit(main())
