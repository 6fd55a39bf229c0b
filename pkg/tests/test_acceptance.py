"""Acceptance criteria, one test (or parameter set) per criterion.

Each test records its outcome through the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.  Runtimes are part of the
criteria and are measured with ``time.perf_counter``.
"""
import math
import time

import numpy as np
import pytest

from latticeflow.cli import run_job
from latticeflow.constructions import (commutation_defects, condition_r_witness, dilation_iso,
                                       product, rescale, similar)
from latticeflow.funcspace import (ClosedForm, GridSpec, PiecewiseAffineFunction, closed,
                                   constant, one)
from latticeflow.ru_conv import FunctionFamily, check_cc_characterization, verify_ru_convergence
from latticeflow.semiflows import (build_lpa_regulator, check_criterion_C, check_criterion_LipUC,
                                   decay, make_koopman, poly_drift, shift)
from latticeflow.semigroups import (check_positivity, check_semigroup_law, gamma_constant,
                                    heat_guaranteed_delta, lp_counterexample_probe, make_heat,
                                    make_translation, orbit_order_bound, test_ruc_at_zero)

G = GridSpec(-10.0, 10.0, 2001)
STEP = 10 ** (6 / 254)  # ratio between consecutive default time samples
CORPUS = [closed(e) for e in ("hat(0,1,1)", "hat(2,0.5,3)", "gauss(1)", "1+|x|")]
PAIRS = [(0.1, 0.2), (0.25, 0.5), (0.5, 1.0)]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def zero_cc():
    return ClosedForm(lambda x: np.zeros_like(x), "0", support=(0.0, 0.0))


def test_criterion_1_gamma_constants(criterion):
    with Timer() as tm:
        c1, c2 = gamma_constant(1), gamma_constant(2)
    e1, e2 = abs(c1 - 2 / math.sqrt(math.pi)), abs(c2 - math.sqrt(math.pi))
    ok = e1 <= 1e-10 and e2 <= 1e-10 and tm.elapsed < 1e-3
    criterion("1", ok, f"|C1 err|={e1:.1e} |C2 err|={e2:.1e} time={tm.elapsed * 1e3:.3f}ms")
    assert ok


def test_criterion_2_heat_moments(criterion):
    H = make_heat()
    x = G.points()
    with Timer() as tm:
        errs0, errs2 = [], []
        for t in (0.01, 0.1, 1.0):
            errs0.append(np.max(np.abs(H.apply(t, one()).on(G) - 1.0)))
            errs2.append(np.max(np.abs(H.apply(t, closed("square")).on(G) - (x * x + 2 * t))))
    ok = max(errs0) <= 1e-8 and max(errs2) <= 1e-6 and tm.elapsed < 1.0
    criterion("2", ok, f"max err 1: {max(errs0):.1e}, x^2: {max(errs2):.1e}, "
                       f"time={tm.elapsed:.2f}s")
    assert ok


def test_criterion_3_heat_ruc_at_zero(criterion):
    grid = GridSpec()
    f = closed("clip(1+|x|)", grid)
    eps = [0.5, 0.1, 0.05]
    with Timer() as tm:
        rep = test_ruc_at_zero(make_heat(), f, one(), eps, grid)
    parts, ok = [], rep.converged
    for r in rep.rows:
        # C_1^-2 * delta_mod**2 with delta_mod = eps / (2 L)
        bound = (r.eps / (2 * f.lipschitz)) ** 2 / gamma_constant(1) ** 2
        assert bound == pytest.approx(heat_guaranteed_delta(r.eps, f.lipschitz), rel=1e-15)
        ok &= r.threshold is not None and r.threshold >= bound
        parts.append(f"eps={r.eps:g}: {r.threshold:.3g}>={bound:.3g}")
    ok &= tm.elapsed < 10
    criterion("3", ok, ", ".join(parts) + f", time={tm.elapsed:.2f}s")
    assert ok


def test_criterion_4_translation_on_cc(criterion):
    T = make_translation()
    eps = [0.5, 0.25, 0.1]
    hats = [closed(e) for e in ("hat(0,1,1)", "hat(2,0.5,3)", "hat(-3,2,0.5)")]
    with Timer() as tm:
        ok, notes = True, []
        for f in hats:
            fam = FunctionFamily.continuum(lambda h, f=f: T.apply(h, f), t_hi=1.0)
            rep = verify_ru_convergence(fam, f, one(), eps, G)
            cc = check_cc_characterization(fam, f, G, eps)
            ok &= rep.converged and cc.verdict
            notes.append(f"{f.label}: ru={rep.converged} cc={cc.verdict}")
        wide = FunctionFamily.sequence(
            lambda n: closed(f"hat(0,{int(n)},{1.0 / float(n)!r})"), 20)
        wv = check_cc_characterization(wide, zero_cc(), G, eps)
        ok &= wv.uniform_conv and not wv.verdict and wv.common_support is None
        notes.append(f"widening: uniform={wv.uniform_conv} verdict={wv.verdict}")
    ok &= tm.elapsed < 5
    criterion("4", ok, "; ".join(notes) + f"; time={tm.elapsed:.2f}s")
    assert ok


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_criterion_5_lp_divergence(p, criterion):
    with Timer() as tm:
        tab = lp_counterexample_probe(p, 0.25, (1000, 10000, 100000))
    m = tab.max_value
    increasing = all(b > a for a, b in zip(m, m[1:]))
    ok = increasing and all(g >= 2.0 for g in tab.growth) and tm.elapsed < 30
    criterion("5", ok, f"p={p:g} growth={'/'.join(f'{g:.3f}' for g in tab.growth)}")
    assert ok


@pytest.mark.parametrize("name", ["translation", "heat", "koopman-decay"])
def test_criterion_6_orbit_bound(name, criterion):
    S, x, s, delta = {
        "translation": (make_translation(), closed("hat(0,1,1)"), 2.0, 0.5),
        "heat": (make_heat(), closed("gauss(1)"), 1.0, 0.25),
        "koopman-decay": (make_koopman(decay(1.0)), closed("hat(0,1,1)"), 1.0, 0.25),
    }[name]
    with Timer() as tm:
        b = orbit_order_bound(S, x, one(), s, delta, G, n_orbit=64, slack=1e-8, strict=False)
    ok = b.violations == 0 and len(b.orbit_times) == 64 and tm.elapsed < 10
    criterion("6", ok, f"{name}: n0={b.n0} violations={b.violations}")
    assert ok


def test_criterion_7_constructions(criterion):
    T, H, K = make_translation(), make_heat(), make_koopman(decay(1.0))
    with Timer() as tm:
        ops = [similar(T, dilation_iso(2.0), CORPUS, G), rescale(H, 0.3, 2.0),
               rescale(T, math.log(2.0), 1.0), product(H, T, CORPUS, PAIRS, G)]
        worst_law, pos = 0.0, True
        for S in ops:
            ok_pos, _ = check_positivity(S, CORPUS, [t for p in PAIRS for t in p], G)
            pos &= ok_pos
            for f in CORPUS:
                worst_law = max(worst_law, check_semigroup_law(S, f, PAIRS, G, 1e-6).worst)
        comm = max(d[-1] for d in commutation_defects(H, T, CORPUS, PAIRS, G))
        f = ClosedForm(lambda x: x, "x")
        noncomm = commutation_defects(T, K, [f], [(1.0, 1.0)], G)[0][-1]
    ok = worst_law <= 1e-6 and pos and comm <= 1e-6 and noncomm > 0.1 and tm.elapsed < 30
    criterion("7", ok, f"law={worst_law:.1e} positive={pos} heat/shift={comm:.1e} "
                       f"shift/dilation={noncomm:.3f} time={tm.elapsed:.2f}s")
    assert ok


def test_criterion_8_semiflow_criteria(criterion):
    eps = [0.5, 0.1, 0.01]
    with Timer() as tm:
        ok = True
        for rep in (check_criterion_C(shift(), one(), eps, G),
                    check_criterion_LipUC(shift(), eps, G)):
            for r in rep.rows:
                ok &= r.threshold is not None and r.eps / STEP <= r.threshold <= r.eps * (1 + 1e-12)
        ok &= check_criterion_C(decay(1.0), closed("1+|x|"), eps, G).converged
        ok &= check_criterion_LipUC(decay(1.0), eps, G).converged
        ds = [check_criterion_LipUC(poly_drift(3), [0.1], GridSpec(-w, w, 20 * w + 1))
              .rows[0].threshold for w in (10, 20, 40, 80)]
        ratios = [b / a for a, b in zip(ds, ds[1:])]
        ok &= all(r < 0.5 for r in ratios)
    ok &= tm.elapsed < 10
    criterion("8", ok, f"poly_drift ratios={'/'.join(f'{r:.3f}' for r in ratios)} "
                       f"time={tm.elapsed:.2f}s")
    assert ok


# five segments each: four knots
PA_CORPUS = [
    PiecewiseAffineFunction.from_values([-1.0, 0.0, 1.0, 2.0], [0.0, 1.0, 0.0, 0.5],
                                        left_slope=0.0, right_slope=0.0, label="bump-step"),
    PiecewiseAffineFunction.from_values([-2.0, -0.5, 0.5, 2.0], [1.0, -1.0, 2.0, 0.0],
                                        left_slope=0.5, right_slope=-1.0, label="zigzag"),
    PiecewiseAffineFunction.from_values([-1.5, -1.0, 1.0, 1.5], [0.0, 3.0, 3.0, 0.0],
                                        left_slope=0.0, right_slope=0.0, label="trapezoid"),
]


def test_criterion_9_lpa_regulator(criterion):
    grid = GridSpec(-4.0, 4.0, 801)
    with Timer() as tm:
        ok, notes = True, []
        for f in PA_CORPUS:
            assert f.slopes.size == 5
            tr = build_lpa_regulator(shift(), f, one(), grid, eps_list=(0.5, 0.1))
            ok &= tr.verified and tr.cross_check.converged
            notes.append(f"{f.label}: verified={tr.verified} cross={tr.cross_check.converged}")
    ok &= tm.elapsed < 10
    criterion("9", ok, "; ".join(notes) + f"; time={tm.elapsed:.2f}s")
    assert ok


def test_criterion_10_condition_r(criterion):
    with Timer() as tm:
        fam = FunctionFamily.sequence(lambda n: closed(f"plateau({n})"), 10)
        bad = condition_r_witness(fam, GridSpec(-15.0, 15.0, 3001))
        good = condition_r_witness([constant(float(n)) for n in range(1, 11)], G, one())
    evidence = (not bad.holds and len(bad.evidence) == 10
                and all(e["index"] is not None for e in bad.evidence))
    witness = good.holds and np.allclose(good.lambdas, [1.0 / n for n in range(1, 11)])
    ok = evidence and witness and tm.elapsed < 1.0
    criterion("10", ok, f"plateau evidence={evidence} scaled witness={witness} "
                        f"time={tm.elapsed:.2f}s")
    assert ok


@pytest.mark.parametrize("job", [
    {"prop": "heat_ruc"}, {"prop": "lp_probe", "p": 1}, {"prop": "condition_r"},
    {"prop": "criterion_lipuc", "flow": "poly_drift(3)", "windows": [10, 20, 40, 80],
     "expect": False},
    {"prop": "lpa_regulator"},
])
def test_criterion_11_determinism(job, tmp_path, criterion):
    run_job(job, str(tmp_path / "a"))
    run_job(job, str(tmp_path / "b"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in (p.name for p in (tmp_path / "a").iterdir()))
    criterion("11", same, f"{job['prop']}: identical={same}")
    assert same
