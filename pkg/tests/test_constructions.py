import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latticeflow.constructions import (CommutationError, IsoError, LatticeIso, commutation_defects,
                                       condition_r_witness, dilation_iso, identity_iso, product,
                                       rescale, scaling_iso, similar)
from latticeflow.funcspace import TOL_ARITH, ClosedForm, GridSpec, closed, constant, one
from latticeflow.ru_conv import FunctionFamily
from latticeflow.semiflows import decay, make_koopman
from latticeflow.semigroups import (LAW_TOL, check_positivity, check_semigroup_law, make_heat,
                                    make_translation)

G = GridSpec(-10.0, 10.0, 2001)
T = make_translation()
H = make_heat()
K = make_koopman(decay(1.0))
CORPUS = [closed(e) for e in ("hat(0,1,1)", "hat(2,0.5,3)", "gauss(1)", "1+|x|")]
PAIRS = [(0.1, 0.2), (0.25, 0.5), (0.5, 1.0)]


def sup_diff(a, b, grid=G):
    return float(np.max(np.abs(a.on(grid) - b.on(grid))))


# ---------------------------------------------------------------- isomorphisms

def test_isos_validate_on_corpus():
    for V in (identity_iso(), dilation_iso(2.0), dilation_iso(-0.5), scaling_iso(3.0)):
        assert V.validate(CORPUS, G) <= TOL_ARITH


def test_non_lattice_map_is_rejected():
    neg = LatticeIso(lambda f: -1.0 * f, lambda g: -1.0 * g, "neg")
    with pytest.raises(IsoError):
        neg.validate(CORPUS, G)
    lossy = LatticeIso(lambda f: f, lambda g: 0.5 * g, "lossy")
    with pytest.raises(IsoError):
        lossy.validate(CORPUS, G)
    with pytest.raises(ValueError):
        scaling_iso(-1.0)
    with pytest.raises(ValueError):
        dilation_iso(0.0)


# ---------------------------------------------------------------- similar

def test_similar_identity_and_scaling_return_S():
    for V in (identity_iso(), scaling_iso(2.0)):
        S = similar(T, V, CORPUS, G)
        for f in CORPUS:
            assert sup_diff(S.apply(0.7, f), T.apply(0.7, f)) <= TOL_ARITH


def test_similar_dilation_doubles_translation_speed():
    S = similar(T, dilation_iso(2.0), CORPUS, G)
    x = G.points()
    for f in CORPUS:
        for t in (0.1, 0.5, 1.3):
            np.testing.assert_allclose(S.apply(t, f).on(G), f(x + 2 * t), atol=1e-14)


def test_similar_needs_grid_to_validate():
    with pytest.raises(ValueError):
        similar(T, identity_iso(), CORPUS)
    with pytest.raises(IsoError):
        similar(T, LatticeIso(lambda f: -1.0 * f, lambda g: -1.0 * g), CORPUS, G)


# ---------------------------------------------------------------- rescale

def test_rescale_examples():
    f = closed("hat(0,1,1)")
    for f_ in CORPUS:
        assert sup_diff(rescale(T, 0.0, 1.0).apply(0.8, f_), T.apply(0.8, f_)) == 0.0
    assert sup_diff(rescale(T, 0.0, 2.0).apply(0.5, f), closed("hat(-1,1,1)")) <= 1e-15
    out = rescale(T, math.log(2.0), 1.0).apply(1.0, one()).on(G)
    np.testing.assert_allclose(out, 2.0, rtol=1e-15)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            rescale(T, 0.0, bad)


@settings(max_examples=30)
@given(st.floats(-1, 1), st.floats(0.1, 3), st.floats(-1, 1), st.floats(0.1, 3),
       st.floats(0.0, 2.0), st.sampled_from(["T", "H", "K"]))
def test_rescale_composition(mu1, a1, mu2, a2, t, op):
    S = {"T": T, "H": H, "K": K}[op]
    lhs = rescale(rescale(S, mu1, a1), mu2, a2)
    rhs = rescale(S, mu1 * a2 + mu2, a1 * a2)
    for f in CORPUS[:3]:
        a, b = lhs.apply(t, f).on(G), rhs.apply(t, f).on(G)
        assert np.max(np.abs(a - b)) <= TOL_ARITH * (1 + np.max(np.abs(b)))


# ---------------------------------------------------------------- product

def test_product_of_translations_is_double_speed():
    P = product(T, T, CORPUS, PAIRS, G)
    for f in CORPUS:
        assert sup_diff(P.apply(0.6, f), T.apply(1.2, f)) <= 1e-14


def test_product_heat_translation_commutes():
    defects = commutation_defects(H, T, CORPUS, PAIRS, G)
    assert len(defects) == len(CORPUS) * len(PAIRS)
    assert max(d[-1] for d in defects) <= LAW_TOL
    P = product(H, T, CORPUS, PAIRS, G)
    assert P.meta["corpus"] == [f.label for f in CORPUS]
    for f in CORPUS:
        assert check_semigroup_law(P, f, [(0.1, 0.2), (0.5, 0.25)], G).passes


def test_product_translation_dilation_fails():
    f = ClosedForm(lambda x: x, "x")
    d = commutation_defects(T, K, [f], [(1.0, 1.0)], G)[0][-1]
    # e^-1 (x + 1) against e^-1 x + 1
    assert d == pytest.approx(1 - math.exp(-1), rel=1e-12)
    with pytest.raises(CommutationError) as info:
        product(T, K, CORPUS, PAIRS, G)
    assert info.value.defects and max(x[-1] for x in info.value.defects) > LAW_TOL


@settings(max_examples=15)
@given(st.floats(0.0, 1.5), st.sampled_from(CORPUS))
def test_product_is_symmetric(t, f):
    a = product(H, T, CORPUS, PAIRS, G)
    b = product(T, H, CORPUS, PAIRS, G)
    assert sup_diff(a.apply(t, f), b.apply(t, f)) <= LAW_TOL


def test_constructions_keep_law_and_positivity():
    ops = [similar(T, dilation_iso(2.0), CORPUS, G), rescale(H, 0.3, 2.0),
           rescale(K, -0.5, 0.5), product(H, T, CORPUS, PAIRS, G)]
    for S in ops:
        ok, lowest = check_positivity(S, CORPUS, [0.01, 0.1, 1.0], G)
        assert ok and lowest >= -TOL_ARITH
        for f in CORPUS:
            assert check_semigroup_law(S, f, [(0.1, 0.2), (0.5, 1.0)], G).passes


# ---------------------------------------------------------------- condition (R)

def test_condition_r_scaled_constants():
    fam = [constant(float(n)) for n in range(1, 11)]
    res = condition_r_witness(fam, G, candidate_bound=one())
    assert res.holds and res.reason == "verified"
    np.testing.assert_allclose(res.lambdas, [1.0 / n for n in range(1, 11)], rtol=1e-15)


def test_condition_r_single_member():
    u = closed("gauss(1)")
    res = condition_r_witness([u], G, candidate_bound=u)
    assert res.holds and res.lambdas == [1.0]


def test_condition_r_candidate_too_small():
    fam = [closed("1+|x|")]
    res = condition_r_witness(fam, G, candidate_bound=closed("hat(0,1,1)"))
    assert not res.holds and res.lambdas is None
    res = condition_r_witness([closed("hat(0,1,1)")], G, candidate_bound=closed("hat(0,2,1)"))
    assert res.holds and res.lambdas == [1.0]


def test_condition_r_plateau_evidence():
    fam = FunctionFamily.sequence(lambda n: closed(f"plateau({n})"), 10)
    res = condition_r_witness(fam, GridSpec(-15.0, 15.0, 3001))
    assert not res.holds and res.lambdas is None
    assert len(res.evidence) == 10
    for ev in res.evidence:
        assert ev["index"] is not None and ev["index"] > ev["bound_index"]
        assert ev["value"] > 0 and ev["bound_value"] == 0.0
        # the witness point lies beyond the bound's support
        assert abs(ev["x"]) > ev["bound_index"]


def test_condition_r_plain_list_last_member_has_no_witness():
    fam = [closed(f"plateau({n})") for n in range(1, 6)]
    res = condition_r_witness(fam, GridSpec(-15.0, 15.0, 3001))
    assert all(ev["index"] is not None for ev in res.evidence[:-1])
    assert res.evidence[-1]["index"] is None


def test_condition_r_without_growth_is_inconclusive():
    res = condition_r_witness([closed("hat(0,1,1)")] * 3, G)
    assert not res.holds and not res.evidence
    with pytest.raises(ValueError):
        condition_r_witness([], G)
    with pytest.raises(ValueError):
        condition_r_witness([closed("sin")], G)
