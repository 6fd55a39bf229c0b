import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from latticeflow.funcspace import (TOL_ARITH, ClosedForm, GridSpec, NonFiniteError,
                                   PiecewiseAffineFunction, Sampled, closed, cone_flags, constant,
                                   detect_support, dominates, function_from_json, hat_pa, identity,
                                   lattice_op, one, order_unit_norm)

G = GridSpec(-5.0, 5.0, 2001)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def pa_functions(draw):
    m = draw(st.integers(2, 6))
    knots = sorted(draw(st.lists(st.floats(-4, 4), min_size=m, max_size=m, unique=True)))
    if np.min(np.diff(knots)) < 1e-3:
        knots = list(np.linspace(-4, 4, m))
    vals = draw(st.lists(finite, min_size=m, max_size=m))
    left, right = draw(finite), draw(finite)
    return PiecewiseAffineFunction.from_values(knots, vals, left, right)


# ---------------------------------------------------------------- GridSpec

def test_grid_spacing_and_points():
    g = GridSpec(-1, 1, 5)
    assert g.spacing == 0.5
    np.testing.assert_allclose(g.points(), [-1, -0.5, 0, 0.5, 1])


@pytest.mark.parametrize("args", [(1, 1, 5), (2, 1, 5), (0, 1, 1), (0, np.inf, 3)])
def test_grid_rejects_bad_windows(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_grid_parse_roundtrip():
    g = GridSpec.parse("-3,4.5,101")
    assert g == GridSpec(-3.0, 4.5, 101)
    assert GridSpec.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GridSpec.parse("1,2")


def test_default_grid():
    g = GridSpec()
    assert (g.x_lo, g.x_hi, g.n) == (-50.0, 50.0, 20001)


# ---------------------------------------------------------------- PA basics

def test_pa_rejects_discontinuity_and_bad_knots():
    with pytest.raises(ValueError):
        PiecewiseAffineFunction([0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        PiecewiseAffineFunction([1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        PiecewiseAffineFunction([0.0], [0.0, 0.0], [0.0, 0.0])


def test_pa_from_values_interpolates():
    f = PiecewiseAffineFunction.from_values([-1, 0, 2], [1, 3, -1], -2.0, 0.5)
    np.testing.assert_allclose(f([-2, -1, -0.5, 0, 1, 2, 4]), [3, 1, 2, 3, 1, -1, 0])
    np.testing.assert_allclose(f.values_at_knots(), [1, 3, -1])


def test_hat_pa_matches_closed_hat():
    np.testing.assert_allclose(hat_pa(0.5, 2, 3).on(G), closed("hat(0.5,2,3)").on(G), atol=1e-15)


@given(pa_functions(), st.floats(-3, 3))
def test_pa_shift_is_exact(f, t):
    x = G.points()
    want = f(x + t)
    assert np.all(np.abs(f.shifted(t)(x) - want) <= 1e-9 * (1 + np.abs(want)))


@given(pa_functions())
def test_pa_json_roundtrip(f):
    g = function_from_json(json.loads(json.dumps(f.to_json())))
    np.testing.assert_array_equal(g.on(G), f.on(G))


# ---------------------------------------------------------------- lattice ops

def test_abs_of_identity_is_pa_with_knot_at_zero():
    x = PiecewiseAffineFunction.from_values([-1, 1], [-1, 1], 1, 1)
    a = lattice_op("sup", x, lattice_op("scale", x, lam=-1.0))
    assert isinstance(a, PiecewiseAffineFunction)
    assert 0.0 in a.knots
    np.testing.assert_allclose(a.on(GridSpec(-1, 1, 201)), np.abs(GridSpec(-1, 1, 201).points()))


def test_add_negation_is_zero():
    f = hat_pa(0, 1, 2)
    z = lattice_op("add", f, lattice_op("scale", f, lam=-1.0))
    assert np.max(np.abs(z.on(G))) == 0.0


def test_w_shape_sup_of_two_hats():
    w = lattice_op("sup", hat_pa(-1, 1, 1), hat_pa(1, 1, 1))
    assert isinstance(w, PiecewiseAffineFunction)
    np.testing.assert_allclose(w.knots, [-2, -1, 0, 1, 2])
    # five knots, so four bounded pieces plus the two flat tails
    assert w.n_segments == 6
    assert w(0.0) == 0.0
    fine = GridSpec(-3, 3, 10001)
    brute = np.maximum(hat_pa(-1, 1, 1).on(fine), hat_pa(1, 1, 1).on(fine))
    assert np.max(np.abs(w.on(fine) - brute)) <= TOL_ARITH


def test_mixed_operands_fall_back_to_sampled():
    s = lattice_op("sup", closed("gauss(1)"), hat_pa(0, 1, 1), grid=G)
    assert isinstance(s, Sampled)
    np.testing.assert_allclose(s.on(G), np.maximum(closed("gauss(1)").on(G),
                                                   hat_pa(0, 1, 1).on(G)))


def test_lattice_op_errors():
    with pytest.raises(ValueError):
        lattice_op("sup", hat_pa(0, 1, 1))
    with pytest.raises(ValueError):
        lattice_op("scale", hat_pa(0, 1, 1))
    with pytest.raises(ValueError):
        lattice_op("sup", closed("gauss(1)"), closed("gauss(2)"))  # no grid
    with pytest.raises(ValueError):
        lattice_op("frobnicate", hat_pa(0, 1, 1), hat_pa(0, 1, 1))


@given(pa_functions(), pa_functions())
def test_pa_lattice_ops_agree_with_brute_force(f, g):
    x = G.points()
    fx, gx = f(x), g(x)
    scale = 1 + np.max(np.abs(fx)) + np.max(np.abs(gx))
    for kind, want in (("sup", np.maximum(fx, gx)), ("inf", np.minimum(fx, gx)),
                       ("add", fx + gx)):
        got = lattice_op(kind, f, g)
        assert isinstance(got, PiecewiseAffineFunction)
        assert np.max(np.abs(got(x) - want)) <= TOL_ARITH * scale
    assert np.max(np.abs(lattice_op("abs", f)(x) - np.abs(fx))) <= TOL_ARITH * scale


@given(pa_functions(), pa_functions())
def test_sup_plus_inf_is_sum(f, g):
    lhs = lattice_op("add", lattice_op("sup", f, g), lattice_op("inf", f, g))
    rhs = lattice_op("add", f, g)
    scale = 1 + np.max(np.abs(rhs.on(G)))
    assert np.max(np.abs(lhs.on(G) - rhs.on(G))) <= TOL_ARITH * scale


@given(pa_functions())
def test_abs_is_sup_with_negative(f):
    a = lattice_op("abs", f)
    b = lattice_op("sup", f, lattice_op("scale", f, lam=-1.0))
    np.testing.assert_array_equal(a.on(G), b.on(G))


@given(pa_functions())
def test_riesz_decomposition(f):
    zero = PiecewiseAffineFunction.from_values([-1, 1], [0, 0], 0, 0)
    pos = lattice_op("sup", f, zero)
    neg = lattice_op("sup", lattice_op("scale", f, lam=-1.0), zero)
    x = G.points()
    scale = 1 + np.max(np.abs(f(x)))
    assert np.max(np.abs(pos(x) - neg(x) - f(x))) <= TOL_ARITH * scale
    assert np.max(np.abs(pos(x) + neg(x) - np.abs(f(x)))) <= TOL_ARITH * scale


def test_lazy_arithmetic():
    f, g = closed("gauss(1)"), closed("sin")
    x = G.points()
    np.testing.assert_allclose((2 * f - g + 1).on(G), 2 * f(x) - np.sin(x) + 1)
    np.testing.assert_allclose(abs(-g).on(G), np.abs(np.sin(x)))


# ---------------------------------------------------------------- order unit norm

def test_order_unit_norm_examples():
    assert order_unit_norm(constant(-3.0), one(), G) == 3.0
    u = closed("1+|x|")
    val = order_unit_norm(identity(), u, GridSpec(-100, 100, 20001))
    assert 0.99 <= val < 1.0
    assert order_unit_norm(u, u, G) == 1.0


def test_order_unit_norm_needs_positive_unit():
    with pytest.raises(ValueError):
        order_unit_norm(one(), closed("abs"), G)
    with pytest.raises(ValueError):
        order_unit_norm(one(), constant(-1.0), G)


@given(pa_functions(), pa_functions(), st.floats(-5, 5))
def test_order_unit_norm_homogeneous_and_subadditive(f, g, lam):
    u = closed("1+|x|")
    nf, ng = order_unit_norm(f, u, G), order_unit_norm(g, u, G)
    assert abs(order_unit_norm(lam * f, u, G) - abs(lam) * nf) <= TOL_ARITH * (1 + abs(lam) * nf)
    assert order_unit_norm(f + g, u, G) <= nf + ng + TOL_ARITH * (1 + nf + ng)


# ---------------------------------------------------------------- dominates, supports

def test_dominates_examples():
    d = dominates(constant(0.0), constant(0.0), G)
    assert d.holds and d.worst_violation == 0.0
    d = dominates(closed("square"), identity(), GridSpec(0, 2, 201))
    assert not d.holds and d.worst_violation == pytest.approx(2.0)
    assert dominates(closed("sin"), one(), G).holds
    with pytest.raises(ValueError):
        dominates(one(), one(), G, slack=-1.0)


def test_detect_support_and_cone_flags():
    f = closed("hat(1,0.5,2)")
    lo, hi = detect_support(f, G)
    assert 0.5 - G.spacing <= lo <= 0.5 + G.spacing and 1.5 - G.spacing <= hi <= 1.5 + G.spacing
    flags = cone_flags(f, G)
    assert flags.positive and flags.compact_support == (0.5, 1.5)
    assert detect_support(constant(0.0), G) is None
    assert not cone_flags(closed("sin"), G).positive


def test_cone_flags_rejects_false_support():
    bad = ClosedForm(lambda x: np.ones_like(x), "liar", support=(-1.0, 1.0))
    with pytest.raises(ValueError):
        cone_flags(bad, G)


# ---------------------------------------------------------------- registry and representations

@pytest.mark.parametrize("expr", ["hat(0,1,1)", "gauss(2)", "lp_singular(1)", "plateau(3)",
                                  "one", "zero", "abs", "1+|x|", "clip(1+|x|,5)", "const(2.5)",
                                  "identity", "square", "sin"])
def test_registry_roundtrip(expr):
    f = closed(expr)
    g = function_from_json(json.loads(json.dumps(f.to_json())))
    xs = G.points()[(G.points() != 0.5)]
    np.testing.assert_array_equal(g(xs), f(xs))


@pytest.mark.parametrize("expr", ["hat(0,1,1)", "plateau(2)", "clip(1+|x|,4)", "abs", "1+|x|",
                                  "const(-2)", "identity", "one"])
def test_pa_twins_match_closed_forms(expr):
    f = closed(expr)
    x = GridSpec(-8, 8, 1601).points()
    np.testing.assert_allclose(f.pa(x), f(x), atol=1e-12)
    np.testing.assert_allclose(f.shifted(0.7).pa(x), f(x + 0.7), atol=1e-12)
    np.testing.assert_allclose((3 * f).pa(x), 3 * f(x), atol=1e-12)


def test_clip_defaults_to_grid_half_width():
    f = closed("clip(1+|x|)", GridSpec(-7, 7, 11))
    assert f(100.0) == 8.0
    assert closed("clip(1+|x|)")(1e6) == 51.0


@pytest.mark.parametrize("expr", ["nope", "hat(1,2)", "hat(0,0,1)", "gauss(x)", "clip(1+|x|)x"])
def test_registry_rejects_garbage(expr):
    with pytest.raises(ValueError):
        closed(expr)


def test_unnamed_closed_form_does_not_serialise():
    with pytest.raises(TypeError):
        ClosedForm(np.cos, "cos").to_json()


def test_sampled_interpolates_and_extends_constantly():
    g = GridSpec(0, 1, 3)
    s = Sampled(g, [0.0, 2.0, 1.0])
    np.testing.assert_allclose(s([-1, 0.25, 0.75, 5]), [0, 1, 1.5, 1])
    with pytest.raises(NonFiniteError):
        Sampled(g, [0.0, np.nan, 1.0])


def test_non_finite_evaluation_is_reported():
    with pytest.raises(NonFiniteError):
        closed("lp_singular(1)").on(GridSpec(0, 1, 3))
