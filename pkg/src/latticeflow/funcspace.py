"""Real functions of one variable on a truncated line, with lattice operations.

Three representations share the :class:`RealFunction` interface:

* :class:`ClosedForm` wraps a vectorised evaluator (optionally named from the
  registry so that it can be serialised),
* :class:`Sampled` holds values on a :class:`GridSpec` and interpolates
  linearly between grid points (constant extension beyond the grid),
* :class:`PiecewiseAffineFunction` stores knots, slopes and intercepts and is
  closed under the lattice operations, which are computed exactly.

All pointwise comparisons happen on an explicit grid.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

TOL_ARITH = 1e-9
TOL_KNOT = 1e-12
TOL_ZERO = 1e-12

__all__ = [
    "TOL_ARITH",
    "TOL_KNOT",
    "TOL_ZERO",
    "GridSpec",
    "RealFunction",
    "ClosedForm",
    "Sampled",
    "PiecewiseAffineFunction",
    "ConeFlag",
    "Domination",
    "NonFiniteError",
    "lattice_op",
    "order_unit_norm",
    "dominates",
    "cone_flags",
    "detect_support",
    "closed",
    "hat_pa",
    "function_from_json",
    "constant",
    "one",
    "identity",
]


class NonFiniteError(ValueError):
    """A function produced NaN or inf where a finite value was required."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``n`` points on ``[x_lo, x_hi]``."""

    x_lo: float = -50.0
    x_hi: float = 50.0
    n: int = 20001

    def __post_init__(self):
        if not (math.isfinite(self.x_lo) and math.isfinite(self.x_hi)):
            raise ValueError("grid ends must be finite")
        if not self.x_lo < self.x_hi:
            raise ValueError(f"need x_lo < x_hi, got {self.x_lo} >= {self.x_hi}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer n >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ValueError("grid spacing must be positive and finite")

    @property
    def spacing(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n - 1)

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    def points(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n)

    def widened(self, factor: float) -> "GridSpec":
        """Scale the window about its centre, keeping the spacing."""
        mid = 0.5 * (self.x_lo + self.x_hi)
        half = 0.5 * self.width * factor
        n = int(round((self.n - 1) * factor)) + 1
        return GridSpec(mid - half, mid + half, n)

    def padded(self, margin: float) -> "GridSpec":
        """Extend both ends by at least ``margin``, keeping the spacing."""
        if margin <= 0:
            return self
        k = int(math.ceil(margin / self.spacing))
        h = self.spacing
        return GridSpec(self.x_lo - k * h, self.x_hi + k * h, self.n + 2 * k)

    def to_dict(self) -> dict:
        return {"x_lo": self.x_lo, "x_hi": self.x_hi, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(float(d["x_lo"]), float(d["x_hi"]), int(d["n"]))

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"lo,hi,n"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"grid must be 'lo,hi,n', got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(float(parts[2])))


class RealFunction:
    """Base class: a real function of one real variable.

    Subclasses implement ``_eval`` on float arrays.  ``support`` is an
    optional declared compact support ``(s_lo, s_hi)``; ``None`` means no
    claim is made.
    """

    label: str = "f"
    support: tuple[float, float] | None = None

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(self._eval(x), dtype=float)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape).copy()
        return y

    def on(self, grid: GridSpec | np.ndarray) -> np.ndarray:
        """Evaluate on a grid (or point array); raise if any value is not finite."""
        x = grid.points() if isinstance(grid, GridSpec) else np.asarray(grid, float)
        y = self(x)
        if not np.all(np.isfinite(y)):
            bad = x[~np.isfinite(y)][0]
            raise NonFiniteError(f"{self.label} is not finite at x={bad!r}")
        return y

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} {self.label!r} is not serialisable")

    # numpy scalars must defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    # lazy pointwise algebra; no grid needed
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = constant(float(other))
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, lam):
        if not isinstance(lam, (int, float, np.floating)):
            return NotImplemented
        return _scale(self, float(lam))

    __rmul__ = __mul__

    def __neg__(self):
        return _scale(self, -1.0)

    def __abs__(self):
        return _abs(self)

    def shifted(self, t: float) -> "RealFunction":
        """Return ``x -> f(x + t)``."""
        sup = None if self.support is None else (self.support[0] - t, self.support[1] - t)
        return ClosedForm(lambda x, f=self: f(x + t), f"{self.label}(x+{t:g})", support=sup)

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


class ClosedForm(RealFunction):
    """Function given by a vectorised evaluator.

    ``name`` is a registry expression (see :func:`closed`); only named
    functions serialise.  ``pa`` optionally holds the same function as a
    :class:`PiecewiseAffineFunction`, for operators with exact formulas on
    piecewise-affine input.  ``gmix`` likewise holds a Gaussian mixture
    ``sum amp * exp(-(x - mean)**2 / (2 * var))`` as ``(amp, mean, var)`` triples.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], label: str = "f",
                 *, name: str | None = None, support=None, lipschitz: float | None = None,
                 pa: "PiecewiseAffineFunction | None" = None, gmix: tuple | None = None):
        self.evaluator = evaluator
        self.label = label
        self.name = name
        self.support = None if support is None else (float(support[0]), float(support[1]))
        self.lipschitz = lipschitz
        self.pa = pa
        self.gmix = gmix
        self.terms = None

    def _eval(self, x):
        return self.evaluator(x)

    def shifted(self, t: float) -> "ClosedForm":
        out = super().shifted(t)
        out.lipschitz = self.lipschitz
        out.pa = None if self.pa is None else self.pa.shifted(t)
        out.gmix = None if self.gmix is None else tuple((a, m - t, v) for a, m, v in self.gmix)
        out.terms = None if self.terms is None else tuple(g.shifted(t) for g in self.terms)
        return out

    def to_json(self):
        if self.name is None:
            raise TypeError(f"closed-form function {self.label!r} has no registry name")
        return {"repr": "closed", "name": self.name}


class Sampled(RealFunction):
    """Values on a grid, linearly interpolated, constant beyond the ends."""

    def __init__(self, grid: GridSpec, values, label: str = "sampled", support=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"sampled function {label!r} has non-finite values")
        self.grid = grid
        self.values = values
        self.label = label
        self.support = support
        self._x = grid.points()

    def _eval(self, x):
        return np.interp(x, self._x, self.values)

    @classmethod
    def of(cls, f: RealFunction, grid: GridSpec, label: str | None = None) -> "Sampled":
        return cls(grid, f.on(grid), label or f.label, support=f.support)

    def to_json(self):
        return {"repr": "sampled", "grid": self.grid.to_dict(), "values": self.values.tolist()}


class PiecewiseAffineFunction(RealFunction):
    """Continuous piecewise-affine function with finitely many knots.

    Segment ``i`` is ``slopes[i] * x + intercepts[i]`` on ``[knots[i-1], knots[i]]``;
    segment 0 covers ``(-inf, knots[0]]`` and segment ``m`` covers
    ``[knots[m-1], inf)``.
    """

    def __init__(self, knots, slopes, intercepts, label: str = "pa", support=None):
        j = np.asarray(knots, dtype=float)
        a = np.asarray(slopes, dtype=float)
        b = np.asarray(intercepts, dtype=float)
        m = j.size
        if m < 2:
            raise ValueError("need at least two knots")
        if a.shape != (m + 1,) or b.shape != (m + 1,):
            raise ValueError(f"{m} knots need {m + 1} slopes and intercepts")
        if not (np.all(np.isfinite(j)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteError("piecewise-affine data must be finite")
        if np.any(np.diff(j) <= 0):
            raise ValueError("knots must be strictly increasing")
        # continuity: b_{i-1} - b_i = (a_i - a_{i-1}) * j_i
        defect = (b[:-1] - b[1:]) - (a[1:] - a[:-1]) * j
        scale = 1.0 + np.abs(b[:-1]) + np.abs(b[1:]) + np.abs(a[1:] - a[:-1]) * np.abs(j)
        if np.any(np.abs(defect) > TOL_KNOT * scale):
            i = int(np.argmax(np.abs(defect) / scale))
            raise ValueError(f"discontinuity at knot {j[i]!r} (defect {defect[i]:.3e})")
        self.knots, self.slopes, self.intercepts = j, a, b
        self.label = label
        self.support = support

    @classmethod
    def from_values(cls, knots, values, left_slope: float | None = None,
                    right_slope: float | None = None, label: str = "pa",
                    support=None) -> "PiecewiseAffineFunction":
        """Interpolate ``values`` at ``knots``; the ends extend with the given
        slopes (default: continue the adjacent segment)."""
        j = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        inner = np.diff(v) / np.diff(j)
        a = np.empty(j.size + 1)
        a[1:-1] = inner
        a[0] = inner[0] if left_slope is None else left_slope
        a[-1] = inner[-1] if right_slope is None else right_slope
        b = np.empty_like(a)
        b[0] = v[0] - a[0] * j[0]
        b[1:-1] = v[:-1] - a[1:-1] * j[:-1]
        b[-1] = v[-1] - a[-1] * j[-1]
        return cls(j, a, b, label=label, support=support)

    @property
    def n_segments(self) -> int:
        return self.knots.size + 1

    def _eval(self, x):
        seg = np.searchsorted(self.knots, x, side="left")
        return self.slopes[seg] * x + self.intercepts[seg]

    def values_at_knots(self) -> np.ndarray:
        return self(self.knots)

    def shifted(self, t: float) -> "PiecewiseAffineFunction":
        # f(x + t): knots move left by t, slopes unchanged
        sup = None if self.support is None else (self.support[0] - t, self.support[1] - t)
        return PiecewiseAffineFunction(self.knots - t, self.slopes,
                                       self.intercepts + self.slopes * t,
                                       label=f"{self.label}(x+{t:g})", support=sup)

    def to_json(self):
        return {"repr": "pa", "knots": self.knots.tolist(), "slopes": self.slopes.tolist(),
                "intercepts": self.intercepts.tolist()}


class ConeFlag(NamedTuple):
    """Membership claims checked on a grid: ``f >= 0`` and compact support."""
    positive: bool
    compact_support: tuple[float, float] | None


class Domination(NamedTuple):
    holds: bool
    worst_violation: float


# ---------------------------------------------------------------------------
# lazy helpers

def _hull(s1, s2):
    if s1 is None or s2 is None:
        return None
    return (min(s1[0], s2[0]), max(s1[1], s2[1]))


def _add(f: RealFunction, g: RealFunction) -> RealFunction:
    if isinstance(f, PiecewiseAffineFunction) and isinstance(g, PiecewiseAffineFunction):
        return _pa_add(f, g)
    pf, pg = _pa_twin(f), _pa_twin(g)
    mf, mg = getattr(f, "gmix", None), getattr(g, "gmix", None)
    lf, lg = getattr(f, "lipschitz", None), getattr(g, "lipschitz", None)
    lip = None if lf is None or lg is None else lf + lg
    out = ClosedForm(lambda x: f(x) + g(x), f"({f.label}+{g.label})",
                     support=_hull(f.support, g.support), lipschitz=lip,
                     pa=None if pf is None or pg is None else _pa_add(pf, pg),
                     gmix=None if mf is None or mg is None else tuple(mf) + tuple(mg))
    # summands kept so linear operators can act termwise
    out.terms = (f, g)
    return out


def _pa_twin(f: RealFunction):
    if isinstance(f, PiecewiseAffineFunction):
        return f
    return getattr(f, "pa", None)


def _scale(f: RealFunction, lam: float) -> RealFunction:
    if isinstance(f, PiecewiseAffineFunction):
        return PiecewiseAffineFunction(f.knots, lam * f.slopes, lam * f.intercepts,
                                       label=f"{lam:g}*{f.label}", support=f.support)
    pa = getattr(f, "pa", None)
    lip = getattr(f, "lipschitz", None)
    out = ClosedForm(lambda x: lam * f(x), f"{lam:g}*{f.label}", support=f.support,
                     lipschitz=None if lip is None else abs(lam) * lip,
                     pa=None if pa is None else _scale(pa, lam),
                     gmix=None if getattr(f, "gmix", None) is None
                     else tuple((lam * a, m, v) for a, m, v in f.gmix))
    terms = getattr(f, "terms", None)
    out.terms = None if terms is None else tuple(_scale(g, lam) for g in terms)
    return out


def _abs(f: RealFunction) -> RealFunction:
    if isinstance(f, PiecewiseAffineFunction):
        return _pa_sup(f, _scale(f, -1.0), label=f"|{f.label}|")
    return ClosedForm(lambda x: np.abs(f(x)), f"|{f.label}|", support=f.support)


# ---------------------------------------------------------------------------
# exact piecewise-affine arithmetic

def _segment_coeffs(f: PiecewiseAffineFunction, x: np.ndarray):
    seg = np.searchsorted(f.knots, x, side="left")
    return f.slopes[seg], f.intercepts[seg]


def _merged_knots(*fs: PiecewiseAffineFunction) -> np.ndarray:
    j = np.unique(np.concatenate([f.knots for f in fs]))
    return _dedupe(j)


def _dedupe(j: np.ndarray) -> np.ndarray:
    j = np.sort(j)
    keep = np.ones(j.size, bool)
    keep[1:] = np.diff(j) > TOL_KNOT * (1.0 + np.abs(j[1:]))
    return j[keep]


def _pa_add(f, g, label=None):
    j = _merged_knots(f, g)
    if j.size < 2:
        j = np.array([j[0], j[0] + 1.0])
    probe = _probe_points(j)
    af, _ = _segment_coeffs(f, probe)
    ag, _ = _segment_coeffs(g, probe)
    # rebuild from knot values: near-coincident knots merged by _dedupe
    # must not leave a jump behind
    return PiecewiseAffineFunction.from_values(j, f(j) + g(j), left_slope=af[0] + ag[0],
                                               right_slope=af[-1] + ag[-1],
                                               label=label or f"({f.label}+{g.label})",
                                               support=_hull(f.support, g.support))


def _probe_points(j: np.ndarray) -> np.ndarray:
    """One interior point per segment of the partition given by knots ``j``."""
    mids = 0.5 * (j[:-1] + j[1:])
    return np.concatenate([[j[0] - 1.0], mids, [j[-1] + 1.0]])


def _pa_extreme(f, g, pick_max: bool, label: str):
    j = _merged_knots(f, g)
    probe = _probe_points(j)
    af, bf = _segment_coeffs(f, probe)
    ag, bg = _segment_coeffs(g, probe)
    # crossings of f - g inside each segment, including the unbounded ends
    da, db = af - ag, bf - bg
    lo = np.concatenate([[-np.inf], j])
    hi = np.concatenate([j, [np.inf]])
    cross = []
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        root = -db / da
    for k in range(probe.size):
        if da[k] != 0 and lo[k] < root[k] < hi[k]:
            cross.append(root[k])
    knots = _dedupe(np.concatenate([j, cross])) if cross else j
    probe = _probe_points(knots)
    af, bf = _segment_coeffs(f, probe)
    ag, bg = _segment_coeffs(g, probe)
    vf, vg = af * probe + bf, ag * probe + bg
    take_f = vf >= vg if pick_max else vf <= vg
    a = np.where(take_f, af, ag)
    b = np.where(take_f, bf, bg)
    # rebuild from knot values so that continuity holds to round-off
    op = np.maximum if pick_max else np.minimum
    vals = op(f(knots), g(knots))
    return PiecewiseAffineFunction.from_values(knots, vals, left_slope=a[0], right_slope=a[-1],
                                               label=label,
                                               support=_hull(f.support, g.support))


def _pa_sup(f, g, label=None):
    return _pa_extreme(f, g, True, label or f"({f.label} v {g.label})")


def _pa_inf(f, g, label=None):
    return _pa_extreme(f, g, False, label or f"({f.label} ^ {g.label})")


# ---------------------------------------------------------------------------
# public operations

_LATTICE_KINDS = ("sup", "inf", "abs", "add", "scale")


def lattice_op(kind: str, f: RealFunction, g: RealFunction | None = None,
               lam: float | None = None, grid: GridSpec | None = None) -> RealFunction:
    """Pointwise lattice/vector operation.

    Returns an exact :class:`PiecewiseAffineFunction` when every operand is
    piecewise affine; otherwise a :class:`Sampled` function on ``grid``.
    """
    if kind not in _LATTICE_KINDS:
        raise ValueError(f"unknown lattice operation {kind!r}")
    if kind in ("sup", "inf", "add") and g is None:
        raise ValueError(f"{kind} needs a second operand")
    if kind == "scale" and lam is None:
        raise ValueError("scale needs a scalar")

    pa = isinstance(f, PiecewiseAffineFunction) and (
        g is None or isinstance(g, PiecewiseAffineFunction))
    if pa:
        if kind == "sup":
            return _pa_sup(f, g)
        if kind == "inf":
            return _pa_inf(f, g)
        if kind == "abs":
            return _abs(f)
        if kind == "add":
            return _pa_add(f, g)
        return _scale(f, lam)

    if grid is None:
        raise ValueError("a grid is required for non piecewise-affine operands")
    fv = f.on(grid)
    if kind == "sup":
        out, label, sup = np.maximum(fv, g.on(grid)), f"({f.label} v {g.label})", _hull(f.support, g.support)
    elif kind == "inf":
        out, label, sup = np.minimum(fv, g.on(grid)), f"({f.label} ^ {g.label})", _hull(f.support, g.support)
    elif kind == "add":
        out, label, sup = fv + g.on(grid), f"({f.label}+{g.label})", _hull(f.support, g.support)
    elif kind == "abs":
        out, label, sup = np.abs(fv), f"|{f.label}|", f.support
    else:
        out, label, sup = lam * fv, f"{lam:g}*{f.label}", f.support
    return Sampled(grid, out, label, support=sup)


def order_unit_norm(f: RealFunction, u: RealFunction, grid: GridSpec) -> float:
    """Grid value of ``inf{lam > 0 : |f| <= lam * u}``, i.e. ``max |f|/u``."""
    uv = u.on(grid)
    if np.any(uv <= 0):
        x = grid.points()[np.argmax(uv <= 0)]
        raise ValueError(f"order unit {u.label} is not strictly positive (x={x:g})")
    return float(np.max(np.abs(f.on(grid)) / uv))


def dominates(f: RealFunction, g: RealFunction, grid: GridSpec, slack: float = 0.0) -> Domination:
    """Check ``f <= g + slack`` on the grid; report ``max(f - g)``."""
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    diff = f.on(grid) - g.on(grid)
    worst = float(np.max(diff))
    return Domination(worst <= slack, worst)


def detect_support(f: RealFunction, grid: GridSpec, tol: float = TOL_ZERO):
    """Smallest grid interval outside which ``|f| <= tol``; ``None`` if f vanishes."""
    x = grid.points()
    nz = np.abs(f.on(grid)) > tol
    if not nz.any():
        return None
    idx = np.flatnonzero(nz)
    h = grid.spacing
    return (max(grid.x_lo, x[idx[0]] - h), min(grid.x_hi, x[idx[-1]] + h))


def cone_flags(f: RealFunction, grid: GridSpec, tol: float = TOL_ZERO) -> ConeFlag:
    """Check positivity and the declared compact support of ``f`` on the grid.

    Raises if ``f`` declares a support but is nonzero outside it.
    """
    v = f.on(grid)
    positive = bool(np.all(v >= -tol))
    sup = f.support
    if sup is not None:
        x = grid.points()
        outside = (x < sup[0]) | (x > sup[1])
        if np.any(np.abs(v[outside]) > tol):
            bad = x[outside][np.argmax(np.abs(v[outside]))]
            raise ValueError(f"{f.label} is nonzero at x={bad:g}, outside its declared support {sup}")
    return ConeFlag(positive, sup)


# ---------------------------------------------------------------------------
# registry of named closed forms

def _pa(knots, values, left, right, support=None):
    return PiecewiseAffineFunction.from_values(knots, values, left, right, support=support)


def constant(c: float) -> ClosedForm:
    return ClosedForm(lambda x: np.full_like(x, c), f"{c:g}", name=f"const({c!r})",
                      support=(0.0, 0.0) if c == 0 else None, lipschitz=0.0,
                      pa=_pa([-1.0, 1.0], [c, c], 0.0, 0.0))


def one() -> ClosedForm:
    f = constant(1.0)
    f.label, f.name = "1", "one"
    return f


def identity() -> ClosedForm:
    return ClosedForm(lambda x: x, "x", name="identity", lipschitz=1.0,
                      pa=_pa([-1.0, 1.0], [-1.0, 1.0], 1.0, 1.0))


def hat_pa(center: float, halfwidth: float, height: float) -> PiecewiseAffineFunction:
    """Triangle of the given height supported on ``[center - halfwidth, center + halfwidth]``."""
    c, w = center, halfwidth
    return PiecewiseAffineFunction.from_values([c - w, c, c + w], [0.0, height, 0.0], 0.0, 0.0,
                                               label=f"hat({c:g},{w:g},{height:g})",
                                               support=(c - w, c + w))


def _hat(c, w, h):
    if w <= 0:
        raise ValueError("hat half-width must be positive")
    return ClosedForm(lambda x: h * np.maximum(0.0, 1.0 - np.abs(x - c) / w),
                      f"hat({c:g},{w:g},{h:g})", name=f"hat({c!r},{w!r},{h!r})",
                      support=(c - w, c + w), lipschitz=abs(h) / w,
                      pa=_pa([c - w, c, c + w], [0.0, h, 0.0], 0.0, 0.0, (c - w, c + w)))


def _plateau(r, ramp=1.0):
    # 1 on [-r, r], linear ramps to 0 on [-r-ramp, -r] and [r, r+ramp]
    return ClosedForm(lambda x: np.clip((r + ramp - np.abs(x)) / ramp, 0.0, 1.0),
                      f"plateau({r:g})", name=f"plateau({r!r},{ramp!r})",
                      support=(-r - ramp, r + ramp), lipschitz=1.0 / ramp,
                      pa=_pa([-r - ramp, -r, r, r + ramp], [0.0, 1.0, 1.0, 0.0], 0.0, 0.0,
                             (-r - ramp, r + ramp)))


def _gauss(sigma):
    if sigma <= 0:
        raise ValueError("gauss width must be positive")
    return ClosedForm(lambda x: np.exp(-0.5 * (x / sigma) ** 2), f"gauss({sigma:g})",
                      name=f"gauss({sigma!r})", lipschitz=math.exp(-0.5) / sigma,
                      gmix=((1.0, 0.0, sigma * sigma),))


def gaussian_mixture(gmix, label: str = "gmix") -> ClosedForm:
    """Closed form for ``sum amp * exp(-(x - mean)**2 / (2 * var))``."""
    gmix = tuple((float(a), float(m), float(v)) for a, m, v in gmix)
    if any(v <= 0 for _, _, v in gmix):
        raise ValueError("variances must be positive")

    def ev(x):
        out = np.zeros_like(x, dtype=float)
        for a, m, v in gmix:
            out += a * np.exp(-0.5 * (x - m) ** 2 / v)
        return out

    lip = sum(abs(a) * math.exp(-0.5) / math.sqrt(v) for a, _, v in gmix)
    return ClosedForm(ev, label, lipschitz=lip, gmix=gmix)


def _lp_singular(p):
    if p <= 0:
        raise ValueError("p must be positive")
    e = 1.0 / (2.0 * p)

    def ev(x):
        with np.errstate(divide="ignore"):
            return np.abs(1.0 / (x - 0.5)) ** e

    return ClosedForm(ev, f"lp_singular({p:g})",
                      name=f"lp_singular({p!r})")


def _clip_abs(r):
    # 1 + min(|x|, r): Lipschitz, bounded, in the order ideal of 1 + |x|
    return ClosedForm(lambda x: 1.0 + np.minimum(np.abs(x), r), f"clip(1+|x|,{r:g})",
                      name=f"clip(1+|x|,{r!r})", lipschitz=1.0,
                      pa=_pa([-r, 0.0, r], [1.0 + r, 1.0, 1.0 + r], 0.0, 0.0))


_REGISTRY: dict[str, Callable[..., ClosedForm]] = {
    "hat": _hat,
    "gauss": _gauss,
    "lp_singular": _lp_singular,
    "plateau": _plateau,
    "const": constant,
    "clip(1+|x|)": _clip_abs,
}

_NULLARY: dict[str, Callable[[], ClosedForm]] = {
    "one": one,
    "zero": lambda: constant(0.0),
    "identity": identity,
    "x": identity,
    "abs": lambda: ClosedForm(np.abs, "|x|", name="abs", lipschitz=1.0,
                              pa=_pa([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], -1.0, 1.0)),
    "1+|x|": lambda: ClosedForm(lambda x: 1.0 + np.abs(x), "1+|x|", name="1+|x|", lipschitz=1.0,
                                pa=_pa([-1.0, 0.0, 1.0], [2.0, 1.0, 2.0], -1.0, 1.0)),
    "square": lambda: ClosedForm(lambda x: x * x, "x^2", name="square"),
    "sin": lambda: ClosedForm(np.sin, "sin", name="sin", lipschitz=1.0),
}

_CALL = re.compile(r"^\s*([A-Za-z_][\w]*|clip\(1\+\|x\|\))\s*(?:\((.*)\))?\s*$")


def closed(expr: str, grid: GridSpec | None = None) -> ClosedForm:
    """Build a named closed-form function from a registry expression.

    Examples: ``"hat(0,1,1)"``, ``"gauss(1)"``, ``"lp_singular(0.5)"``,
    ``"plateau(3)"``, ``"one"``, ``"1+|x|"``.  ``"clip(1+|x|)"`` without a
    radius clips at the half-width of ``grid`` (50 when no grid is given).
    """
    e = expr.strip()
    if e in _NULLARY:
        return _NULLARY[e]()
    if e.startswith("clip(1+|x|)"):
        rest = e[len("clip(1+|x|)"):].strip()
        if rest:
            raise ValueError(f"cannot parse {expr!r}")
        r = 50.0 if grid is None else max(abs(grid.x_lo), abs(grid.x_hi))
        return _clip_abs(r)
    if e.startswith("clip(1+|x|,"):
        return _clip_abs(float(e[len("clip(1+|x|,"):-1]))
    m = _CALL.match(e)
    if not m or m.group(1) not in _REGISTRY:
        raise ValueError(f"unknown closed-form function {expr!r}")
    args = [float(a) for a in m.group(2).split(",")] if m.group(2) else []
    try:
        return _REGISTRY[m.group(1)](*args)
    except TypeError as exc:
        raise ValueError(f"bad arguments in {expr!r}: {exc}") from None


def function_from_json(doc, grid: GridSpec | None = None) -> RealFunction:
    """Inverse of ``RealFunction.to_json``; a bare string is a registry name."""
    if isinstance(doc, str):
        return closed(doc, grid)
    kind = doc.get("repr")
    if kind == "closed":
        return closed(doc["name"], grid)
    if kind == "pa":
        return PiecewiseAffineFunction(doc["knots"], doc["slopes"], doc["intercepts"],
                                       label=doc.get("label", "pa"))
    if kind == "sampled":
        return Sampled(GridSpec.from_dict(doc["grid"]), doc["values"], doc.get("label", "sampled"))
    raise ValueError(f"unknown function representation {kind!r}")
