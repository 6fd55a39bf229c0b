"""Positive one-parameter semigroups acting on :class:`RealFunction`.

Operators are lazy: ``apply(t, f)`` returns a new function that evaluates on
demand.  The heat semigroup is the Gaussian convolution computed by composite
Simpson quadrature of the truncated kernel; nesting it multiplies the
quadrature cost, so long power chains are materialised on a padded grid
(see :meth:`SemigroupOperator.power`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.ndimage import maximum_filter1d
from scipy.special import ndtr

from .funcspace import (TOL_ARITH, ClosedForm, GridSpec, PiecewiseAffineFunction, RealFunction,
                        Sampled, dominates, gaussian_mixture)
from .ru_conv import FunctionFamily, RegulatorReport, verify_ru_convergence

__all__ = [
    "LAW_TOL",
    "HEAT_T_MIN",
    "SemigroupOperator",
    "LawReport",
    "OrbitBound",
    "OrbitBoundError",
    "DivergenceTable",
    "make_translation",
    "make_heat",
    "gamma_constant",
    "heat_guaranteed_delta",
    "check_semigroup_law",
    "check_positivity",
    "orbit_order_bound",
    "test_ruc_at_zero",
    "regulator_search",
    "lp_counterexample_probe",
    "lp_probe_grid",
]

LAW_TOL = 1e-6
HEAT_T_MIN = 1e-6
_CHUNK = 1 << 18


class SemigroupOperator:
    """A family ``T(t)``, ``t >= 0``, of positive linear operators.

    ``reach(t)`` bounds how far from a point ``T(t)f`` reads ``f`` (``None``
    if unknown); ``materialise`` marks operators whose nested application
    is too expensive to keep lazy.
    """

    def __init__(self, apply_fn: Callable[[float, RealFunction], RealFunction], kind: str,
                 label: str, *, reach: Callable[[float], float] | None = None,
                 materialise: bool = False, meta: dict | None = None):
        self._apply = apply_fn
        self.kind = kind
        self.label = label
        self._reach = reach
        self.materialise = materialise
        self.meta = dict(meta or {})

    def apply(self, t: float, f: RealFunction) -> RealFunction:
        if t < 0:
            raise ValueError(f"semigroup time must be nonnegative, got {t}")
        if t == 0:
            return f
        return self._apply(float(t), f)

    def reach(self, t: float) -> float | None:
        return None if self._reach is None else self._reach(t)

    def power(self, t: float, k: int, f: RealFunction, grid: GridSpec | None = None) -> RealFunction:
        """``T(t)^k f``.  Materialised on ``grid`` after each step when
        ``self.materialise`` is set (``grid`` is then required)."""
        out = f
        for _ in range(k):
            out = self.apply(t, out)
            if self.materialise:
                if grid is None:
                    raise ValueError(f"{self.label}: powers need a grid to materialise on")
                out = Sampled.of(out, grid)
        return out

    def __repr__(self):
        return f"<SemigroupOperator {self.label}>"


def make_translation() -> SemigroupOperator:
    """Left translation ``(T(t)f)(x) = f(x + t)``."""
    return SemigroupOperator(lambda t, f: f.shifted(t), "translation", "T_l",
                             reach=lambda t: t)


def _simpson_weights(z: np.ndarray) -> np.ndarray:
    return simpson(np.eye(z.size), x=z, axis=1)


def _heat_pa(f: PiecewiseAffineFunction, sigma: float, y: np.ndarray) -> np.ndarray:
    """Exact Gaussian smoothing of a piecewise-affine function.

    On a segment ``[l, r]`` carrying ``a*x + b`` the contribution is
    ``(a*y + b)(Phi(beta) - Phi(alpha)) + a*sigma*(phi(alpha) - phi(beta))``
    with ``alpha = (l - y)/sigma`` and ``beta = (r - y)/sigma``.
    """
    shape = np.shape(y)
    y = np.asarray(y, dtype=float).reshape(-1)
    edges = np.concatenate([[-np.inf], f.knots, [np.inf]])
    out = np.zeros_like(y)
    for i in range(0, y.size, 4096):
        yy = y[i:i + 4096, None]
        q = (edges[None, :] - yy) / sigma
        cdf = ndtr(q)
        pdf = np.exp(-0.5 * np.where(np.isfinite(q), q, 0.0) ** 2) / math.sqrt(2.0 * math.pi)
        pdf = np.where(np.isfinite(q), pdf, 0.0)
        mass = np.diff(cdf, axis=1)
        mom = -np.diff(pdf, axis=1)
        out[i:i + 4096] = ((f.slopes[None, :] * yy + f.intercepts[None, :]) * mass
                           + sigma * f.slopes[None, :] * mom).sum(axis=1)
    return out.reshape(shape)


def make_heat(quad_halfwidth_sigmas: float = 8.0, quad_points: int = 513,
              t_min: float = HEAT_T_MIN) -> SemigroupOperator:
    """Heat semigroup on the line: convolution with the Gaussian of variance ``2t``.

    Piecewise-affine input (or a closed form carrying a ``pa`` twin) is
    smoothed exactly through the normal cdf, Gaussian mixtures map to
    Gaussian mixtures; everything else goes through
    Simpson quadrature on the truncated kernel.

    Parameters
    ----------
    quad_halfwidth_sigmas : float
        Kernel truncated at this many standard deviations ``sqrt(2t)``.
    quad_points : int
        Number of Simpson nodes across the truncated kernel.
    t_min : float
        Below this time ``T(t)`` is the identity; for a Lipschitz ``f`` with
        constant ``L`` the substitution error is at most
        ``2 * L * sqrt(t / pi)``.
    """
    if quad_points < 16:
        raise ValueError("quad_points must be at least 16")
    if quad_halfwidth_sigmas < 4:
        raise ValueError("quad_halfwidth_sigmas must be at least 4")
    z = np.linspace(-quad_halfwidth_sigmas, quad_halfwidth_sigmas, quad_points)
    w = _simpson_weights(z) * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    chunk = max(1, _CHUNK // quad_points)

    def apply(t, f):
        if t < t_min:
            return f
        gm = getattr(f, "gmix", None)
        if gm is not None:
            return gaussian_mixture([(a * math.sqrt(v / (v + 2.0 * t)), m, v + 2.0 * t)
                                     for a, m, v in gm], f"H({t:g}){f.label}")
        pa = f if isinstance(f, PiecewiseAffineFunction) else getattr(f, "pa", None)
        if pa is not None:
            return ClosedForm(lambda y: _heat_pa(pa, math.sqrt(2.0 * t), y), f"H({t:g}){f.label}",
                              lipschitz=getattr(f, "lipschitz", None))
        terms = getattr(f, "terms", None)
        if terms is not None:
            return sum((apply(t, g) for g in terms[1:]), apply(t, terms[0]))
        sz = math.sqrt(2.0 * t) * z

        def ev(y):
            flat = y.reshape(-1)
            out = np.empty_like(flat)
            for i in range(0, flat.size, chunk):
                yy = flat[i:i + chunk]
                out[i:i + chunk] = f(yy[:, None] + sz[None, :]) @ w
            return out.reshape(y.shape)

        return ClosedForm(ev, f"H({t:g}){f.label}", lipschitz=getattr(f, "lipschitz", None))

    return SemigroupOperator(apply, "heat", "heat",
                             reach=lambda t: quad_halfwidth_sigmas * math.sqrt(2.0 * t),
                             materialise=True,
                             meta={"quad_halfwidth_sigmas": quad_halfwidth_sigmas,
                                   "quad_points": quad_points, "t_min": t_min, "N": 1})


def gamma_constant(N: int) -> float:
    """``2 * Gamma((N+1)/2) / Gamma(N/2)``, the first absolute moment factor of the heat kernel."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if N < 300:
        return 2.0 * math.gamma((N + 1) / 2) / math.gamma(N / 2)
    return 2.0 * math.exp(math.lgamma((N + 1) / 2) - math.lgamma(N / 2))


def heat_guaranteed_delta(eps: float, lipschitz: float, N: int = 1) -> float:
    """Time below which ``|T(h)f - f| <= eps`` is guaranteed for an L-Lipschitz ``f``.

    With ``delta_mod = eps / (2L)`` one has
    ``|f(x+y) - f(y)| <= (eps/2) * (|x| / delta_mod + 1)``, and the kernel's
    first absolute moment ``sqrt(t) * C_N`` then gives
    ``h <= delta_mod**2 / C_N**2``.
    """
    if eps <= 0 or lipschitz < 0:
        raise ValueError("need eps > 0 and lipschitz >= 0")
    if lipschitz == 0:
        return math.inf
    delta_mod = eps / (2.0 * lipschitz)
    return delta_mod ** 2 / gamma_constant(N) ** 2


class LawReport(NamedTuple):
    passes: bool
    defects: list  # (s, t, sup-norm defect)
    law_tol: float

    @property
    def worst(self) -> float:
        return max((d for _, _, d in self.defects), default=0.0)


def check_semigroup_law(S: SemigroupOperator, f: RealFunction, times: Sequence[tuple[float, float]],
                        grid: GridSpec, law_tol: float = LAW_TOL) -> LawReport:
    """Sup-norm defect of ``T(s+t)f - T(t)T(s)f`` on the grid for each pair."""
    defects = []
    for s, t in times:
        if s < 0 or t < 0:
            raise ValueError("times must be nonnegative")
        lhs = S.apply(s + t, f).on(grid)
        rhs = S.apply(t, S.apply(s, f)).on(grid)
        defects.append((float(s), float(t), float(np.max(np.abs(lhs - rhs)))))
    return LawReport(all(d <= law_tol for _, _, d in defects), defects, law_tol)


def check_positivity(S: SemigroupOperator, fs: Sequence[RealFunction], times: Sequence[float],
                     grid: GridSpec, tol: float = TOL_ARITH) -> tuple[bool, float]:
    """Apply ``S`` to nonnegative inputs; return (all >= -tol, smallest value seen)."""
    lowest = math.inf
    for f in fs:
        if np.any(f.on(grid) < 0):
            raise ValueError(f"{f.label} is not nonnegative on the grid")
        for t in times:
            lowest = min(lowest, float(np.min(S.apply(t, f).on(grid))))
    return lowest >= -tol, lowest


class OrbitBoundError(RuntimeError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


@dataclass
class OrbitBound:
    """Order bound ``v`` for the orbit ``{|T(t)x| : 0 <= t <= s}``."""
    x: RealFunction
    s: float
    delta: float
    u: RealFunction
    n0: int
    v: RealFunction
    orbit_times: np.ndarray = field(repr=False, default=None)
    worst_violation: float = -math.inf
    violations: int = 0
    certificate_slack: float = -math.inf


def orbit_order_bound(S: SemigroupOperator, x: RealFunction, u: RealFunction, s: float,
                      delta: float, grid: GridSpec, n_orbit: int = 64, slack: float = 1e-8,
                      strict: bool = True) -> OrbitBound:
    """Build ``v = max_{k=0..n0} T(delta)^k (|x| + u)`` and check it bounds the sampled orbit.

    ``u`` must certify ``|T(h)x - x| <= u`` for ``h in [0, delta]``; this is
    re-checked on a time sample and a violation raises ``ValueError``.  With
    ``strict`` a domination failure raises :class:`OrbitBoundError`.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    n0 = int(math.ceil(s / delta * (1 - 1e-12))) if s > 0 else 0

    xv, uv = x.on(grid), u.on(grid)
    if np.any(uv < 0):
        raise ValueError("u must be nonnegative")
    cert = -math.inf
    for h in np.linspace(0.0, delta, 17):
        cert = max(cert, float(np.max(np.abs(S.apply(h, x).on(grid) - xv) - uv)))
    if cert > slack:
        raise ValueError(f"u does not bound |T(h)x - x| on [0, {delta}] (excess {cert:.3e})")

    base = abs(x) + u
    work = grid
    if S.materialise:
        r = S.reach(delta)
        work = grid.padded((n0 + 1) * r if r is not None else 0.0)
        base = Sampled.of(base, work)
    vv = base.on(grid)
    term = base
    for _ in range(n0):
        term = S.power(delta, 1, term, work)
        vv = np.maximum(vv, term.on(grid))
    v = Sampled(grid, vv, f"v[{x.label}]")

    times = np.linspace(0.0, s, n_orbit)
    worst, bad = -math.inf, 0
    for t in times:
        d = dominates(abs(S.apply(t, x)), v, grid, slack)
        worst = max(worst, d.worst_violation)
        bad += not d.holds
    bound = OrbitBound(x, s, delta, u, n0, v, times, worst, bad, cert)
    if strict and bad:
        raise OrbitBoundError(f"{bad} of {n_orbit} orbit samples exceed v (worst {worst:.3e})", bound)
    return bound


def _orbit_family(S, x, t_hi, n_samples):
    return FunctionFamily.continuum(lambda h: S.apply(h, x), t_hi=t_hi, n_samples=n_samples,
                                    label=f"{S.label}(h){x.label}")


def test_ruc_at_zero(S: SemigroupOperator, x_positive: RealFunction, regulator: RealFunction,
                     eps_list: Sequence[float], grid: GridSpec, t_hi: float = 1.0,
                     n_samples: int = 256, slack: float = TOL_ARITH) -> RegulatorReport:
    """Check ``T(h)x -> x`` relatively uniformly as ``h -> 0`` for a positive ``x``."""
    if np.any(x_positive.on(grid) < -TOL_ARITH):
        raise ValueError(f"{x_positive.label} is not positive on the grid")
    return verify_ru_convergence(_orbit_family(S, x_positive, t_hi, n_samples), x_positive,
                                 regulator, eps_list, grid, slack)


test_ruc_at_zero.__test__ = False  # not a pytest test despite the name


def regulator_search(S: SemigroupOperator, x: RealFunction, candidates: Sequence[RealFunction],
                     eps_list: Sequence[float], grid: GridSpec, t_hi: float = 1.0,
                     n_samples: int = 256):
    """First candidate regulating ``T(h)x -> x``, with its report; ``None`` if none does."""
    if not candidates:
        raise ValueError("no candidate regulators")
    fam = _orbit_family(S, x, t_hi, n_samples)
    for u in candidates:
        if np.any(u.on(grid) < 0):
            raise ValueError(f"candidate {u.label} is negative")
        rep = verify_ru_convergence(fam, x, u, eps_list, grid)
        if rep.converged:
            return u, rep
    return None


@dataclass
class DivergenceTable:
    p: float
    delta: float
    grid_n: list
    max_value: list
    lp_mass: list
    min_growth: float

    @property
    def growth(self) -> list:
        m = self.max_value
        return [m[i + 1] / m[i] for i in range(len(m) - 1)]

    @property
    def diverging(self) -> bool:
        return all(g >= self.min_growth for g in self.growth)

    def to_dict(self) -> dict:
        return {"p": self.p, "delta": self.delta, "grid_n": self.grid_n,
                "max_value": self.max_value, "lp_mass": self.lp_mass,
                "growth": self.growth, "min_growth": self.min_growth,
                "diverging": self.diverging}

    def to_csv(self) -> str:
        lines = ["grid_n,max_value"]
        lines += [f"{n},{m!r}" for n, m in zip(self.grid_n, self.max_value)]
        return "\n".join(lines) + "\n"


def lp_probe_grid(n: int) -> GridSpec:
    """Cell-centred grid of ``n`` points on ``[0, 1]``."""
    return GridSpec(0.5 / n, 1.0 - 0.5 / n, n)


def lp_counterexample_probe(p: float, delta: float, grid_ns: Sequence[int] = (1000, 10000, 100000),
                            min_growth: float = 2.0) -> DivergenceTable:
    """Grid maxima of ``g = sup_{t in [0, delta]} T_l(t) f`` for ``f = |x - 1/2|^(-1/(2p))``.

    Times are the grid multiples ``j*h <= delta``, so ``T_l(t)f`` is read
    exactly at grid points.  A pointwise supremum that stays finite would be
    bounded independently of the grid; the table shows the maxima growing
    under refinement instead.  ``lp_mass`` is the Riemann sum of ``g**p``.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    f_exp = 1.0 / (2.0 * p)
    maxima, masses = [], []
    for n in grid_ns:
        n = int(n)
        grid = lp_probe_grid(n)
        h = grid.spacing
        J = int(math.floor(delta / h + 1e-9))
        ext = grid.x_lo + h * np.arange(n + J)
        dist = np.abs(ext - 0.5)
        if np.min(dist) < 1e-12:
            raise ValueError(f"grid with n={n} touches the singularity at 1/2")
        fv = dist ** (-f_exp)
        # forward window: g[i] = max(fv[i .. i+J])
        g = maximum_filter1d(fv, size=J + 1, origin=-((J + 1) // 2), mode="nearest")[:n]
        maxima.append(float(g.max()))
        masses.append(float(h * np.sum(g ** p)))
    return DivergenceTable(float(p), float(delta), [int(n) for n in grid_ns], maxima, masses,
                           min_growth)
