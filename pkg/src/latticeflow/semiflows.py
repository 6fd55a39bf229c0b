"""Semiflows on the line, their Koopman semigroups, and the LPA regulator construction."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .funcspace import (TOL_ARITH, ClosedForm, GridSpec, PiecewiseAffineFunction, RealFunction,
                        Sampled)
from .ru_conv import (EpsRow, FunctionFamily, RegulatorReport, _check_eps, _num, time_samples,
                      verify_ru_convergence)
from .semigroups import SemigroupOperator

__all__ = [
    "FLOW_TOL",
    "Semiflow",
    "SemiflowLawError",
    "FlowLawReport",
    "SegmentRecord",
    "LpaRegulatorTrace",
    "shift",
    "decay",
    "poly_drift",
    "compose",
    "semiflow",
    "check_semiflow_laws",
    "check_criterion_C",
    "check_criterion_LipUC",
    "make_koopman",
    "max_over_orbit",
    "build_lpa_regulator",
]

FLOW_TOL = 1e-9


@dataclass(frozen=True)
class Semiflow:
    """``phi(t, x)`` for ``t >= 0``; ``phi`` must broadcast over arrays."""
    phi: Callable[[float, np.ndarray], np.ndarray]
    label: str = "phi"
    horizon: float = math.inf
    name: str | None = None

    def __call__(self, t, x):
        return np.asarray(self.phi(t, np.asarray(x, dtype=float)), dtype=float)


def shift() -> Semiflow:
    return Semiflow(lambda t, x: x + t, "t+x", name="shift")


def decay(rate: float = 1.0) -> Semiflow:
    return Semiflow(lambda t, x: np.exp(-rate * t) * x, f"exp(-{rate:g}t)x",
                    name=f"decay({rate!r})")


def poly_drift(k: float = 3.0) -> Semiflow:
    """Flow of ``x' = -sign(x) |x|^k``; ``k = 1`` is :func:`decay`.

    For ``k > 1``, ``phi(t, x) = x / (1 + (k-1) t |x|^(k-1))^(1/(k-1))``.
    Displacement grows like ``|x|`` for large ``|x|`` at any fixed ``t > 0``,
    so the flow fails the ``1 + |x|`` criterion on widening windows.
    """
    if k < 1:
        raise ValueError("poly_drift needs k >= 1")
    if k == 1:
        f = decay(1.0)
        return Semiflow(f.phi, "poly_drift(1)", name="poly_drift(1.0)")
    q = k - 1.0

    def phi(t, x):
        return x / (1.0 + q * t * np.abs(x) ** q) ** (1.0 / q)

    return Semiflow(phi, f"poly_drift({k:g})", name=f"poly_drift({k!r})")


def compose(a: Semiflow, b: Semiflow) -> Semiflow:
    """``phi(t, x) = a(t, b(t, x))``; a semiflow only when ``a`` and ``b`` commute."""
    name = None if a.name is None or b.name is None else f"compose({a.name},{b.name})"
    return Semiflow(lambda t, x: a(t, b(t, x)), f"{a.label}o{b.label}",
                    min(a.horizon, b.horizon), name)


def _split_args(s: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    out.append(cur)
    return [o.strip() for o in out if o.strip()]


def semiflow(expr: str) -> Semiflow:
    """Parse ``"shift"``, ``"decay(r)"``, ``"poly_drift(k)"`` or ``"compose(a,b)"``."""
    m = re.match(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$", expr)
    if not m:
        raise ValueError(f"cannot parse semiflow {expr!r}")
    head, args = m.group(1), _split_args(m.group(2) or "")
    if head == "shift" and not args:
        return shift()
    if head == "decay" and len(args) <= 1:
        return decay(*(float(a) for a in args))
    if head == "poly_drift" and len(args) <= 1:
        return poly_drift(*(float(a) for a in args))
    if head == "compose" and len(args) == 2:
        return compose(semiflow(args[0]), semiflow(args[1]))
    raise ValueError(f"unknown semiflow {expr!r}")


class SemiflowLawError(ValueError):
    pass


class FlowLawReport(NamedTuple):
    identity_defect: float
    composition_defect: float
    flow_tol: float

    @property
    def passes(self) -> bool:
        return self.identity_defect <= self.flow_tol and self.composition_defect <= self.flow_tol


def check_semiflow_laws(phi: Semiflow, grid: GridSpec, time_samples: Sequence[float],
                        flow_tol: float = FLOW_TOL) -> FlowLawReport:
    """Max defects of ``phi(0,x) = x`` and ``phi(t+s,x) = phi(t,phi(s,x))``."""
    ts = np.asarray(list(time_samples), dtype=float)
    if np.any(ts < 0) or np.any(2 * ts > phi.horizon):
        raise ValueError("time samples must lie in [0, horizon/2]")
    x = grid.points()
    ident = float(np.max(np.abs(phi(0.0, x) - x)))
    comp = 0.0
    for s in ts:
        ps = phi(s, x)
        for t in ts:
            comp = max(comp, float(np.max(np.abs(phi(t + s, x) - phi(t, ps)))))
    if not (math.isfinite(ident) and math.isfinite(comp)):
        raise ValueError(f"{phi.label} is not finite on the grid")
    return FlowLawReport(ident, comp, flow_tol)


def _displacement_family(phi, t_hi, n_samples):
    return FunctionFamily.continuum(
        lambda h: ClosedForm(lambda x: phi(h, x), f"phi({h:g},.)"),
        t_hi=t_hi, n_samples=n_samples, label=f"{phi.label}(h,.)")


def check_criterion_C(phi: Semiflow, u: RealFunction, eps_list: Sequence[float], grid: GridSpec,
                      t_hi: float = 1.0, n_samples: int = 256,
                      slack: float = TOL_ARITH) -> RegulatorReport:
    """Largest sampled ``delta`` with ``|phi(h,x) - x| <= eps * u(x)`` for sampled ``h <= delta``."""
    if np.any(u.on(grid) <= 0):
        raise ValueError(f"{u.label} must be strictly positive on the grid")
    ident = ClosedForm(lambda x: x, "x")
    return verify_ru_convergence(_displacement_family(phi, min(t_hi, phi.horizon), n_samples),
                                 ident, u, eps_list, grid, slack)


def check_criterion_LipUC(phi: Semiflow, eps_list: Sequence[float], grid: GridSpec,
                          t_hi: float = 1.0, n_samples: int = 256,
                          slack: float = TOL_ARITH) -> RegulatorReport:
    """:func:`check_criterion_C` with the order unit ``1 + |x|``."""
    u = ClosedForm(lambda x: 1.0 + np.abs(x), "1+|x|", name="1+|x|")
    return check_criterion_C(phi, u, eps_list, grid, t_hi, n_samples, slack)


_LAW_GRID = GridSpec(-10.0, 10.0, 201)
_LAW_TIMES = (0.0, 0.05, 0.1, 0.25, 0.5)


def make_koopman(phi: Semiflow, grid: GridSpec = _LAW_GRID,
                 law_times: Sequence[float] = _LAW_TIMES,
                 flow_tol: float = FLOW_TOL) -> SemigroupOperator:
    """Koopman semigroup ``(T(t)f)(x) = f(phi(t, x))``; the flow laws are checked first."""
    rep = check_semiflow_laws(phi, grid, law_times, flow_tol)
    if not rep.passes:
        raise SemiflowLawError(f"{phi.label} is not a semiflow on the check grid "
                               f"(identity {rep.identity_defect:.3e}, "
                               f"composition {rep.composition_defect:.3e})")

    def apply(t, f):
        return ClosedForm(lambda x: f(phi(t, x)), f"{f.label}o{phi.label}[{t:g}]")

    return SemigroupOperator(apply, "koopman", f"T_[{phi.label}]", meta={"semiflow": phi.name})


def max_over_orbit(phi: Semiflow, f: RealFunction, s: float, grid: GridSpec,
                   t_samples: int = 64) -> Sampled:
    """``g(x) = max_{t in [0, s]} |f(phi(t, x))|`` over ``t_samples`` equally spaced times."""
    if s < 0 or s > phi.horizon:
        raise ValueError("s must lie in [0, horizon]")
    x = grid.points()
    g = np.abs(f.on(x))
    if s > 0:
        for t in np.linspace(0.0, s, max(t_samples, 2)):
            g = np.maximum(g, np.abs(f.on(phi(t, x))))
    return Sampled(grid, g, f"g[{f.label},{s:g}]")


# ---------------------------------------------------------------------------
# LPA regulator construction

class SegmentRecord(NamedTuple):
    lo: float
    hi: float
    slope: float
    delta_n: float
    M_n: float
    s_n: float
    c_n: float
    virtual: bool


@dataclass
class LpaRegulatorTrace:
    """Per-segment constants and the resulting regulator ``v``.

    ``knots``/``d`` give the values of ``v`` at the window knots; ``rows``
    hold, per eps, the time ``delta`` up to which the bound was verified and
    its worst slack.
    """
    phi: Semiflow
    f: PiecewiseAffineFunction
    u: RealFunction
    segments: list[SegmentRecord]
    knots: np.ndarray
    d: np.ndarray
    v: PiecewiseAffineFunction
    rows: list[EpsRow] = field(default_factory=list)
    verified: bool = False
    cross_check: RegulatorReport | None = None

    def to_dict(self) -> dict:
        return {
            "semiflow": self.phi.name or self.phi.label,
            "f": self.f.to_json(),
            "u": self.u.label,
            "segments": [r._asdict() for r in self.segments],
            "knots": self.knots.tolist(),
            "d": self.d.tolist(),
            "v": self.v.to_json(),
            "eps_schedule": [{"eps": r.eps, "delta": _num(r.threshold),
                              "worst_slack": r.worst_slack} for r in self.rows],
            "verified": self.verified,
            "cross_check": None if self.cross_check is None else self.cross_check.to_dict(),
        }


def _segment_points(lo, hi, x):
    inside = x[(x > lo) & (x < hi)]
    return np.concatenate([np.linspace(lo, hi, 65), inside])


def _largest_time(ok: Callable[[float], bool], probes: int = 32, bisections: int = 20,
                  t_floor: float = 1e-8, t_cap: float = 1.0) -> float:
    ts = np.geomspace(t_floor, t_cap, probes)
    if not ok(ts[0]):
        return 0.0
    k = 0
    while k + 1 < ts.size and ok(ts[k + 1]):
        k += 1
    if k + 1 == ts.size:
        return float(ts[-1])
    lo, hi = ts[k], ts[k + 1]
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def build_lpa_regulator(phi: Semiflow, f: PiecewiseAffineFunction, u: RealFunction,
                        grid: GridSpec, eps_list: Sequence[float] = (0.5, 0.1),
                        n_time: int = 256, c_time_samples: int = 64,
                        slack: float = TOL_ARITH) -> LpaRegulatorTrace:
    """Construct a piecewise-affine regulator ``v`` for ``T_phi(h) f -> f`` and verify it.

    ``u`` must satisfy ``|phi(h,x) - x| <= eps * u(x)`` for small ``h``; this
    is checked first for every ``eps/4``.  Window ends act as knots, and the
    segments beyond them are mirrored copies of the edge segments carrying
    the affine extension of ``f``.  For each eps the final inequality
    ``|f(phi(h,x)) - f(x)| <= eps * v(x) + slack`` is checked on the grid for
    every sampled ``h <= delta(eps) = min(delta_C(eps/4), eps/2)``.
    """
    if not isinstance(f, PiecewiseAffineFunction):
        raise TypeError("f must be piecewise affine")
    eps = _check_eps(eps_list)
    if np.any(eps >= 1):
        raise ValueError("eps values must lie in (0, 1)")
    cert = check_criterion_C(phi, u, list(eps / 4), grid, n_samples=n_time, slack=0.0)
    if not cert.converged:
        raise ValueError(f"{u.label} does not certify the displacement criterion for {phi.label}")

    x = grid.points()
    kin = f.knots[(f.knots > grid.x_lo) & (f.knots < grid.x_hi)]
    r = np.concatenate([[grid.x_lo], kin, [grid.x_hi]])
    K = r.size - 1
    wl, wr = r[1] - r[0], r[-1] - r[-2]
    edges = np.concatenate([[r[0] - 2 * wl, r[0] - wl], r, [r[-1] + wr, r[-1] + 2 * wr]])
    nseg = edges.size - 1                          # real segment n has index n + 2
    widths = np.diff(edges)
    lo_e, hi_e = edges[:-1], edges[1:]
    slopes = f.slopes[np.searchsorted(f.knots, 0.5 * (lo_e + hi_e), side="left")]

    records = []
    for e in range(nseg):
        nb = widths[max(e - 1, 0):min(e + 2, nseg)]
        delta_n = float(nb.min() / 2)
        pts = _segment_points(lo_e[e], hi_e[e], x)
        upts = u.on(pts)
        M_n = float(upts.max())
        target = delta_n / max(M_n, 1.0) * upts

        def ok(t, pts=pts, target=target):
            return bool(np.all(np.abs(phi(t, pts) - pts) <= target))

        s_n = _largest_time(ok)
        if s_n <= 0:
            raise ValueError(f"no positive time keeps {phi.label} within delta_n on "
                             f"[{lo_e[e]:g}, {hi_e[e]:g}]")
        if phi.horizon < 1 + s_n:
            raise ValueError(f"horizon {phi.horizon} < 1 + s_n = {1 + s_n}")
        base = f(phi(s_n, pts))
        osc = 0.0
        for t in np.linspace(0.0, 1.0, c_time_samples):
            osc = max(osc, float(np.max(np.abs(f(phi(s_n + t, pts)) - base))))
        records.append(SegmentRecord(float(lo_e[e]), float(hi_e[e]), float(slopes[e]), delta_n,
                                     M_n, s_n, osc / s_n, e < 2 or e >= K + 2))

    a = np.array([rec.slope for rec in records])
    c = np.array([rec.c_n for rec in records])
    d = np.empty(K + 1)
    for n in range(K + 1):
        e = n + 2
        nb = range(e - 1, e + 2)
        d[n] = max(records[e].M_n, 1.0) * max(
            max(abs(a[i]), abs(a[i] - a[e]), c[i]) for i in nb)
    v = PiecewiseAffineFunction.from_values(r, d, label=f"v[{f.label},{phi.label}]")

    fx = f.on(x)
    vx = v.on(x)
    ts = time_samples(0.0, 1.0, n_time)
    rows = []
    for j, e_ in enumerate(eps):
        delta = min(cert.rows[j].threshold, e_ / 2)
        worst = -math.inf
        for h in np.concatenate([ts[(ts > 0) & (ts <= delta)], [delta]]):
            worst = max(worst, float(np.max(np.abs(f(phi(h, x)) - fx) - e_ * vx)) - slack)
        rows.append(EpsRow(float(e_), float(delta), worst))
    verified = all(r_.worst_slack <= 0 for r_ in rows)

    fam = FunctionFamily.continuum(lambda h: ClosedForm(lambda y: f(phi(h, y)), "Tf"),
                                   t_hi=1.0, n_samples=n_time)
    cross = verify_ru_convergence(fam, f, v, eps, grid, slack)
    return LpaRegulatorTrace(phi, f, u, records, r, d, v, rows, verified, cross)
