"""Relative uniform convergence with an explicit regulator.

A family ``x_k`` converges relatively uniformly to ``x`` with regulator
``u >= 0`` when for every ``eps`` the inequality ``|x_k - x| <= eps * u``
holds for all sufficiently late members.  Here "late" means large index for
sequences and small parameter ``t`` for continuum families, and every
quantifier is checked on the sampled members only.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._parallel import max_threads, pmap
from .funcspace import (TOL_ARITH, GridSpec, PiecewiseAffineFunction, RealFunction,
                        cone_flags, one)

__all__ = [
    "FunctionFamily",
    "EpsRow",
    "RegulatorReport",
    "CcVerdict",
    "LpaApproximation",
    "time_samples",
    "verify_ru_convergence",
    "check_cc_characterization",
    "cc_regulator",
    "lpa_approximate",
]

DEFAULT_TIME_SAMPLES = 256
TIME_FLOOR = 1e-6  # smallest positive sample, relative to t_hi


def time_samples(t_lo: float, t_hi: float, n: int = DEFAULT_TIME_SAMPLES) -> np.ndarray:
    """Ascending samples of ``[t_lo, t_hi]`` including both ends, log-spaced toward ``t_lo``.

    When ``t_lo == 0`` the positive part is ``geomspace(TIME_FLOOR * t_hi, t_hi)``.
    """
    if not 0 <= t_lo < t_hi:
        raise ValueError(f"need 0 <= t_lo < t_hi, got [{t_lo}, {t_hi}]")
    if n < 2:
        raise ValueError("need at least two time samples")
    if t_lo == 0:
        return np.concatenate([[0.0], np.geomspace(TIME_FLOOR * t_hi, t_hi, n - 1)])
    return np.geomspace(t_lo, t_hi, n)


@dataclass(frozen=True)
class FunctionFamily:
    """Indexed family of functions.

    ``kind="sequence"`` uses indices ``1..n_max``; ``kind="continuum"`` uses
    :func:`time_samples` of ``[t_lo, t_hi]``, converging as ``t`` decreases.
    """

    member: Callable[[float], RealFunction]
    kind: str = "sequence"
    n_max: int = 100
    t_lo: float = 0.0
    t_hi: float = 1.0
    n_samples: int = DEFAULT_TIME_SAMPLES
    label: str = "family"

    def __post_init__(self):
        if self.kind not in ("sequence", "continuum"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "sequence" and self.n_max < 1:
            raise ValueError("n_max must be positive")
        if self.kind == "continuum":
            time_samples(self.t_lo, self.t_hi, self.n_samples)

    @classmethod
    def sequence(cls, member, n_max: int, label: str = "x_n") -> "FunctionFamily":
        return cls(member, "sequence", n_max=n_max, label=label)

    @classmethod
    def continuum(cls, member, t_hi: float, t_lo: float = 0.0,
                  n_samples: int = DEFAULT_TIME_SAMPLES, label: str = "x_t") -> "FunctionFamily":
        return cls(member, "continuum", t_lo=t_lo, t_hi=t_hi, n_samples=n_samples, label=label)

    def indices(self) -> np.ndarray:
        """Sampled indices in ascending order (for continuum: ascending ``t``)."""
        if self.kind == "sequence":
            return np.arange(1, self.n_max + 1)
        return time_samples(self.t_lo, self.t_hi, self.n_samples)

    def extension(self, level: int = 1) -> np.ndarray:
        """Extra indices further toward the limit than the checked range.

        Level ``k`` covers ``n_max*2**(k-1) < n <= n_max*2**k`` for sequences
        and ``[floor*1e-3k, floor*1e-3(k-1))`` below the smallest positive
        sample ``floor`` for continuum families.
        """
        if level < 1:
            raise ValueError("extension level starts at 1")
        if self.kind == "sequence":
            return np.arange(self.n_max * 2 ** (level - 1) + 1, self.n_max * 2 ** level + 1)
        t = self.indices()
        floor = t[t > 0][0] if np.any(t > 0) else self.t_hi
        hi = floor * 1e-3 ** (level - 1)
        return np.geomspace(hi * 1e-3, hi, 16)[:-1]

    def checked_range(self) -> list:
        if self.kind == "sequence":
            return [1, self.n_max]
        t = self.indices()
        return [float(t[0]), float(t[-1])]


class EpsRow(NamedTuple):
    """One row of an eps-schedule.

    ``threshold`` is the first index ``n0`` (sequence) or the largest time
    ``delta`` (continuum) from which the bound holds; ``None`` if none does.
    ``worst_slack`` is ``max(|x_k - x| - eps*u - slack)`` over the accepted
    members (``<= 0`` whenever ``threshold`` is not ``None``).
    """
    eps: float
    threshold: float | int | None
    worst_slack: float


def _num(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if math.isinf(v):
        return "inf"
    return v


@dataclass
class RegulatorReport:
    converged: bool
    regulator: RealFunction
    rows: list[EpsRow]
    grid: GridSpec
    kind: str = "sequence"
    checked_range: list = field(default_factory=list)
    slack: float = TOL_ARITH

    @property
    def eps_schedule(self) -> list[EpsRow]:
        return self.rows

    def threshold(self, eps: float):
        for r in self.rows:
            if math.isclose(r.eps, eps, rel_tol=1e-12):
                return r.threshold
        raise KeyError(eps)

    def to_dict(self) -> dict:
        try:
            reg = self.regulator.to_json()
        except TypeError:
            reg = {"repr": "unserialisable"}
        reg["label"] = self.regulator.label
        return {
            "converged": self.converged,
            "kind": self.kind,
            "regulator": reg,
            "grid": self.grid.to_dict(),
            "checked_range": self.checked_range,
            "slack": self.slack,
            "eps_schedule": [
                {"eps": r.eps, "threshold": _num(r.threshold), "worst_slack": r.worst_slack}
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "threshold"])
        for r in self.rows:
            t = _num(r.threshold)
            w.writerow([repr(r.eps), "" if t is None else (t if isinstance(t, str) else repr(t))])
        return buf.getvalue()


def _check_eps(eps_list) -> np.ndarray:
    eps = np.asarray(list(eps_list), dtype=float)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be strictly decreasing positive numbers")
    return eps


def verify_ru_convergence(family: FunctionFamily, limit: RealFunction, regulator: RealFunction,
                          eps_list: Sequence[float], grid: GridSpec,
                          slack: float = TOL_ARITH) -> RegulatorReport:
    """Find, for each eps, where ``|member - limit| <= eps * regulator + slack`` starts to hold.

    Members are scanned from the limit end and the scan stops once every
    eps has met a failure, so ``worst_slack`` covers the accepted members.

    Sequences report the smallest ``n0`` such that every checked ``n >= n0``
    passes.  Continuum families report the largest sampled ``delta`` such
    that every sampled ``t in [0, delta]`` passes (``inf`` when every sampled
    member coincides with the limit).
    """
    eps = _check_eps(eps_list)
    reg = regulator.on(grid)
    if np.any(reg < 0):
        raise ValueError(f"regulator {regulator.label} is negative on the grid")
    lim = limit.on(grid)
    idx = family.indices()

    def excess(k):
        d = np.abs(family.member(k).on(grid) - lim)
        return (d[None, :] - eps[:, None] * reg[None, :]).max(axis=1) - slack, float(d.max())

    # Scan from the limit end outward; once every eps has a failure the
    # remaining members cannot change any threshold.
    seq = family.kind == "sequence"
    order = idx[::-1] if seq else idx
    chunk = max(8, 4 * max_threads())
    E_parts, d_parts = [], []
    failed = np.zeros(eps.size, dtype=bool)
    for start in range(0, order.size, chunk):
        out = pmap(excess, order[start:start + chunk])
        E_parts.append(np.array([o[0] for o in out]))
        d_parts.append(np.array([o[1] for o in out]))
        failed |= (E_parts[-1] > 0).any(axis=0)
        if failed.all():
            break
    E = np.concatenate(E_parts)                # (scanned members, eps), limit end first
    dmax = np.concatenate(d_parts)
    scanned = order[:E.shape[0]]
    passed = E <= 0

    rows = []
    for j, e in enumerate(eps):
        p = passed[:, j]
        fails = np.flatnonzero(~p)
        stop = fails[0] if fails.size else scanned.size
        if seq:
            if stop == 0:
                rows.append(EpsRow(float(e), None, float(E[:, j].max())))
                continue
            rows.append(EpsRow(float(e), int(scanned[stop - 1]), float(E[:stop, j].max())))
        else:
            if scanned.size == idx.size and np.all(dmax == 0):
                rows.append(EpsRow(float(e), math.inf, float(E[:, j].max())))
                continue
            positive = scanned[:stop] > 0
            if stop == 0 or not positive.any():
                rows.append(EpsRow(float(e), None, float(E[:, j].max())))
                continue
            rows.append(EpsRow(float(e), float(scanned[stop - 1]), float(E[:stop, j].max())))
    converged = all(r.threshold is not None for r in rows)
    return RegulatorReport(converged, regulator, rows, grid, family.kind,
                           family.checked_range(), slack)


class CcVerdict(NamedTuple):
    uniform_conv: bool
    common_support: tuple[float, float] | None
    verdict: bool
    report: RegulatorReport


def _support_of(f: RealFunction, grid: GridSpec):
    if f.support is None:
        raise ValueError(f"{f.label} carries no compact-support flag")
    cone_flags(f, grid)
    return f.support


def _hull(sups):
    sups = [s for s in sups if s is not None]
    return (min(s[0] for s in sups), max(s[1] for s in sups))


def check_cc_characterization(family: FunctionFamily, limit: RealFunction, grid: GridSpec,
                              eps_list: Sequence[float] = (0.5, 0.25, 0.1),
                              slack: float = TOL_ARITH, max_ratio: float = 0.75) -> CcVerdict:
    """Decide ru-convergence in the compactly supported functions.

    Convergence there is uniform convergence plus eventual supports inside
    one compact set.  ``H1`` is the hull of the supports of the late members
    and the limit; ``H2`` and ``H3`` add two successive extensions of the
    family toward its limit.  The supports count as bounded when the hull
    stops growing (by more than one grid spacing) or its growth shrinks at
    least geometrically (``g3 <= max_ratio * g2``); the common support is
    then ``H3`` widened by the geometric remainder, and must fit the window.
    """
    lim_sup = _support_of(limit, grid)
    report = verify_ru_convergence(family, limit, one(), eps_list, grid, slack)
    idx = family.indices()

    last = report.rows[-1].threshold
    if last is None:
        tail = idx
    elif family.kind == "sequence":
        tail = idx[idx >= last]
    else:
        tail = idx[idx <= last]
    h1 = _hull([lim_sup] + [_support_of(family.member(k), grid) for k in tail])
    h2 = _hull([h1] + [_support_of(family.member(k), grid) for k in family.extension(1)])
    h3 = _hull([h2] + [_support_of(family.member(k), grid) for k in family.extension(2)])

    tol = grid.spacing
    common = None
    g2 = (h1[0] - h2[0], h2[1] - h1[1])
    g3 = (h2[0] - h3[0], h3[1] - h2[1])
    bounded = True
    pad = [0.0, 0.0]
    for side in (0, 1):
        if g3[side] <= tol and g2[side] <= tol:
            continue
        if g2[side] > 0 and g3[side] <= max_ratio * g2[side]:
            r = g3[side] / g2[side]
            pad[side] = g3[side] * r / (1.0 - r)
        else:
            bounded = False
    if bounded:
        cand = (h3[0] - pad[0], h3[1] + pad[1])
        if grid.x_lo <= cand[0] and cand[1] <= grid.x_hi:
            common = cand
    return CcVerdict(report.converged, common, report.converged and common is not None, report)


def cc_regulator(support: tuple[float, float], ramp: float = 1.0) -> PiecewiseAffineFunction:
    """Positive compactly supported function equal to 1 on ``support``."""
    a, b = support
    if not b >= a:
        raise ValueError("empty support interval")
    if b == a:
        knots, vals = [a - ramp, a, a + ramp], [0.0, 1.0, 0.0]
    else:
        knots, vals = [a - ramp, a, b, b + ramp], [0.0, 1.0, 1.0, 0.0]
    return PiecewiseAffineFunction.from_values(knots, vals, 0.0, 0.0, label=f"1_[{a:g},{b:g}]",
                                               support=(a - ramp, b + ramp))


class LpaApproximation(NamedTuple):
    pa: PiecewiseAffineFunction
    error: float


def lpa_approximate(f: RealFunction, knot_budget: int, grid: GridSpec) -> LpaApproximation:
    """Interpolate ``f`` at ``knot_budget`` equally spaced knots across the window."""
    if knot_budget < 2:
        raise ValueError("knot budget must be at least 2")
    knots = np.linspace(grid.x_lo, grid.x_hi, knot_budget)
    pa = PiecewiseAffineFunction.from_values(knots, f.on(knots), label=f"lpa[{f.label}]")
    err = float(np.max(np.abs(f.on(grid) - pa.on(grid))))
    return LpaApproximation(pa, err)
