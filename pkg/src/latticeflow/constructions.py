"""New semigroups from old ones: similarity, rescaling, products; and condition (R) witnesses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .funcspace import TOL_ARITH, TOL_ZERO, ClosedForm, GridSpec, RealFunction
from .ru_conv import FunctionFamily
from .semigroups import LAW_TOL, SemigroupOperator

__all__ = [
    "LatticeIso",
    "IsoError",
    "CommutationError",
    "ConditionRResult",
    "identity_iso",
    "dilation_iso",
    "scaling_iso",
    "similar",
    "rescale",
    "product",
    "commutation_defects",
    "condition_r_witness",
]


class IsoError(ValueError):
    pass


class CommutationError(ValueError):
    def __init__(self, message, defects):
        super().__init__(message)
        self.defects = defects


def _lazy_max(f, g):
    return ClosedForm(lambda x: np.maximum(f(x), g(x)), f"({f.label} v {g.label})")


@dataclass(frozen=True)
class LatticeIso:
    """Lattice isomorphism given by a forward map and its inverse."""
    forward: Callable[[RealFunction], RealFunction]
    inverse: Callable[[RealFunction], RealFunction]
    label: str = "V"

    def validate(self, corpus: Sequence[RealFunction], grid: GridSpec,
                 tol: float = TOL_ARITH) -> float:
        """Check invertibility, preservation of sup, and positivity on the corpus.

        Returns the worst defect; raises :class:`IsoError` above ``tol``.
        """
        worst = 0.0
        for f in corpus:
            fv = f.on(grid)
            worst = max(worst, float(np.max(np.abs(self.inverse(self.forward(f)).on(grid) - fv))))
            if np.all(fv >= 0):
                for m in (self.forward, self.inverse):
                    worst = max(worst, float(-np.min(m(f).on(grid))))
            for g in corpus:
                lhs = self.forward(_lazy_max(f, g)).on(grid)
                rhs = _lazy_max(self.forward(f), self.forward(g)).on(grid)
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        if worst > tol:
            raise IsoError(f"{self.label} fails the lattice-isomorphism checks (defect {worst:.3e})")
        return worst


def identity_iso() -> LatticeIso:
    return LatticeIso(lambda f: f, lambda f: f, "id")


def dilation_iso(c: float) -> LatticeIso:
    """``(Vf)(x) = f(c x)`` with inverse ``g -> g(x / c)``."""
    if c == 0:
        raise ValueError("dilation factor must be nonzero")
    return LatticeIso(lambda f: ClosedForm(lambda x: f(c * x), f"{f.label}({c:g}x)"),
                      lambda g: ClosedForm(lambda x: g(x / c), f"{g.label}(x/{c:g})"),
                      f"dil({c:g})")


def scaling_iso(lam: float) -> LatticeIso:
    if lam <= 0:
        raise ValueError("scaling must be positive to preserve order")
    return LatticeIso(lambda f: lam * f, lambda g: (1.0 / lam) * g, f"scale({lam:g})")


def similar(S: SemigroupOperator, V: LatticeIso, corpus: Sequence[RealFunction] | None = None,
            grid: GridSpec | None = None) -> SemigroupOperator:
    """``t -> V^-1 T(t) V``.  With a corpus and grid, ``V`` is validated first."""
    if corpus is not None:
        if grid is None:
            raise ValueError("validating the isomorphism needs a grid")
        V.validate(corpus, grid)
    return SemigroupOperator(lambda t, f: V.inverse(S.apply(t, V.forward(f))), "composed",
                             f"{V.label}^-1 {S.label} {V.label}", materialise=S.materialise,
                             meta={"construction": "similar", "base": S.label, "iso": V.label})


def rescale(S: SemigroupOperator, mu: float, alpha: float) -> SemigroupOperator:
    """``S(t) = exp(mu t) T(alpha t)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    def apply(t, f):
        out = S.apply(alpha * t, f)
        return out if mu == 0 else math.exp(mu * t) * out

    reach = None if S.reach(1.0) is None else (lambda t: S.reach(alpha * t))
    return SemigroupOperator(apply, "composed", f"e^({mu:g}t){S.label}({alpha:g}t)", reach=reach,
                             materialise=S.materialise,
                             meta={"construction": "rescale", "base": S.label, "mu": mu,
                                   "alpha": alpha})


def commutation_defects(S: SemigroupOperator, R: SemigroupOperator, corpus: Sequence[RealFunction],
                        pairs: Sequence[tuple[float, float]], grid: GridSpec) -> list:
    """``sup |S(t)R(s)f - R(s)S(t)f|`` on the grid for every ``f`` and ``(s, t)``."""
    out = []
    for f in corpus:
        for s, t in pairs:
            a = S.apply(t, R.apply(s, f)).on(grid)
            b = R.apply(s, S.apply(t, f)).on(grid)
            out.append((f.label, float(s), float(t), float(np.max(np.abs(a - b)))))
    return out


def product(S: SemigroupOperator, R: SemigroupOperator, corpus: Sequence[RealFunction],
            commute_check_times: Sequence[tuple[float, float]], grid: GridSpec,
            law_tol: float = LAW_TOL) -> SemigroupOperator:
    """``t -> S(t) R(t)``, built only if the two commute on the corpus."""
    defects = commutation_defects(S, R, corpus, commute_check_times, grid)
    worst = max((d[-1] for d in defects), default=0.0)
    if worst > law_tol:
        raise CommutationError(f"{S.label} and {R.label} do not commute (defect {worst:.3e})",
                               defects)
    rs, rr = S.reach(1.0), R.reach(1.0)
    reach = None if rs is None or rr is None else (lambda t: S.reach(t) + R.reach(t))
    return SemigroupOperator(lambda t, f: S.apply(t, R.apply(t, f)), "composed",
                             f"{S.label}.{R.label}", reach=reach,
                             materialise=S.materialise or R.materialise,
                             meta={"construction": "product", "left": S.label, "right": R.label,
                                   "corpus": [f.label for f in corpus],
                                   "commutation_defects": defects})


class ConditionRResult(NamedTuple):
    holds: bool
    lambdas: list | None
    bound: RealFunction | None
    evidence: list
    reason: str


def _ratio_norm(uv, bv) -> float:
    mask = bv > 0
    return float(np.max(uv[mask] / bv[mask], initial=0.0))


def _grows(supports) -> bool:
    for (a0, b0), (a1, b1) in zip(supports, supports[1:]):
        if not (a1 <= a0 and b1 >= b0 and (a1 < a0 or b1 > b0)):
            return False
    return True


def condition_r_witness(family, grid: GridSpec,
                        candidate_bound: RealFunction | None = None) -> ConditionRResult:
    """Scalars making a positive family order bounded, or evidence that none exist.

    With ``candidate_bound`` ``b``: ``lambda_n = 1 / max(1, ||u_n||_b)`` and
    ``lambda_n u_n <= b`` is verified.  Without one, a compactly supported
    family with strictly growing supports yields, for each member taken as
    a bound, a later member and a point where that member is positive and
    the bound vanishes, so no positive multiple fits under it.

    ``family`` is a list or a sequence :class:`FunctionFamily`; the latter
    also supplies a member beyond the last for the final bound.
    """
    if isinstance(family, FunctionFamily):
        members = [family.member(k) for k in family.indices()]
        beyond = family.member(int(family.indices()[-1]) + 1)
    else:
        members, beyond = list(family), None
    if not members:
        raise ValueError("empty family")
    for u in members:
        if np.any(u.on(grid) < -TOL_ZERO):
            raise ValueError(f"{u.label} is not positive on the grid")

    if candidate_bound is not None:
        bv = candidate_bound.on(grid)
        if np.any(bv <= 0):
            for u in members:
                if np.any((u.on(grid) > TOL_ZERO) & (bv <= 0)):
                    return ConditionRResult(False, None, candidate_bound, [],
                                            f"{u.label} is positive where the candidate vanishes")
        lambdas = [1.0 / max(1.0, _ratio_norm(u.on(grid), bv)) for u in members]
        ok = all(np.all(lam * u.on(grid) <= bv + TOL_ARITH) for lam, u in zip(lambdas, members))
        return ConditionRResult(ok, lambdas, candidate_bound, [],
                                "verified" if ok else "scaled members exceed the candidate")

    supports = [u.support for u in members]
    if any(s is None for s in supports) or not _grows(supports):
        return ConditionRResult(False, None, None, [],
                                "no candidate bound and no growing compact supports")

    x = grid.points()
    pool = members + ([beyond] if beyond is not None else [])
    evidence = []
    for k, b in enumerate(members):
        bv = b.on(grid)
        found = None
        for n in range(k + 1, len(pool)):
            uv = pool[n].on(grid)
            mask = (uv > TOL_ZERO) & (bv <= TOL_ZERO)
            if mask.any():
                i = int(np.flatnonzero(mask)[np.argmax(uv[mask])])
                found = {"bound_index": k + 1, "index": n + 1, "x": float(x[i]),
                         "value": float(uv[i]), "bound_value": float(bv[i])}
                break
        if found is None:
            found = {"bound_index": k + 1, "index": None, "x": None, "value": None,
                     "bound_value": None}
        evidence.append(found)
    return ConditionRResult(False, None, None, evidence, "supports grow past every member")
