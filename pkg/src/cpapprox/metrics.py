"""Distances between finitely supported distributions on the line.

Every distance comes back as a :class:`MetricResult` carrying a certified
bracket.  Truncated mass (``dropped_mass``) is not redistributed; it
widens the bracket instead.

Neighbourhoods are closed throughout: ``X^eps = {y : dist(y, X) <= eps}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import dinic_transport, interval_transport
from .lattice import LatticeDistribution, current_limits, snap_tol, union_atoms

DEFAULT_LEVY_TOL = 1e-10
DEFAULT_PROKHOROV_TOL = 1e-9
FEASIBILITY_SLACK = 1e-13


class FlowCapExceeded(RuntimeError):
    """The bipartite flow problem is larger than the configured cap."""


@dataclass(frozen=True)
class MetricResult:
    value: float
    lower: float
    upper: float
    method: str
    iterations: int = 0

    def __post_init__(self):
        for name in ("value", "lower", "upper"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.lower <= self.value <= self.upper:
            raise ValueError(f"bracket [{self.lower}, {self.upper}] does not contain {self.value}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class CouplingWitness:
    """Sub-coupling realising the Prokhorov upper bound.

    ``pairs`` holds ``(index in F support, index in G support, mass)``.
    """

    pairs: list[tuple[int, int, float]] = field(repr=False)
    unmatched: float
    epsilon: float


def _slack(F, G) -> float:
    return F.dropped_mass + G.dropped_mass


def _bracket(value, slack, method, iterations=0, lo=None, hi=None, cap=1.0) -> MetricResult:
    value = min(max(value, 0.0), cap)
    lo = value if lo is None else lo
    hi = value if hi is None else hi
    return MetricResult(value, max(0.0, lo - slack), min(cap, hi + slack), method, iterations)


def total_variation(F: LatticeDistribution, G: LatticeDistribution) -> MetricResult:
    _, (a, b) = union_atoms(F, G)
    v = 0.5 * math.fsum(np.abs(a - b).tolist())
    return _bracket(v, 0.5 * _slack(F, G), "exact-sum")


def kolmogorov_distance(F: LatticeDistribution, G: LatticeDistribution) -> MetricResult:
    _, (a, b) = union_atoms(F, G)
    v = float(np.max(np.abs(np.cumsum(a) - np.cumsum(b))))
    return _bracket(v, _slack(F, G), "exact-scan")


# -- Levy ---------------------------------------------------------------------


def _cdf_at(x_sorted, cum, pts):
    k = np.searchsorted(x_sorted, pts + 1e-12 * np.maximum(1.0, np.abs(pts)), side="right")
    out = np.zeros(pts.shape)
    ok = k > 0
    out[ok] = cum[k[ok] - 1]
    return out


def _levy_ok(xf, cf, xg, cg, eps) -> bool:
    # both sides are right-continuous step functions of x, so their
    # suprema are attained at atoms of F or G or at those atoms shifted by eps
    base = np.concatenate([xf, xg])
    pts = np.concatenate([base, base - eps, base + eps])
    Fm = _cdf_at(xf, cf, pts - eps)
    Fp = _cdf_at(xf, cf, pts + eps)
    Gx = _cdf_at(xg, cg, pts)
    slack = eps + FEASIBILITY_SLACK
    return bool(np.all(Gx <= Fp + slack) and np.all(Fm <= Gx + slack))


def levy_distance(F: LatticeDistribution, G: LatticeDistribution, tol: float = DEFAULT_LEVY_TOL) -> MetricResult:
    """Levy distance by bisection on ``eps`` to absolute tolerance ``tol``."""
    xf, cf = F.atoms, np.cumsum(F.weights)
    xg, cg = G.atoms, np.cumsum(G.weights)
    s = _slack(F, G)
    if _levy_ok(xf, cf, xg, cg, 0.0):
        return _bracket(0.0, s, "bisection")
    lo, hi = 0.0, 1.0
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _levy_ok(xf, cf, xg, cg, mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return _bracket(hi, s, "bisection", it, lo=lo, hi=hi)


# -- Levy-Prokhorov -------------------------------------------------------------


def _support(F: LatticeDistribution):
    keep = F.weights > 0
    return F.atoms[keep], F.weights[keep]


def prokhorov_distance(
    F: LatticeDistribution,
    G: LatticeDistribution,
    tol: float = DEFAULT_PROKHOROV_TOL,
    method: str = "auto",
    witness: bool = False,
):
    """Levy-Prokhorov distance through the coupling characterisation.

    ``pi <= eps`` iff some sub-coupling moves at least ``max(|F|, |G|) - eps``
    mass along pairs at distance ``<= eps``.  Bisection on ``eps`` is
    followed by an exact pass over the pairwise distances inside the final
    bracket, because the transported mass is a step function of ``eps``.

    ``method`` is ``"flow"`` (Dinic max-flow, refused above the flow cap),
    ``"greedy"`` (linear-time interval transport) or ``"auto"`` (flow when
    within the cap, greedy otherwise).  With ``witness=True`` returns
    ``(MetricResult, CouplingWitness)``.
    """
    x, a = _support(F)
    y, b = _support(G)
    cap = current_limits().flow_cap
    if method == "auto":
        method = "flow" if x.size + y.size <= cap else "greedy"
    if method == "flow":
        if x.size + y.size > cap:
            raise FlowCapExceeded(f"{x.size + y.size} atoms exceed the flow cap {cap}")
        solve, label = dinic_transport, "maxflow-dinic"
    elif method == "greedy":
        solve, label = interval_transport, "interval-greedy"
    else:
        raise ValueError(f"unknown method {method!r}")

    need = max(float(a.sum()), float(b.sum()))
    calls = 0

    def moved(eps):
        nonlocal calls
        calls += 1
        return solve(x, a, y, b, eps)

    def feasible(eps):
        return moved(eps) >= need - eps - FEASIBILITY_SLACK

    span = float(max(x[-1], y[-1]) - min(x[0], y[0]))
    if feasible(0.0):
        value = 0.0
        lo = hi = 0.0
    else:
        lo, hi = 0.0, min(1.0, span)
        if not feasible(hi):
            hi = 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        value = min(hi, need - moved(lo))
        for d in _distances_between(x, y, lo, hi):
            value = min(value, max(d, need - moved(d)))
        value = max(value, lo)
    res = MetricResult(
        value,
        max(0.0, value - FEASIBILITY_SLACK - _slack(F, G)),
        min(1.0, max(value, hi) + _slack(F, G)),
        label,
        calls,
    )
    if not witness:
        return res
    total, pairs = solve(x, a, y, b, res.value, pairs=True)
    return res, CouplingWitness(pairs, need - total, res.value)


def _distances_between(x, y, lo, hi) -> list[float]:
    """Distinct values of ``|x_i - y_k|`` lying in ``(lo, hi]``."""
    found = []
    for sign in (1.0, -1.0):
        # y - x in (lo, hi]  (sign +1)   or   x - y in (lo, hi]  (sign -1)
        left = np.searchsorted(y, x + sign * (lo if sign > 0 else hi), side="right" if sign > 0 else "left")
        right = np.searchsorted(y, x + sign * (hi if sign > 0 else lo), side="right" if sign > 0 else "left")
        for i in np.flatnonzero(right > left):
            found.extend(np.abs(y[left[i] : right[i]] - x[i]).tolist())
    found.sort()
    out: list[float] = []
    for d in found:
        if not out or d - out[-1] > 1e-12 * max(1.0, d):
            out.append(d)
    return out


# -- witness sets ----------------------------------------------------------------


@dataclass(frozen=True)
class LatticeNeighborhood:
    """Closed set ``{y : dist(y, center + pitch*Z) <= halfwidth}``."""

    pitch: float
    halfwidth: float
    center: float = 0.0

    def __post_init__(self):
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise ValueError("pitch must be positive and finite")
        if not (self.halfwidth >= 0 and math.isfinite(self.halfwidth)):
            raise ValueError("halfwidth must be non-negative and finite")
        if not math.isfinite(self.center):
            raise ValueError("center must be finite")

    def expand(self, eps: float) -> "LatticeNeighborhood":
        return LatticeNeighborhood(self.pitch, self.halfwidth + eps, self.center)

    def mass(self, F: LatticeDistribution) -> float:
        return lattice_neighborhood_mass(F, self.pitch, self.halfwidth, self.center)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of closed intervals ``[lo, hi]``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        for lo, hi in ivs:
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ValueError(f"malformed interval [{lo}, {hi}]")
        object.__setattr__(self, "intervals", ivs)

    def expand(self, eps: float) -> "IntervalUnion":
        return IntervalUnion(tuple((lo - eps, hi + eps) for lo, hi in self.intervals))

    def mass(self, F: LatticeDistribution) -> float:
        x, w = _support(F)
        inside = np.zeros(x.size, dtype=bool)
        for lo, hi in self.intervals:
            inside |= (x >= lo - snap_tol(lo)) & (x <= hi + snap_tol(hi))
        return math.fsum(w[inside].tolist())


def lattice_neighborhood_mass(F: LatticeDistribution, pitch: float, halfwidth: float, center: float = 0.0) -> float:
    """``F{center + pitch*Z + [-halfwidth, halfwidth]}``."""
    if halfwidth >= pitch / 2:
        return math.fsum(F.weights.tolist())
    x, w = _support(F)
    r = np.mod(x - center, pitch)
    dist = np.minimum(r, pitch - r)
    return math.fsum(w[dist <= halfwidth + snap_tol(x)].tolist())


def prokhorov_lower_bound(F: LatticeDistribution, G: LatticeDistribution, X, epsilon: float) -> bool:
    """True iff ``F{X} > G{X^eps} + eps``, which certifies ``pi(F, G) > eps``."""
    if not isinstance(X, (LatticeNeighborhood, IntervalUnion)):
        raise TypeError("X must be a LatticeNeighborhood or an IntervalUnion")
    if not (epsilon >= 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be finite and non-negative")
    return X.mass(F) > X.expand(epsilon).mass(G) + epsilon


def certified_prokhorov_floor(F, G, X, tol: float = 1e-9) -> float:
    """Largest ``eps`` (to ``tol``) for which the witness set ``X`` certifies ``pi > eps``.

    Returns 0.0 when ``X`` certifies nothing.
    """
    if not prokhorov_lower_bound(F, G, X, 0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if prokhorov_lower_bound(F, G, X, mid):
            lo = mid
        else:
            hi = mid
    return lo


def sup_shifted_lattice_mass(F: LatticeDistribution, pitch: float, halfwidth: float) -> tuple[float, float]:
    """``sup_x F{pitch*Z + x + [-halfwidth, halfwidth]}`` and a maximising ``x``.

    Atoms are folded modulo ``pitch``.  An optimal closed window can be slid
    right until its left edge meets an atom, so only windows starting at a
    folded atom need checking.
    """
    if not (pitch > 0 and math.isfinite(pitch)):
        raise ValueError("pitch must be positive and finite")
    if not 0 < halfwidth < pitch / 2:
        raise ValueError("halfwidth must lie in (0, pitch/2)")
    x, w = _support(F)
    r = np.mod(x, pitch)
    tol = snap_tol(x)
    r[r >= pitch - tol] = 0.0
    order = np.argsort(r, kind="stable")
    r, w = r[order], w[order]
    rr = np.concatenate([r, r + pitch])
    # exact integer prefix sums: window masses then depend only on which
    # atoms fall inside, not on summation order (reflection/shift invariance)
    cum = _exact_prefix(np.concatenate([w, w]))
    end = np.searchsorted(rr, r + 2 * halfwidth + tol, side="right")
    best_mass, best = max((cum[e] - cum[i], i) for i, e in enumerate(end.tolist()))
    return best_mass / _EXACT_DEN, float(np.mod(r[best] + halfwidth, pitch))


_EXACT_DEN = 1 << 1074


def _exact_prefix(w) -> list[int]:
    """Prefix sums of float weights as exact integers in units of 2**-1074."""
    out = [0]
    acc = 0
    for v in w.tolist():
        num, den = v.as_integer_ratio()
        acc += num * (_EXACT_DEN // den)
        out.append(acc)
    return out


def brute_force_prokhorov(F: LatticeDistribution, G: LatticeDistribution) -> float:
    """Prokhorov distance by checking every subset of the merged support.

    For a fixed ``eps`` the condition fails on some set iff
    ``max_X F{X} - G{X^eps} > eps`` (and symmetrically).  That maximum is a
    step function of ``eps`` jumping only at pairwise distances, so the
    infimum is ``min_k max(d_k, M_k)`` over those breakpoints.  Exponential;
    meant for tiny supports only.
    """
    pos, (a, b) = union_atoms(F, G)
    keep = (a > 0) | (b > 0)
    pos, a, b = pos[keep], a[keep], b[keep]
    n = pos.size
    if n > 16:
        raise ValueError("brute force is limited to 16 merged atoms")
    dist = np.abs(pos[:, None] - pos[None, :])
    breaks = sorted(set(np.round(dist.ravel(), 15).tolist()) | {0.0})
    subsets = [[i for i in range(n) if mask >> i & 1] for mask in range(1, 1 << n)]
    best = 1.0
    for d in breaks:
        near = dist <= d + 1e-12 * max(1.0, d)
        worst = 0.0
        for X in subsets:
            nbhd = near[X].any(axis=0)
            worst = max(worst, a[X].sum() - b[nbhd].sum(), b[X].sum() - a[nbhd].sum())
        best = min(best, max(d, worst))
    return float(best)


def all_metrics(F: LatticeDistribution, G: LatticeDistribution, method: str = "auto") -> dict[str, MetricResult]:
    return {
        "tv": total_variation(F, G),
        "kolmogorov": kolmogorov_distance(F, G),
        "levy": levy_distance(F, G),
        "prokhorov": prokhorov_distance(F, G, method=method),
    }


def prokhorov_fallback(F: LatticeDistribution, G: LatticeDistribution) -> MetricResult:
    """Bracket ``L <= pi <= TV`` used when the flow problem is too large."""
    lev = levy_distance(F, G)
    tv = total_variation(F, G)
    lo, hi = lev.lower, max(tv.upper, lev.lower)
    return MetricResult(hi, lo, hi, "levy-tv-bracket", lev.iterations)


__all__: Sequence[str] = [
    "MetricResult",
    "CouplingWitness",
    "FlowCapExceeded",
    "LatticeNeighborhood",
    "IntervalUnion",
    "total_variation",
    "kolmogorov_distance",
    "levy_distance",
    "prokhorov_distance",
    "prokhorov_lower_bound",
    "certified_prokhorov_floor",
    "sup_shifted_lattice_mass",
    "lattice_neighborhood_mass",
    "brute_force_prokhorov",
    "all_metrics",
    "prokhorov_fallback",
]
