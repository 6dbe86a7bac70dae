"""Poisson and compound Poisson laws with certified truncation.

``compound_poisson(lam, F)`` evaluates ``exp(-lam) * sum_s lam**s / s! * F**s``
(powers in the convolution sense).  The series is cut at the smallest
``S`` whose Poisson upper tail is below ``tail_tol``; the discarded mass is
carried in ``dropped_mass`` so that every result stays accountable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    LatticeDistribution,
    LatticeError,
    _check_budget,
    _direct_convolve,
    _rational,
    canonical,
    delta,
    snap_tol,
)

DEFAULT_TAIL_TOL = 1e-12
# share of the tail budget reserved for trimming negligible end atoms
_TRIM_SHARE = 1e-7


def _poisson_weights(lam: float, tail_tol: float) -> tuple[int, np.ndarray, float]:
    """Poisson(lam) pmf restricted to ``[lo, S]``.

    Ratios ``p(s+1)/p(s) = lam/(s+1)`` are multiplied outward from the
    mode and the result normalised over a window wide enough that the
    neglected mass underflows; this avoids ``exp(-lam)`` underflow for
    large ``lam`` and the cancellation in a direct log-pmf.
    Returns ``(lo, weights, dropped)``.
    """
    mode = int(math.floor(lam))
    width = int(math.ceil(40.0 * math.sqrt(lam) + 40.0))
    lo_w = max(0, mode - width)
    hi_w = mode + width
    up = np.cumprod(lam / np.arange(mode + 1, hi_w + 1, dtype=np.float64))
    down = np.cumprod(np.arange(mode, lo_w, -1, dtype=np.float64) / lam) if mode > lo_w else np.empty(0)
    r = np.concatenate([down[::-1], [1.0], up])
    p = r / r.sum()

    trim = tail_tol * _TRIM_SHARE
    left = np.cumsum(p)
    lo = int(np.searchsorted(left, trim, side="right"))
    low_drop = float(left[lo - 1]) if lo else 0.0
    # upper[i] = mass strictly above index i, summed from the far end
    upper = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    budget = tail_tol * (1.0 - _TRIM_SHARE) - low_drop
    S = int(np.argmax(upper <= budget))
    return lo_w + lo, p[lo : S + 1], low_drop + float(upper[S])


def poisson(lam: float, tail_tol: float = DEFAULT_TAIL_TOL) -> LatticeDistribution:
    """Poisson law with parameter ``lam`` on ``{0, 1, ..., S}``."""
    if not (lam >= 0 and math.isfinite(lam)):
        raise LatticeError(f"Poisson parameter must be finite and >= 0, got {lam!r}")
    if not 0 < tail_tol < 1:
        raise LatticeError("tail_tol must lie in (0, 1)")
    if lam == 0:
        return delta(0.0)
    lo, w, dropped = _poisson_weights(lam, tail_tol)
    _check_budget(w.size)
    return canonical(float(lo), 1.0, w, dropped, trim_budget=0.0)


@dataclass(frozen=True)
class CompoundPoissonSpec:
    lam: float
    base: LatticeDistribution
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise LatticeError(f"intensity must be finite and >= 0, got {self.lam!r}")
        if not 0 < self.tail_tol < 1:
            raise LatticeError("tail_tol must lie in (0, 1)")

    def evaluate(self) -> LatticeDistribution:
        return compound_poisson(self.lam, self.base, self.tail_tol)


def _split_zero(F: LatticeDistribution) -> tuple[float, LatticeDistribution | None]:
    """Mass of ``F`` at the origin and ``F`` conditioned on leaving it."""
    x = F.atoms
    hit = np.flatnonzero(np.abs(x) <= snap_tol(x))
    if hit.size == 0:
        return 0.0, F
    m0 = float(F.weights[hit[0]])
    if m0 >= F.mass:
        return m0, None
    w = F.weights.copy()
    w[hit[0]] = 0.0
    rest = 1.0 - m0
    return m0, canonical(F.offset, F.step, w / rest, F.dropped_mass / rest, floor=0.0)


def compound_poisson(lam: float, base: LatticeDistribution, tail_tol: float = DEFAULT_TAIL_TOL) -> LatticeDistribution:
    """The compound Poisson law with intensity ``lam`` and jump law ``base``.

    Mass of ``base`` at the origin is removed first, using
    ``e(lam*(m0*E + (1-m0)*H)) = e(lam*(1-m0)*H)``; this only shortens the
    series.  Powers of the jump law are kept on their own pitch and added
    into one accumulator with strided slices.
    """
    if not (lam >= 0 and math.isfinite(lam)):
        raise LatticeError(f"intensity must be finite and >= 0, got {lam!r}")
    if not 0 < tail_tol < 1:
        raise LatticeError("tail_tol must lie in (0, 1)")
    m0, H = _split_zero(base)
    if lam == 0 or H is None:
        return delta(0.0)
    lam = lam * (1.0 - m0)

    # common grid g with offset = a*g and step = b*g, a and b integers
    if len(H) == 1:
        g, a, b = abs(H.offset), int(math.copysign(1, H.offset)), 1
    elif abs(H.offset) <= snap_tol(H.offset):
        g, a, b = H.step, 0, 1
    else:
        fr = _rational(H.offset / H.step, "offset/pitch ratio")
        g, a, b = H.step / fr.denominator, fr.numerator, fr.denominator

    lo, coef, dropped = _poisson_weights(lam, tail_tol)
    S = lo + coef.size - 1
    m = len(H) - 1
    lo_idx = min(0, S * a, lo * a)
    hi_idx = max(S * a + b * S * m, lo * a + b * lo * m)
    size = hi_idx - lo_idx + 1
    _check_budget(size)

    acc = np.zeros(size)
    kernel = np.asarray(H.weights)
    P = np.ones(1)
    for s in range(S + 1):
        if s >= lo:
            start = s * a - lo_idx
            acc[start : start + b * (P.size - 1) + 1 : b] += coef[s - lo] * P
        if s < S:
            P = _direct_convolve(P, kernel)
    if H.dropped_mass > 0:
        s = np.arange(lo, S + 1)
        dropped += float(np.dot(coef, -np.expm1(s * math.log1p(-H.dropped_mass))))
    return canonical(lo_idx * g, g, acc, dropped, trim_budget=tail_tol * _TRIM_SHARE)
