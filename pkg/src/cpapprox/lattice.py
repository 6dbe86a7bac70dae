"""Finitely supported distributions on affine lattices.

A :class:`LatticeDistribution` places mass ``weights[k]`` at the point
``offset + k * step``.  All operations return new values; instances are
never mutated after construction.

Two atoms are identified when they differ by at most
``SNAP_RTOL * max(1, |x|)``.  Lattices with different pitches are merged
by rational reconstruction of the pitch ratio (denominator capped at
``MAX_DENOMINATOR``), so steps such as ``1``, ``1/j`` and ``1/j**2`` align
exactly instead of drifting.
"""

from __future__ import annotations

import contextlib
import contextvars
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

SNAP_RTOL = 1e-12
MASS_TOL = 1e-12
WEIGHT_FLOOR = 1e-16
COINCIDENCE = 1e-2
MAX_DENOMINATOR = 10**6
DEFAULT_ATOM_BUDGET = 10**7
DEFAULT_FLOW_CAP = 400


class LatticeError(ValueError):
    """Invalid lattice distribution input."""


class IncommensurableError(LatticeError):
    """The atoms of two distributions do not fit on one common lattice."""


class AtomBudgetExceeded(RuntimeError):
    """An operation would create more atoms than the configured budget."""


@dataclass(frozen=True)
class Limits:
    atom_budget: int = DEFAULT_ATOM_BUDGET
    flow_cap: int = DEFAULT_FLOW_CAP


_LIMITS: contextvars.ContextVar[Limits] = contextvars.ContextVar("limits", default=Limits())


def current_limits() -> Limits:
    return _LIMITS.get()


@contextlib.contextmanager
def use_limits(atom_budget: int | None = None, flow_cap: int | None = None):
    """Temporarily override the atom budget and/or the max-flow size cap."""
    cur = _LIMITS.get()
    new = Limits(
        atom_budget=cur.atom_budget if atom_budget is None else int(atom_budget),
        flow_cap=cur.flow_cap if flow_cap is None else int(flow_cap),
    )
    token = _LIMITS.set(new)
    try:
        yield new
    finally:
        _LIMITS.reset(token)


def snap_tol(x) -> float:
    return SNAP_RTOL * max(1.0, float(np.max(np.abs(x))) if np.ndim(x) else abs(float(x)))


def _check_budget(n_atoms: int) -> None:
    budget = current_limits().atom_budget
    if n_atoms > budget:
        raise AtomBudgetExceeded(f"{n_atoms} atoms requested, budget is {budget}")


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    offset: float
    step: float
    weights: np.ndarray = field(repr=False)
    dropped_mass: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "dropped_mass", float(self.dropped_mass))
        if w.size == 0:
            raise LatticeError("a distribution needs at least one atom")
        if not (math.isfinite(self.offset) and math.isfinite(self.step)):
            raise LatticeError("offset and step must be finite")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise LatticeError("weights must be finite and non-negative")
        if w[0] <= 0 or w[-1] <= 0:
            raise LatticeError("first and last weights must be positive")
        if w.size > 1 and self.step <= 0:
            raise LatticeError("step must be positive when there are several atoms")
        if self.dropped_mass < 0:
            raise LatticeError("dropped_mass must be non-negative")
        total = float(w.sum()) + self.dropped_mass
        if abs(total - 1.0) > MASS_TOL:
            raise LatticeError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

    # -- views -------------------------------------------------------------

    def __len__(self) -> int:
        return self.weights.size

    @cached_property
    def atoms(self) -> np.ndarray:
        x = self.offset + self.step * np.arange(self.weights.size)
        x.setflags(write=False)
        return x

    @cached_property
    def _cumulative(self) -> np.ndarray:
        c = np.cumsum(self.weights)
        c.setflags(write=False)
        return c

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> np.ndarray:
        """Atom positions carrying positive mass."""
        return self.atoms[self.weights > 0]

    @property
    def min_atom(self) -> float:
        return self.offset

    @property
    def max_atom(self) -> float:
        return self.offset + self.step * (self.weights.size - 1)

    def mean(self) -> float:
        return float(np.dot(self.atoms, self.weights) / self.mass)

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.atoms - m) ** 2, self.weights) / self.mass)

    def as_dict(self) -> dict[float, float]:
        """``{position: mass}`` for the positive-mass atoms."""
        keep = self.weights > 0
        return dict(zip(self.atoms[keep].tolist(), self.weights[keep].tolist()))

    def __repr__(self) -> str:
        if len(self) <= 6:
            body = ", ".join(f"{x:.6g}: {w:.6g}" for x, w in self.as_dict().items())
            return f"LatticeDistribution({{{body}}})"
        return (
            f"LatticeDistribution(offset={self.offset:.6g}, step={self.step:.6g}, "
            f"atoms={len(self)}, dropped={self.dropped_mass:.2g})"
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "step": self.step,
            "weights": self.weights.tolist(),
            "dropped_mass": self.dropped_mass,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LatticeDistribution":
        try:
            offset = float(data["offset"])
            step = float(data.get("step", 0.0))
            weights = [float(v) for v in data["weights"]]
            dropped = float(data.get("dropped_mass", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise LatticeError(f"malformed distribution record: {exc}") from exc
        return canonical(offset, step, weights, dropped)

    def dumps(self) -> str:
        # json writes floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "LatticeDistribution":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LatticeError(f"not valid JSON: {exc}") from exc
        if not isinstance(data, Mapping):
            raise LatticeError("distribution record must be a JSON object")
        return cls.from_dict(data)


def canonical(
    offset, step, weights, dropped_mass=0.0, *, floor=WEIGHT_FLOOR, trim_budget: float | None = None
) -> LatticeDistribution:
    """Trim, compress and wrap raw lattice data.

    Leading/trailing atoms lighter than ``floor * total`` move to
    ``dropped_mass`` (at most ``trim_budget`` in total when given); the
    pitch is enlarged by the gcd of the occupied indices so that equal
    measures share one representation.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise LatticeError("weights must be a non-empty finite sequence")
    if np.any(w < 0):
        raise LatticeError("weights must be non-negative")
    total = float(w.sum())
    if total <= 0:
        raise LatticeError("distribution has no mass")
    heavy = np.flatnonzero(w >= floor * total) if floor > 0 else np.flatnonzero(w > 0)
    lo, hi = int(heavy[0]), int(heavy[-1])
    if trim_budget is not None:
        lo, hi = _limit_trim(w, lo, hi, trim_budget)
    trimmed = float(w[:lo].sum() + w[hi + 1 :].sum())
    w = w[lo : hi + 1]
    offset = float(offset) + lo * float(step)
    nz = np.flatnonzero(w)
    g = int(np.gcd.reduce(nz)) if nz.size > 1 else 0
    if g > 1:
        w = w[::g]
    if w.size == 1:
        step = 0.0
    elif g > 1:
        step = float(step) * g
    return LatticeDistribution(offset, step, w.copy(), float(dropped_mass) + trimmed)


def _limit_trim(w: np.ndarray, lo: int, hi: int, budget: float) -> tuple[int, int]:
    nz = np.flatnonzero(w)
    first, last = int(nz[0]), int(nz[-1])
    left = np.cumsum(w[first:lo])
    lcount = int(np.searchsorted(left, budget, side="right"))
    lmass = float(left[lcount - 1]) if lcount else 0.0
    right = np.cumsum(w[hi + 1 : last + 1][::-1])
    rcount = int(np.searchsorted(right, budget - lmass, side="right"))
    return first + lcount, last - rcount


# -- constructors ------------------------------------------------------------


def delta(a: float) -> LatticeDistribution:
    """Unit mass at ``a``."""
    if not math.isfinite(a):
        raise LatticeError("delta needs a finite position")
    return LatticeDistribution(a, 0.0, np.ones(1))


def from_atoms(atoms: Mapping[float, float] | Iterable[tuple[float, float]]) -> LatticeDistribution:
    """Build a distribution from ``{position: mass}`` pairs.

    Positions must be commensurable; masses must sum to one.
    """
    items = list(atoms.items() if isinstance(atoms, Mapping) else atoms)
    if not items:
        raise LatticeError("no atoms given")
    pos = np.array([float(x) for x, _ in items])
    mass = np.array([float(m) for _, m in items])
    if not np.all(np.isfinite(pos)):
        raise LatticeError("atom positions must be finite")
    parts = [LatticeDistribution(x, 0.0, np.ones(1)) for x in pos]
    origin, g, idx = _embed(parts)
    index = np.array([i[0] for i in idx], dtype=np.int64)
    w = np.zeros(int(index.max() - index.min()) + 1)
    _check_budget(w.size)
    np.add.at(w, index - index.min(), mass)
    return canonical(origin + g * index.min(), g, w)


def binomial(n: int, p: float) -> LatticeDistribution:
    """Binomial(n, p) pmf by direct log-space evaluation of the coefficients."""
    from scipy.special import gammaln

    k = np.arange(n + 1)
    if p in (0.0, 1.0):
        return delta(float(n) * p)
    logw = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + k * math.log(p) + (n - k) * math.log1p(-p)
    w = np.exp(logw)
    return canonical(0.0, 1.0, w / w.sum())


# -- lattice alignment -------------------------------------------------------


def _rational(x: float, what: str) -> Fraction:
    """Smallest-denominator convergent of ``x`` within the snap tolerance.

    A match with ``q**2 * tol`` above ``COINCIDENCE`` is refused: every real
    has convergents that close, so such a match says nothing about
    commensurability.
    """
    tol = SNAP_RTOL * max(1.0, abs(x))
    q_max = min(MAX_DENOMINATOR, int(math.sqrt(COINCIDENCE / tol)))
    h0, h1, k0, k1 = 0, 1, 1, 0
    rest = Fraction(x)
    while True:
        a = math.floor(rest)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > q_max:
            break
        if abs(h1 / k1 - x) <= tol:
            return Fraction(h1, k1)
        frac = rest - a
        if frac == 0:
            break
        rest = 1 / frac
    raise IncommensurableError(f"{what} {x!r} has no rational form with denominator <= {q_max}")


def _embed(dists: Sequence[LatticeDistribution]) -> tuple[float, float, list[np.ndarray]]:
    """Place several distributions on one common lattice.

    Returns ``(origin, pitch, indices)`` with ``indices[i]`` the integer
    lattice index of every atom of ``dists[i]``.
    """
    origin = min(d.offset for d in dists)
    steps = [d.step for d in dists if d.step > 0]
    g = steps[0] if steps else 1.0
    for d in dists:
        if d.step > 0:
            g /= _rational(d.step / g, "pitch ratio").denominator
    for d in dists:
        diff = d.offset - origin
        if abs(diff) > snap_tol(d.offset):
            g /= _rational(diff / g, "offset ratio").denominator
    out = []
    for d in dists:
        start = int(round((d.offset - origin) / g))
        stride = int(round(d.step / g)) if d.step > 0 else 0
        out.append(start + stride * np.arange(len(d), dtype=np.int64))
    return origin, g, out


# -- operations --------------------------------------------------------------


def mix(p: float, U: LatticeDistribution, V: LatticeDistribution) -> LatticeDistribution:
    """The mixture ``(1 - p) U + p V``."""
    if not 0.0 <= p <= 1.0:
        raise LatticeError(f"mixing weight {p!r} outside [0, 1]")
    if p == 0.0:
        return U
    if p == 1.0:
        return V
    origin, g, (iu, iv) = _embed([U, V])
    size = int(max(iu[-1], iv[-1])) + 1
    _check_budget(size)
    w = np.zeros(size)
    w[iu] += (1.0 - p) * U.weights
    w[iv] += p * V.weights
    dropped = (1.0 - p) * U.dropped_mass + p * V.dropped_mass
    return canonical(origin, g, w, dropped)


def _stretch(w: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return w
    out = np.zeros((w.size - 1) * k + 1)
    out[::k] = w
    return out


def _direct_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size < b.size:
        a, b = b, a
    nz = np.flatnonzero(b)
    if nz.size > 32:
        return np.convolve(a, b)
    # sparse kernel: one scaled slice add per atom of b
    out = np.zeros(a.size + b.size - 1)
    for k in nz:
        out[k : k + a.size] += b[k] * a
    return out


def convolve(F: LatticeDistribution, G: LatticeDistribution) -> LatticeDistribution:
    """Exact convolution (law of the sum of independent variables)."""
    if len(G) == 1:
        F, G = G, F
    if len(F) == 1:
        return LatticeDistribution(
            G.offset + F.offset, G.step, G.weights * F.weights[0], F.dropped_mass + G.dropped_mass
        )
    ratio = _rational(F.step / G.step, "pitch ratio")
    p, q = ratio.numerator, ratio.denominator
    size = (len(F) - 1) * p + (len(G) - 1) * q + 1
    _check_budget(size)
    g = F.step / p
    w = _direct_convolve(_stretch(F.weights, p), _stretch(G.weights, q))
    return canonical(F.offset + G.offset, g, w, F.dropped_mass + G.dropped_mass)


def power(F: LatticeDistribution, n: int) -> LatticeDistribution:
    """``n``-fold convolution power by binary exponentiation."""
    if n < 0:
        raise LatticeError("power needs n >= 0")
    result = delta(0.0)
    base = F
    while n:
        if n & 1:
            result = convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result


def shift(F: LatticeDistribution, a: float) -> LatticeDistribution:
    """Translate by ``a`` (convolution with a point mass at ``a``)."""
    if not math.isfinite(a):
        raise LatticeError("shift needs a finite amount")
    return LatticeDistribution(F.offset + a, F.step, F.weights, F.dropped_mass)


def reflect(F: LatticeDistribution) -> LatticeDistribution:
    """Law of ``-X``."""
    return LatticeDistribution(-F.max_atom, F.step, F.weights[::-1], F.dropped_mass)


def scale(F: LatticeDistribution, c: float) -> LatticeDistribution:
    """Law of ``c * X``."""
    if not math.isfinite(c):
        raise LatticeError("scale factor must be finite")
    if c == 0:
        return LatticeDistribution(0.0, 0.0, np.array([F.mass]), F.dropped_mass)
    if c < 0:
        return reflect(scale(F, -c))
    return LatticeDistribution(F.offset * c, F.step * c, F.weights, F.dropped_mass)


def cdf(F: LatticeDistribution, x: float) -> float:
    """Right-continuous distribution function ``F{(-inf, x]}``."""
    k = np.searchsorted(F.atoms, x + snap_tol(x), side="right")
    return float(F._cumulative[k - 1]) if k > 0 else 0.0


def mass_of_interval(
    F: LatticeDistribution, lo: float, hi: float, closed: tuple[bool, bool] = (True, True)
) -> float:
    """Mass of the interval between ``lo`` and ``hi``; ``closed`` picks the endpoint convention."""
    if hi < lo:
        return 0.0
    x = F.atoms
    tl, th = snap_tol(lo), snap_tol(hi)
    left = np.searchsorted(x, lo - tl, side="left") if closed[0] else np.searchsorted(x, lo + tl, side="right")
    right = np.searchsorted(x, hi + th, side="right") if closed[1] else np.searchsorted(x, hi - th, side="left")
    if right <= left:
        return 0.0
    c = F._cumulative
    return float(c[right - 1] - (c[left - 1] if left > 0 else 0.0))


def union_atoms(*dists: LatticeDistribution) -> tuple[np.ndarray, list[np.ndarray]]:
    """Merge the atom sets of several distributions with snapping.

    Returns the sorted merged positions and, for each input, its mass at
    each merged position.  Works for incommensurable inputs too.
    """
    xs = np.concatenate([d.atoms for d in dists])
    owner = np.concatenate([np.full(len(d), i) for i, d in enumerate(dists)])
    ws = np.concatenate([d.weights for d in dists])
    order = np.argsort(xs, kind="stable")
    xs, owner, ws = xs[order], owner[order], ws[order]
    gap = np.diff(xs) > SNAP_RTOL * np.maximum(1.0, np.abs(xs[1:]))
    cluster = np.concatenate([[0], np.cumsum(gap)])
    n = int(cluster[-1]) + 1
    pos = np.zeros(n)
    first = np.concatenate([[True], gap])
    pos[cluster[first]] = xs[first]
    masses = []
    for i in range(len(dists)):
        m = np.zeros(n)
        sel = owner == i
        np.add.at(m, cluster[sel], ws[sel])
        masses.append(m)
    return pos, masses


def max_atom_difference(F: LatticeDistribution, G: LatticeDistribution) -> float:
    """Largest per-atom mass difference after merging supports."""
    _, (a, b) = union_atoms(F, G)
    return float(np.max(np.abs(a - b)))


def dumps_many(dists: Sequence[LatticeDistribution]) -> str:
    return json.dumps([d.to_dict() for d in dists])
