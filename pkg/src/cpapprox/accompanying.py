"""Triangular-array rows and their accompanying infinitely divisible laws.

A row is a finite list of independent summands.  Each summand is kept in
its decomposition ``(1 - p) U + p V`` with ``U`` living on ``[-tau, tau]``.
The accompanying law of a row is

    prod_k  E_{c_k} * e(F_k * E_{-c_k})

for centering constants ``c_k``.  Two rules are provided: the truncated
mean of ``F_k`` over ``|x| <= tau`` (closed ball) and the mean of ``U_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .compound import DEFAULT_TAIL_TOL, compound_poisson
from .lattice import (
    LatticeDistribution,
    LatticeError,
    convolve,
    delta,
    from_atoms,
    mix,
    power,
    shift,
    snap_tol,
)
from .metrics import levy_distance

TAU_MEAN = "tau-mean"
U_MEAN = "u-mean"
EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    p: float
    U: LatticeDistribution
    V: LatticeDistribution
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise LatticeError(f"p = {self.p!r} outside [0, 1]")
        if not self.tau >= 0:
            raise LatticeError("tau must be non-negative")
        x = self.U.support
        if np.any(np.abs(x) > self.tau + snap_tol(x)):
            raise LatticeError(f"U has atoms outside [-{self.tau}, {self.tau}]")

    @cached_property
    def law(self) -> LatticeDistribution:
        return mix(self.p, self.U, self.V)

    @classmethod
    def from_law(cls, F: LatticeDistribution, tau: float) -> "MixtureComponent":
        """Split ``F`` into its part on ``[-tau, tau]`` and the rest."""
        x, w = F.atoms, F.weights
        inner = np.abs(x) <= tau + snap_tol(x)
        p = float(w[~inner].sum())
        if p <= 0:
            return cls(0.0, F, F, tau)
        if p >= F.mass:
            return cls(1.0, delta(0.0), F, tau)
        U = from_atoms(list(zip(x[inner], w[inner] / (1 - p))))
        V = from_atoms(list(zip(x[~inner], w[~inner] / p)))
        return cls(p, U, V, tau)


@dataclass(frozen=True, eq=False)
class ArrayRow:
    """Row ``j`` of a triangular array.

    ``counts[i]`` copies of ``components[i]``; identical summands are
    stored once so that the accompanying law can use ``e(n H)``.
    """

    j: int
    components: tuple[MixtureComponent, ...]
    counts: tuple[int, ...] = field(default=())

    def __post_init__(self):
        comps = tuple(self.components)
        counts = tuple(int(c) for c in self.counts) or (1,) * len(comps)
        if not comps:
            raise LatticeError("a row needs at least one summand")
        if len(counts) != len(comps) or any(c < 1 for c in counts):
            raise LatticeError("counts must be positive, one per component")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def p_j(self) -> float:
        return max(c.p for c in self.components)

    @property
    def tau_j(self) -> float:
        return max(c.tau for c in self.components)


@dataclass(frozen=True)
class CenteringRule:
    mode: str
    tau: float | None = None
    constants: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in (TAU_MEAN, U_MEAN, EXPLICIT):
            raise LatticeError(f"unknown centering mode {self.mode!r}")
        if self.mode == TAU_MEAN and not (self.tau is not None and self.tau > 0):
            raise LatticeError("tau-mean centering needs tau > 0")
        if self.mode == EXPLICIT:
            if self.constants is None:
                raise LatticeError("explicit centering needs constants")
            object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))

    @classmethod
    def tau_mean(cls, tau: float) -> "CenteringRule":
        return cls(TAU_MEAN, tau=tau)

    @classmethod
    def u_mean(cls) -> "CenteringRule":
        return cls(U_MEAN)

    @classmethod
    def explicit(cls, constants: Sequence[float]) -> "CenteringRule":
        return cls(EXPLICIT, constants=tuple(constants))


def logstar(b: float) -> float:
    """``max(1, log b)`` for ``b > 0``."""
    return max(1.0, math.log(b))


@dataclass(frozen=True)
class BoundBudget:
    p_j: float
    tau_j: float
    sum_p_sq: float
    logstar_term: float

    @property
    def levy_rhs(self) -> float:
        return self.p_j + self.logstar_term

    @property
    def prokhorov_rhs(self) -> float:
        return self.sum_p_sq + self.p_j + self.logstar_term


# -- operations ------------------------------------------------------------------


def row_convolution(row: ArrayRow) -> LatticeDistribution:
    """Law of the row sum."""
    out = delta(0.0)
    for comp, count in zip(row.components, row.counts):
        out = convolve(out, power(comp.law, count))
    return out


def centering_a(F: LatticeDistribution, tau: float) -> float:
    """Mean of ``F`` truncated to the closed ball ``|x| <= tau``."""
    if not tau > 0:
        raise LatticeError("tau must be positive")
    x, w = F.atoms, F.weights
    inner = np.abs(x) <= tau + snap_tol(x)
    return float(np.dot(x[inner], w[inner]))


def centering_b(component: MixtureComponent) -> float:
    """Mean of the ``U`` part."""
    U = component.U
    return float(np.dot(U.atoms, U.weights))


def _centers(row: ArrayRow, rule: CenteringRule) -> list[tuple[MixtureComponent, int, float]]:
    if rule.mode == TAU_MEAN:
        return [(c, k, centering_a(c.law, rule.tau)) for c, k in zip(row.components, row.counts)]
    if rule.mode == U_MEAN:
        return [(c, k, centering_b(c)) for c, k in zip(row.components, row.counts)]
    consts = rule.constants
    if len(consts) == len(row.components):
        return list(zip(row.components, row.counts, consts))
    if len(consts) != row.n:
        raise LatticeError(f"{len(consts)} explicit centers for a row of {row.n} summands")
    groups = []
    pos = 0
    for comp, count in zip(row.components, row.counts):
        for c in consts[pos : pos + count]:
            if groups and groups[-1][0] is comp and groups[-1][2] == c:
                groups[-1][1] += 1
            else:
                groups.append([comp, 1, c])
        pos += count
    return [tuple(g) for g in groups]


def accompanying_law(
    row: ArrayRow, rule: CenteringRule, tail_tol: float = DEFAULT_TAIL_TOL
) -> LatticeDistribution:
    """``prod_k E_{c_k} e(F_k E_{-c_k})`` with centers chosen by ``rule``.

    A group of ``m`` identical summands with a common center contributes
    the single factor ``E_{m c} e(m H)``, ``H = F E_{-c}``.
    """
    out = delta(0.0)
    for comp, count, c in _centers(row, rule):
        H = shift(comp.law, -c)
        factor = shift(compound_poisson(float(count), H, tail_tol), count * c)
        out = convolve(out, factor)
    return out


def infinitesimality_epsilon(row: ArrayRow) -> float:
    """``max_k L(F_k, E)``."""
    return max(levy_distance(c.law, delta(0.0)).value for c in row.components)


def bound_budget(row: ArrayRow) -> BoundBudget:
    tau = row.tau_j
    term = tau * logstar(1.0 / tau) if tau > 0 else 0.0
    sum_sq = float(sum(k * c.p**2 for c, k in zip(row.components, row.counts)))
    return BoundBudget(row.p_j, tau, sum_sq, term)


# -- presets and row files ---------------------------------------------------------


def example1_row(j: int, n: int) -> ArrayRow:
    """``n`` copies of ``(1 - 1/j) E + (1/j) E_1``; here ``tau_j = 0``."""
    if j < 2:
        raise LatticeError("example 1 needs j >= 2")
    comp = MixtureComponent(1.0 / j, delta(0.0), delta(1.0), 0.0)
    return ArrayRow(j, (comp,), (n,))


def example2_row(j: int, n: int) -> ArrayRow:
    """``n`` copies of ``(1 - 1/j) E_{-1/j} + (1/j) E_{1-1/j}``; ``tau_j = 1/j``."""
    if j < 2:
        raise LatticeError("example 2 needs j >= 2")
    comp = MixtureComponent(1.0 / j, delta(-1.0 / j), delta(1.0 - 1.0 / j), 1.0 / j)
    return ArrayRow(j, (comp,), (n,))


PRESETS = {"example1": example1_row, "example2": example2_row}


def load_row(data: Mapping) -> ArrayRow:
    """Build a row from its structured-text form.

    Either ``{"preset": "example1"|"example2", "j": .., "n": .., "overrides": {..}}``
    or ``{"j": .., "components": [{"p", "U", "V", "tau", "count"?}, ..]}``
    with ``U``/``V`` serialized distributions.
    """
    if not isinstance(data, Mapping):
        raise LatticeError("row spec must be an object")
    data = {**data, **dict(data.get("overrides") or {})}
    try:
        if "preset" in data:
            make = PRESETS.get(data["preset"])
            if make is None:
                raise LatticeError(f"unknown preset {data['preset']!r}")
            return make(int(data["j"]), int(data["n"]))
        comps, counts = [], []
        for rec in data["components"]:
            comps.append(
                MixtureComponent(
                    float(rec["p"]),
                    LatticeDistribution.from_dict(rec["U"]),
                    LatticeDistribution.from_dict(rec["V"]),
                    float(rec["tau"]),
                )
            )
            counts.append(int(rec.get("count", 1)))
        if "n" in data and int(data["n"]) != sum(counts):
            raise LatticeError("n disagrees with the component counts")
        return ArrayRow(int(data["j"]), tuple(comps), tuple(counts))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, LatticeError):
            raise
        raise LatticeError(f"malformed row spec: {exc}") from exc


def dump_row(row: ArrayRow) -> dict:
    return {
        "j": row.j,
        "n": row.n,
        "components": [
            {"p": c.p, "U": c.U.to_dict(), "V": c.V.to_dict(), "tau": c.tau, "count": k}
            for c, k in zip(row.components, row.counts)
        ],
    }
