"""Reproductions of the two counterexamples, the Poisson lattice lemma sweep,
and the bound-ratio sweeps.

Example 1: summands ``(1 - 1/j) E + (1/j) E_1``.  The row sum is binomial
and sits on the integers; the accompanying law built with truncated-mean
centering (``tau >= 1``) spreads a Poisson part over the lattice ``Z/j`` and
so puts at most about 5/8 of its mass near the integers, which keeps the
Prokhorov distance at least 1/8 for every ``j``.

Example 2 shifts the same construction by ``-1/j`` and lets the truncation
radius shrink with ``j``; the same separation appears on the finer
lattice ``Z/j**2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .accompanying import (
    ArrayRow,
    CenteringRule,
    accompanying_law,
    bound_budget,
    centering_a,
    example1_row,
    example2_row,
    row_convolution,
)
from .compound import DEFAULT_TAIL_TOL, poisson
from .lattice import (
    AtomBudgetExceeded,
    LatticeDistribution,
    convolve,
    delta,
    max_atom_difference,
    scale,
    shift,
)
from .metrics import (
    LatticeNeighborhood,
    MetricResult,
    certified_prokhorov_floor,
    lattice_neighborhood_mass,
    levy_distance,
    prokhorov_distance,
    prokhorov_lower_bound,
    sup_shifted_lattice_mass,
    total_variation,
)

HALFWIDTH = 1.0 / 8.0
MASS_THRESHOLD = 5.0 / 8.0
THRESHOLD_SLACK = 1e-9

DEFAULT_DELTA_GRID = tuple(float(2 ** (k / 2)) for k in range(11))  # 1 .. 32
DEFAULT_FACTOR_GRID = tuple(float(2.0**k) for k in range(-6, 9))  # 1/64 .. 256


@dataclass
class ExampleReport:
    example: int
    j: int
    n_j: int
    tau_choice: float
    p_j: float
    center_a: float
    center_b: float
    tv_F_G: float
    F_mass_on_Z: float
    F_on_integers: bool
    D_mass_on_Z18: float
    sup_W_shifted: float
    sup_W_reflected: float
    decomposition_error: float
    pi_lower_certified: bool
    pi_lower_floor: float
    D_equals_G: bool
    pi_F_D: MetricResult | None = None
    pi_F_G: MetricResult | None = None
    degraded: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def chain_ok(self) -> bool:
        """Averaging step: ``D{Z^(1/8)} <= sup_x W{Z^(1/8) + x}``."""
        return self.D_mass_on_Z18 <= self.sup_W_shifted + 1e-12

    def rows(self) -> list[tuple[str, object, str]]:
        """``(quantity, value, claim)`` triples for the CSV report."""
        out = [
            ("example", self.example, ""),
            ("j", self.j, ""),
            ("n_j", self.n_j, "n_j_choice"),
            ("tau", self.tau_choice, ""),
            ("p_j", self.p_j, ""),
            ("center_a", self.center_a, "eq0"),
            ("center_b", self.center_b, "eq03"),
            ("tv_F_G", self.tv_F_G, "tv_cp"),
            ("F_mass_on_Z", self.F_mass_on_Z, "eq1001"),
            ("F_on_integers", self.F_on_integers, "eq1001"),
            ("D_mass_on_Z18", self.D_mass_on_Z18, "eq1009"),
            ("sup_W_shifted", self.sup_W_shifted, "eq4759"),
            ("sup_W_reflected", self.sup_W_reflected, "eq4759"),
            ("chain_D_le_supW", self.chain_ok, "eq4843"),
            ("decomposition_error", self.decomposition_error, "eq483"),
            ("pi_lower_certified_1_8", self.pi_lower_certified, "eq1005"),
            ("pi_lower_floor", self.pi_lower_floor, "eq1005"),
            ("D_equals_G", self.D_equals_G, "a_eq_b"),
        ]
        for name, res in (("pi_F_D", self.pi_F_D), ("pi_F_G", self.pi_F_G)):
            if res is not None:
                claim = "eq1005" if name == "pi_F_D" else "eq7431"
                out += [
                    (f"{name}_value", res.value, claim),
                    (f"{name}_lower", res.lower, claim),
                    (f"{name}_upper", res.upper, claim),
                    (f"{name}_method", res.method, claim),
                ]
        out.append(("degraded", self.degraded, ""))
        return out


def n_for_example1(j: int, c2: float) -> int:
    return int(math.ceil(2.0 * c2 * j * j))


def n_for_example2(j: int, c2: float) -> int:
    return int(math.ceil(2.0 * c2 * j**4))


def _poisson_part(lam: float, coef: float, tail_tol: float) -> LatticeDistribution:
    """Law of ``coef * xi`` with ``xi ~ Poisson(lam)``."""
    if lam == 0 or coef == 0:
        return delta(0.0)
    return scale(poisson(lam, tail_tol), coef)


def _run(example, row, F, D_rule, witness_shift, tail_tol, compute_pi):
    j, n, comp = row.j, row.n, row.components[0]
    p = comp.p
    G = accompanying_law(row, CenteringRule.u_mean(), tail_tol)
    tv = total_variation(F, G).value
    a = centering_a(comp.law, D_rule.tau)
    b = float(np.dot(comp.U.atoms, comp.U.weights))

    # F_k E_{-a} = (1-p) E_{u-a} + p E_{v-a}: D = E_{n a} W V with
    # W = law of (u-a) xi_{n(1-p)},  V = law of (v-a) xi_{n p}
    u, v = float(comp.U.offset), float(comp.V.offset)
    W = _poisson_part(n * (1 - p), u - a, tail_tol)
    V = shift(_poisson_part(n * p, v - a, tail_tol), n * a)
    notes = []
    degraded = False
    try:
        D = accompanying_law(row, D_rule, tail_tol)
        decomposition_error = max_atom_difference(D, convolve(V, W))
    except AtomBudgetExceeded as exc:
        notes.append(f"accompanying law skipped: {exc}")
        degraded = True
        D = convolve(V, W)
        decomposition_error = float("nan")

    Fs, Ds = shift(F, witness_shift), shift(D, witness_shift)
    # share of the represented mass lying on Z; exactly 1.0 when every atom is an integer
    F_on_Z = lattice_neighborhood_mass(Fs, 1.0, 0.0) / math.fsum(Fs.weights)
    F_int = bool(np.all(np.abs(Fs.support - np.round(Fs.support)) <= 1e-9))
    D_mass = lattice_neighborhood_mass(Ds, 1.0, HALFWIDTH)
    sup_w = sup_shifted_lattice_mass(W, 1.0, HALFWIDTH)[0] if len(W) > 1 else 1.0
    sup_w_ref = sup_shifted_lattice_mass(scale(W, -1.0), 1.0, HALFWIDTH)[0] if len(W) > 1 else 1.0
    Z = LatticeNeighborhood(1.0, 0.0)
    certified = prokhorov_lower_bound(Fs, Ds, Z, HALFWIDTH)
    floor = certified_prokhorov_floor(Fs, Ds, Z)
    d_eq_g = max_atom_difference(D, G) <= 1e-12

    pi_fd = pi_fg = None
    if compute_pi:
        pi_fd = prokhorov_distance(F, D)
        pi_fg = prokhorov_distance(F, G)
    return ExampleReport(
        example=example,
        j=j,
        n_j=n,
        tau_choice=D_rule.tau,
        p_j=p,
        center_a=a,
        center_b=b,
        tv_F_G=tv,
        F_mass_on_Z=F_on_Z,
        F_on_integers=F_int,
        D_mass_on_Z18=D_mass,
        sup_W_shifted=sup_w,
        sup_W_reflected=sup_w_ref,
        decomposition_error=decomposition_error,
        pi_lower_certified=certified,
        pi_lower_floor=floor,
        D_equals_G=d_eq_g,
        pi_F_D=pi_fd,
        pi_F_G=pi_fg,
        degraded=degraded,
        notes=notes,
    )


def run_example1(
    j: int,
    c2_emp: float,
    tau: float = 1.0,
    *,
    n: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    compute_pi: bool = True,
) -> ExampleReport:
    """Binomial row vs. its two accompanying laws; ``n_j = ceil(2 c2 j^2)`` by default."""
    if j < 2:
        raise ValueError("example 1 needs j >= 2")
    n = n_for_example1(j, c2_emp) if n is None else int(n)
    row = example1_row(j, n)
    F = row_convolution(row)
    return _run(1, row, F, CenteringRule.tau_mean(tau), 0.0, tail_tol, compute_pi)


def run_example2(
    j: int,
    c2_emp: float,
    *,
    n: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    compute_pi: bool = True,
) -> ExampleReport:
    """Shifted binomial row; ``tau = 1/j`` and ``n_j = ceil(2 c2 j^4)`` by default.

    The witness set is the closed ``1/8``-neighbourhood of the integers,
    applied after shifting both laws right by ``n_j/j`` so that the row
    sum is integer valued again.
    """
    if j < 3:
        raise ValueError("example 2 needs j >= 3")
    n = n_for_example2(j, c2_emp) if n is None else int(n)
    row = example2_row(j, n)
    F = row_convolution(row)
    return _run(2, row, F, CenteringRule.tau_mean(1.0 / j), n / j, tail_tol, compute_pi)


# -- lemma sweep ---------------------------------------------------------------------


@dataclass
class LemmaFrontier:
    deltas: list[float]
    factors: list[float]
    sup: np.ndarray  # [delta, factor]
    passed: np.ndarray
    c1_emp: float | None
    c2_emp: float | None
    frontier: list[tuple[float, float | None]]
    monotone: list[bool]

    def in_region(self, i: int, k: int) -> bool:
        return (
            self.c1_emp is not None
            and self.deltas[i] >= self.c1_emp
            and self.factors[k] >= self.c2_emp
        )

    def consistent(self) -> bool:
        """No failing grid point inside the claimed region."""
        return all(
            self.passed[i, k]
            for i in range(len(self.deltas))
            for k in range(len(self.factors))
            if self.in_region(i, k)
        )


def lattice_sup(delta_: float, lam: float, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """``sup_x P{xi_lam / delta in Z^(1/8) + x}``."""
    P = scale(poisson(lam, tail_tol), 1.0 / delta_)
    if len(P) == 1:
        return P.mass
    return sup_shifted_lattice_mass(P, 1.0, HALFWIDTH)[0]


def lemma1_sweep(
    delta_grid: Sequence[float] = DEFAULT_DELTA_GRID,
    factor_grid: Sequence[float] = DEFAULT_FACTOR_GRID,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> LemmaFrontier:
    """Evaluate the lattice supremum on ``lambda = f * delta**2`` and locate
    the smallest grid constants ``(c1, c2)`` whose quadrant passes.

    ``c1`` is the smallest grid ``delta`` for which some ``c2`` works; ``c2``
    the smallest grid factor that then works for every ``delta >= c1``.
    """
    deltas = sorted(float(d) for d in delta_grid)
    factors = sorted(float(f) for f in factor_grid)
    if not deltas or not factors or deltas[0] < 1:
        raise ValueError("grids must be non-empty with delta >= 1")
    sup = np.array([[lattice_sup(d, f * d * d, tail_tol) for f in factors] for d in deltas])
    passed = sup <= MASS_THRESHOLD + THRESHOLD_SLACK

    # per row: index of the first factor from which the row passes to the end
    first_ok = []
    for row in passed:
        bad = np.flatnonzero(~row)
        first_ok.append(int(bad[-1]) + 1 if bad.size else 0)
    frontier = []
    for i, d in enumerate(deltas):
        need = max(first_ok[i:])
        frontier.append((d, factors[need] if need < len(factors) else None))
    c1 = c2 = None
    for d, f in frontier:
        if f is not None:
            c1, c2 = d, f
            break
    monotone = [bool(np.all(np.diff(s) <= 1e-9)) for s in sup]
    return LemmaFrontier(deltas, factors, sup, passed, c1, c2, frontier, monotone)


def empirical_c2(tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """``c2_emp`` from the default lemma grid."""
    fr = lemma1_sweep(tail_tol=tail_tol)
    if fr.c2_emp is None:
        raise RuntimeError("default lemma grid has no passing region")
    return fr.c2_emp


# -- bound ratio sweep -----------------------------------------------------------------


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num == 0 else math.inf


def bound_ratio_sweep(rows: Sequence[ArrayRow], family: str = "", tail_tol: float = DEFAULT_TAIL_TOL) -> list[dict]:
    """Exact left-hand sides against the bound shapes, one record per row."""
    out = []
    for row in rows:
        F = row_convolution(row)
        G = accompanying_law(row, CenteringRule.u_mean(), tail_tol)
        bb = bound_budget(row)
        lev = levy_distance(F, G)
        pi = prokhorov_distance(F, G)
        tv = total_variation(F, G)
        out.append(
            {
                "family": family,
                "j": row.j,
                "n": row.n,
                "p_j": bb.p_j,
                "tau_j": bb.tau_j,
                "sum_p_sq": bb.sum_p_sq,
                "logstar_term": bb.logstar_term,
                "levy": lev.value,
                "pi_value": pi.value,
                "pi_lower": pi.lower,
                "pi_upper": pi.upper,
                "pi_method": pi.method,
                "tv": tv.value,
                "ratio_levy": _ratio(lev.upper, bb.levy_rhs),
                "ratio_pi": _ratio(pi.upper, bb.levy_rhs),
                "ratio_pi_sum": _ratio(pi.upper, bb.prokhorov_rhs),
            }
        )
    return out


def example1_rows(js: Sequence[int], c2: float) -> list[ArrayRow]:
    return [example1_row(j, n_for_example1(j, c2)) for j in js]


def example2_rows(js: Sequence[int], c2: float) -> list[ArrayRow]:
    return [example2_row(j, n_for_example2(j, c2)) for j in js]


def report_dict(report: ExampleReport) -> dict:
    d = asdict(report)
    for key in ("pi_F_D", "pi_F_G"):
        if d[key] is not None:
            d[key] = dict(d[key])
    return d
