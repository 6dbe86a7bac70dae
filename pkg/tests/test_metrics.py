import math

import numpy as np
import pytest
from hypothesis import given

from conftest import lattice_dists
from oracles import KOLMOGOROV_BIN2_POI1, TV_BIN2_POI1, levy_on_grid, prokhorov_by_subsets
from cpapprox.compound import poisson
from cpapprox.flow import dinic_transport, interval_transport
from cpapprox.lattice import binomial, delta, from_atoms, reflect, shift, use_limits
from cpapprox.metrics import (
    FlowCapExceeded,
    IntervalUnion,
    LatticeNeighborhood,
    MetricResult,
    all_metrics,
    brute_force_prokhorov,
    certified_prokhorov_floor,
    kolmogorov_distance,
    lattice_neighborhood_mass,
    levy_distance,
    prokhorov_distance,
    prokhorov_fallback,
    prokhorov_lower_bound,
    sup_shifted_lattice_mass,
    total_variation,
)

E0, E3 = delta(0.0), delta(0.3)


def test_point_masses():
    assert total_variation(E0, E3).value == 1.0
    assert kolmogorov_distance(E0, E3).value == 1.0
    assert levy_distance(E0, E3).value == pytest.approx(0.3, abs=1e-10)
    assert prokhorov_distance(E0, E3).value == pytest.approx(0.3, abs=1e-12)
    # far apart: both distances saturate at 1
    assert levy_distance(E0, delta(2.0)).value == pytest.approx(1.0, abs=1e-10)
    assert prokhorov_distance(E0, delta(2.0)).value == pytest.approx(1.0)


def test_small_mass_moved_far():
    F = from_atoms({0.0: 0.9, 5.0: 0.1})
    assert levy_distance(E0, F).value == pytest.approx(0.1, abs=1e-10)
    assert prokhorov_distance(E0, F).value == pytest.approx(0.1, abs=1e-12)
    assert total_variation(E0, F).value == pytest.approx(0.1)


def test_half_mass_example():
    F = from_atoms({0: 0.5, 1: 0.5})
    G = from_atoms({0: 0.5, 2: 0.5})
    for method in ("flow", "greedy"):
        assert prokhorov_distance(F, G, method=method).value == pytest.approx(0.5, abs=1e-12)
    assert prokhorov_by_subsets(F, G) == pytest.approx(0.5)


def test_binomial_poisson_against_frozen_oracle():
    B, P = binomial(2, 0.5), poisson(1.0)
    tv = total_variation(B, P)
    assert tv.lower <= TV_BIN2_POI1 + 1e-15 and TV_BIN2_POI1 <= tv.upper + 1e-15
    assert tv.value == pytest.approx(TV_BIN2_POI1, abs=1e-12)
    assert kolmogorov_distance(B, P).value == pytest.approx(KOLMOGOROV_BIN2_POI1, abs=1e-12)


def test_identical_inputs_are_at_distance_zero():
    B = binomial(5, 0.3)
    for res in all_metrics(B, B).values():
        assert res.value == 0.0


def test_metric_result_validates_bracket():
    with pytest.raises(ValueError):
        MetricResult(0.5, 0.6, 0.7, "x")
    assert MetricResult(0.5, 0.4, 0.7, "x").width == pytest.approx(0.3)


def test_flow_cap_and_fallback():
    B, P = binomial(10, 0.5), poisson(5.0)
    with use_limits(flow_cap=10):
        with pytest.raises(FlowCapExceeded):
            prokhorov_distance(B, P, method="flow")
        auto = prokhorov_distance(B, P)
    assert auto.method == "interval-greedy"
    exact = prokhorov_distance(B, P, method="flow")
    assert auto.value == pytest.approx(exact.value, abs=1e-9)
    br = prokhorov_fallback(B, P)
    assert br.lower <= exact.value <= br.upper
    with pytest.raises(ValueError):
        prokhorov_distance(B, P, method="simplex")


def test_witness_coupling():
    F, G = from_atoms({0: 0.5, 1: 0.5}), from_atoms({0: 0.5, 2: 0.5})
    res, wit = prokhorov_distance(F, G, witness=True)
    moved = sum(m for _, _, m in wit.pairs)
    assert moved >= 1 - res.value - 1e-12
    xf, yg = F.atoms, G.atoms
    assert all(abs(xf[i] - yg[k]) <= res.value + 1e-12 for i, k, _ in wit.pairs)


def test_transport_solvers_agree_on_example():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.5, 2.5])
    a = np.array([0.2, 0.5, 0.3])
    b = np.array([0.6, 0.4])
    for eps in (0.0, 0.5, 1.0, 2.5):
        assert interval_transport(x, a, y, b, eps) == pytest.approx(dinic_transport(x, a, y, b, eps), abs=1e-15)


def test_neighbourhoods_and_certificates():
    F = from_atoms({0: 0.5, 1: 0.5})
    G = from_atoms({0.5: 1.0})
    Z = LatticeNeighborhood(1.0, 0.0)
    assert Z.mass(F) == 1.0 and Z.mass(G) == 0.0
    assert prokhorov_lower_bound(F, G, Z, 0.4)
    assert not prokhorov_lower_bound(F, G, Z, 0.5)
    floor = certified_prokhorov_floor(F, G, Z)
    assert floor == pytest.approx(0.5, abs=1e-8)
    assert floor <= prokhorov_distance(F, G).value
    I = IntervalUnion(((-0.1, 0.1),))
    assert I.mass(F) == 0.5 and I.expand(0.5).mass(G) == 1.0
    with pytest.raises(ValueError):
        IntervalUnion(((1.0, 0.0),))
    with pytest.raises(TypeError):
        prokhorov_lower_bound(F, G, {0.0}, 0.1)


def test_lattice_neighbourhood_boundary_is_closed():
    F = from_atoms({0.125: 0.5, 0.5: 0.5})
    assert lattice_neighborhood_mass(F, 1.0, 0.125) == 0.5


def test_sup_shifted_examples():
    F = from_atoms({0.0: 0.5, 0.5: 0.5})
    assert sup_shifted_lattice_mass(F, 1.0, 0.125)[0] == 0.5
    G = from_atoms({0.0: 0.3, 0.2: 0.3, 0.9: 0.4})
    value, x = sup_shifted_lattice_mass(G, 1.0, 0.125)
    assert value == pytest.approx(0.7)
    assert lattice_neighborhood_mass(G, 1.0, 0.125, center=x) == pytest.approx(value)
    with pytest.raises(ValueError):
        sup_shifted_lattice_mass(G, 1.0, 0.5)


@given(lattice_dists(max_atoms=6, step=0.1))
def test_sup_shifted_invariances(F):
    v = sup_shifted_lattice_mass(F, 1.0, 0.125)[0]
    assert sup_shifted_lattice_mass(reflect(F), 1.0, 0.125)[0] == v
    assert sup_shifted_lattice_mass(shift(F, 3.0), 1.0, 0.125)[0] == v
    # dense scan over window positions never beats the reported sup
    for c in np.linspace(0, 1, 101):
        assert lattice_neighborhood_mass(F, 1.0, 0.125, center=c) <= v + 1e-12


@given(lattice_dists(max_atoms=5), lattice_dists(max_atoms=5))
def test_prokhorov_matches_subset_oracle(F, G):
    ref = prokhorov_by_subsets(F, G)
    assert prokhorov_distance(F, G, method="flow").value == pytest.approx(ref, abs=1e-8)
    assert prokhorov_distance(F, G, method="greedy").value == pytest.approx(ref, abs=1e-8)
    assert brute_force_prokhorov(F, G) == pytest.approx(ref, abs=1e-8)


@given(lattice_dists(max_atoms=4), lattice_dists(max_atoms=4))
def test_levy_matches_grid_oracle(F, G):
    assert levy_distance(F, G).value == pytest.approx(levy_on_grid(F, G), abs=1e-8)


@given(lattice_dists(), lattice_dists())
def test_metric_axioms_and_ordering(F, G):
    m = all_metrics(F, G)
    r = all_metrics(G, F)
    slack = 1e-9
    for k in m:
        assert 0.0 <= m[k].value <= 1.0
        assert m[k].value == pytest.approx(r[k].value, abs=slack)
    assert m["levy"].value <= m["prokhorov"].value + slack
    assert m["prokhorov"].value <= m["tv"].value + slack
    assert m["levy"].value <= m["kolmogorov"].value + slack
    assert m["kolmogorov"].value <= m["tv"].value + slack


@given(lattice_dists(max_atoms=4), lattice_dists(max_atoms=4), lattice_dists(max_atoms=4))
def test_triangle_inequality(F, G, H):
    for fn in (total_variation, levy_distance, prokhorov_distance):
        assert fn(F, H).value <= fn(F, G).value + fn(G, H).value + 1e-8


@given(lattice_dists(), lattice_dists())
def test_shift_invariance(F, G):
    for fn in (total_variation, kolmogorov_distance, levy_distance, prokhorov_distance):
        assert fn(shift(F, 1.75), shift(G, 1.75)).value == pytest.approx(fn(F, G).value, abs=1e-8)


def test_levy_below_kolmogorov_on_poisson_pair():
    P, Q = poisson(4.0), poisson(4.5)
    assert levy_distance(P, Q).value <= kolmogorov_distance(P, Q).value + 1e-12
    assert math.isfinite(prokhorov_distance(P, Q).value)
