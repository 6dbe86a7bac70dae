import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import lattice_dists
from cpapprox.lattice import (
    AtomBudgetExceeded,
    IncommensurableError,
    LatticeDistribution,
    LatticeError,
    binomial,
    canonical,
    cdf,
    convolve,
    delta,
    from_atoms,
    mass_of_interval,
    max_atom_difference,
    mix,
    power,
    reflect,
    scale,
    shift,
    union_atoms,
    use_limits,
)


def test_delta_and_from_atoms():
    d = delta(2.5)
    assert len(d) == 1 and d.min_atom == 2.5 and d.mass == 1.0
    F = from_atoms({0.0: 0.25, 0.5: 0.5, 1.5: 0.25})
    assert F.step == pytest.approx(0.5)
    assert F.as_dict() == pytest.approx({0.0: 0.25, 0.5: 0.5, 1.5: 0.25})


def test_invalid_construction():
    with pytest.raises(LatticeError):
        LatticeDistribution(0.0, 1.0, np.array([0.5, 0.4]), 0.0)
    with pytest.raises(LatticeError):
        from_atoms({0.0: -0.1, 1.0: 1.1})
    with pytest.raises(LatticeError):
        LatticeDistribution(0.0, -1.0, np.array([0.5, 0.5]), 0.0)
    with pytest.raises(IncommensurableError):
        from_atoms({0.0: 0.4, 1.0: 0.3, math.pi: 0.3})


def test_binomial_matches_closed_form():
    B = binomial(2, 0.5)
    assert B.as_dict() == pytest.approx({0.0: 0.25, 1.0: 0.5, 2.0: 0.25}, abs=1e-15)
    B = binomial(40, 0.3)
    assert B.mean() == pytest.approx(12.0, rel=1e-12)
    assert B.variance() == pytest.approx(8.4, rel=1e-10)


def test_convolution_examples():
    coin = from_atoms({0.0: 0.5, 1.0: 0.5})
    assert convolve(coin, coin).as_dict() == pytest.approx({0.0: 0.25, 1.0: 0.5, 2.0: 0.25})
    assert max_atom_difference(power(coin, 10), binomial(10, 0.5)) < 1e-15
    assert power(coin, 0).as_dict() == {0.0: 1.0}
    # lattices with steps 1/2 and 1/3 meet on 1/6
    H = convolve(from_atoms({0: 0.5, 0.5: 0.5}), from_atoms({0: 0.5, 1 / 3: 0.5}))
    assert H.step == pytest.approx(1 / 6)
    assert sorted(H.as_dict()) == pytest.approx([0, 1 / 3, 0.5, 5 / 6])


def test_single_atom_operand_keeps_weights():
    F = from_atoms({0.0: 0.3, 2.0: 0.7})
    assert convolve(delta(1.0), F).as_dict() == pytest.approx({1.0: 0.3, 3.0: 0.7})


def test_mix_and_scale():
    M = mix(0.25, delta(0.0), delta(1.0))
    assert M.as_dict() == pytest.approx({0.0: 0.75, 1.0: 0.25})
    assert mix(0.0, delta(0.0), delta(1.0)).as_dict() == {0.0: 1.0}
    assert scale(M, -2).as_dict() == pytest.approx({0.0: 0.75, -2.0: 0.25})
    assert scale(M, 0).as_dict() == {0.0: 1.0}


def test_cdf_and_intervals():
    F = from_atoms({0.0: 0.25, 1.0: 0.5, 2.0: 0.25})
    assert cdf(F, -0.5) == 0.0
    assert cdf(F, 1.0) == 0.75
    assert cdf(F, 1.0 - 1e-15) == 0.75  # snapped onto the atom
    assert mass_of_interval(F, 0.0, 1.0) == 0.75
    assert mass_of_interval(F, 0.0, 1.0, closed=(False, False)) == 0.0


def test_atom_budget():
    coin = from_atoms({0.0: 0.5, 1.0: 0.5})
    with use_limits(atom_budget=50):
        with pytest.raises(AtomBudgetExceeded):
            power(coin, 100)
    P = power(coin, 100)
    # atoms below the weight floor are trimmed into dropped_mass
    assert len(P) < 101 and P.dropped_mass < 1e-14
    assert P.mean() == pytest.approx(50.0, rel=1e-12)


def test_canonical_trims_and_compresses():
    w = np.array([0.0, 1e-20, 0.5, 0.0, 0.5, 0.0])
    F = canonical(0.0, 1.0, w, 0.0)
    assert F.offset == 2.0 and F.step == 2.0 and len(F) == 2
    assert F.dropped_mass == pytest.approx(1e-20)


def test_serialization_roundtrip_is_bitwise():
    F = binomial(7, 1 / 3)
    G = LatticeDistribution.loads(F.dumps())
    assert G.offset == F.offset and G.step == F.step
    assert np.array_equal(G.weights, F.weights) and G.dropped_mass == F.dropped_mass
    data = json.loads(F.dumps())
    assert set(data) == {"offset", "step", "weights", "dropped_mass"}


@pytest.mark.parametrize(
    "text",
    ["not json", "[]", '{"offset": 0, "step": 1}', '{"offset": 0, "step": 1, "weights": [0.2], "dropped_mass": 0}'],
)
def test_loads_rejects_malformed(text):
    with pytest.raises(LatticeError):
        LatticeDistribution.loads(text)


@given(lattice_dists(), lattice_dists())
def test_convolution_commutes(F, G):
    assert max_atom_difference(convolve(F, G), convolve(G, F)) < 1e-14


@given(lattice_dists(), lattice_dists(), lattice_dists(max_atoms=3))
def test_convolution_associates(F, G, H):
    a = convolve(convolve(F, G), H)
    b = convolve(F, convolve(G, H))
    assert max_atom_difference(a, b) < 1e-13


@given(lattice_dists(), lattice_dists())
def test_convolution_moments_add(F, G):
    H = convolve(F, G)
    assert H.mass == pytest.approx(1.0, abs=1e-12)
    assert H.mean() == pytest.approx(F.mean() + G.mean(), abs=1e-12)
    assert H.variance() == pytest.approx(F.variance() + G.variance(), abs=1e-11)


@given(lattice_dists(), st.integers(0, 6))
def test_power_is_repeated_convolution(F, n):
    direct = delta(0.0)
    for _ in range(n):
        direct = convolve(direct, F)
    assert max_atom_difference(power(F, n), direct) < 1e-13


@given(lattice_dists(), st.sampled_from([-1.5, 0.25, 3.0]))
def test_shift_and_reflect(F, a):
    assert shift(F, a).mean() == pytest.approx(F.mean() + a, abs=1e-12)
    assert max_atom_difference(reflect(reflect(F)), F) == 0.0
    assert max_atom_difference(scale(F, -1.0), reflect(F)) < 1e-15


@given(lattice_dists())
def test_union_atoms_aligns(F):
    G = shift(F, 0.25)
    pos, (a, b) = union_atoms(F, G)
    assert np.all(np.diff(pos) > 0)
    assert a.sum() == pytest.approx(1.0) and b.sum() == pytest.approx(1.0)


@given(lattice_dists())
def test_roundtrip_property(F):
    G = LatticeDistribution.loads(F.dumps())
    assert max_atom_difference(F, G) == 0.0
