import json
import math

import numpy as np
import pytest

from oracles import TV_BIN128_POI32, TV_BIN32_POI4
from cpapprox.accompanying import ArrayRow, MixtureComponent
from cpapprox.experiments import (
    HALFWIDTH,
    MASS_THRESHOLD,
    bound_ratio_sweep,
    empirical_c2,
    example1_rows,
    example2_rows,
    lattice_sup,
    lemma1_sweep,
    n_for_example1,
    n_for_example2,
    report_dict,
    run_example1,
    run_example2,
)
from cpapprox.lattice import delta


@pytest.fixture(scope="module")
def frontier():
    return lemma1_sweep()


@pytest.fixture(scope="module")
def c2(frontier):
    return frontier.c2_emp


@pytest.fixture(scope="module")
def ex1(c2):
    return run_example1(8, c2)


@pytest.fixture(scope="module")
def ex2(c2):
    return run_example2(4, c2)


def test_n_choices():
    assert n_for_example1(8, 0.25) == 32
    assert n_for_example2(4, 0.25) == 128
    assert n_for_example1(3, 0.3) == math.ceil(2 * 0.3 * 9)


def test_frontier_is_consistent(frontier):
    assert frontier.c1_emp is not None and frontier.c2_emp is not None
    assert frontier.consistent()
    assert not frontier.passed[0].any()  # delta = 1 fails everywhere
    i = frontier.deltas.index(frontier.c1_emp)
    for ii in range(i, len(frontier.deltas)):
        for k, f in enumerate(frontier.factors):
            if f >= frontier.c2_emp:
                assert frontier.sup[ii, k] <= MASS_THRESHOLD + 1e-9
    assert empirical_c2() == frontier.c2_emp


def test_lemma_interior_point_and_coarse_failure():
    assert lattice_sup(10.0, 100.0 * 100.0) <= 5 / 8
    assert lattice_sup(1.0, 0.5) > 5 / 8


def test_sweep_input_checks():
    with pytest.raises(ValueError):
        lemma1_sweep([0.5, 2.0], [1.0])
    with pytest.raises(ValueError):
        lemma1_sweep([], [1.0])


def test_example1_reproduction(ex1):
    assert ex1.n_j == 32 and ex1.p_j == 0.125
    assert ex1.F_mass_on_Z == 1.0 and ex1.F_on_integers
    assert ex1.D_mass_on_Z18 <= 5 / 8 + 1e-9
    assert ex1.pi_lower_certified and ex1.pi_lower_floor >= 1 / 8
    assert ex1.chain_ok
    assert ex1.sup_W_shifted == ex1.sup_W_reflected
    assert ex1.decomposition_error < 1e-12
    assert ex1.tv_F_G == pytest.approx(TV_BIN32_POI4, abs=1e-12)
    assert ex1.tv_F_G <= ex1.p_j
    assert ex1.pi_F_D.lower >= ex1.pi_lower_floor - 1e-9
    assert ex1.pi_F_G.value <= ex1.tv_F_G + 1e-9
    assert not ex1.D_equals_G and not ex1.degraded


def test_example1_small_tau_collapses(c2):
    r = run_example1(8, c2, tau=0.5, compute_pi=False)
    assert r.center_a == r.center_b == 0.0
    assert r.D_equals_G


def test_example2_reproduction(ex2, ex1):
    assert ex2.n_j == 128
    assert ex2.F_mass_on_Z == 1.0 and ex2.F_on_integers
    assert ex2.pi_lower_floor > 0.05
    assert ex2.pi_F_D.lower >= ex2.pi_lower_floor - 1e-9
    assert ex2.tv_F_G == pytest.approx(TV_BIN128_POI32, abs=1e-12)
    assert ex2.tv_F_G <= 0.25
    assert ex2.chain_ok and ex2.sup_W_shifted == ex2.sup_W_reflected


def test_example_tv_is_shift_invariant(c2):
    a = run_example1(4, c2, n=128, compute_pi=False)
    b = run_example2(4, c2, n=128, compute_pi=False)
    assert a.tv_F_G == b.tv_F_G


def test_example_argument_checks(c2):
    with pytest.raises(ValueError):
        run_example1(1, c2)
    with pytest.raises(ValueError):
        run_example2(2, c2)


def test_certification_follows_the_mass_bound(c2):
    for j in (4, 6, 8):
        r = run_example1(j, c2, compute_pi=False)
        if r.D_mass_on_Z18 <= 5 / 8:
            assert r.pi_lower_certified


def test_report_serialises(ex1):
    d = report_dict(ex1)
    json.dumps(d)
    assert d["pi_F_D"]["method"] in ("maxflow-dinic", "interval-greedy")
    claims = {c for _, _, c in ex1.rows()}
    assert {"eq1001", "eq1009", "eq1005"} <= claims


def test_bound_sweeps(c2):
    recs = bound_ratio_sweep(example1_rows(range(4, 9), c2), "example1")
    recs += bound_ratio_sweep(example2_rows(range(3, 6), c2), "example2")
    for r in recs:
        assert r["levy"] <= r["pi_value"] + 1e-9 <= r["tv"] + 2e-9
        assert r["pi_lower"] <= r["pi_value"] <= r["pi_upper"]
        assert 0 <= r["ratio_levy"] < 1 and 0 <= r["ratio_pi"] < 1


def test_bound_sweep_trivial_row():
    comp = MixtureComponent(0.0, delta(0.0), delta(0.0), 0.0)
    (rec,) = bound_ratio_sweep([ArrayRow(1, (comp,), (5,))])
    assert rec["levy"] == rec["pi_value"] == rec["tv"] == 0.0
    assert rec["ratio_levy"] == rec["ratio_pi"] == rec["ratio_pi_sum"] == 0.0


def test_halfwidth_constant():
    assert HALFWIDTH == 0.125 and MASS_THRESHOLD == 0.625
    assert np.isclose(lattice_sup(2.0, 4.0 * 64), 0.5)
