import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopsat.cnf import CnfFormula, count_unsat, generate_random_3sat
from hopsat.energy import pubo_from_cnf, quadratize
from hopsat.landscape import (GwlConfig, Valley, average_stats, bits_of, build_qubo_connectivity,
                              discard_saddles, enumerate_valleys_exhaustive, gwl_sample_valleys,
                              key_of, plateau_valley, qubo_transition_prob,
                              valley_entropy_complexity)
from oracles import brute_transition_p, flood_valleys


def unsat_of(formula):
    return lambda k: count_unsat(formula, bits_of(k, formula.n_vars))


def as_sets(valleys):
    return {(frozenset(v.configs), v.energy, v.is_local_min) for v in valleys}


def test_key_roundtrip():
    x = np.array([1, 0, 1, 1, 0])
    assert key_of(x) == 0b01101
    assert list(bits_of(key_of(x), 5)) == list(x)


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_matches_flood_oracle(seed):
    f = generate_random_3sat(10, 4.23, seed)
    got = enumerate_valleys_exhaustive(pubo_from_cnf(f), 4)
    want = flood_valleys(unsat_of(f), 10, 4)
    assert as_sets(got) == {(c, float(e), lm) for c, e, lm in want}
    for v in got:
        assert all(count_unsat(f, bits_of(k, 10)) == v.energy for k in v.configs)


def test_single_clause_valleys():
    f = CnfFormula.from_ints(3, [[1, 2, 3]])
    vs = enumerate_valleys_exhaustive(pubo_from_cnf(f), 2)
    assert [(v.size, v.energy, v.is_local_min) for v in vs] == [(7, 0.0, True), (1, 1.0, False)]
    assert discard_saddles(vs) == vs[:1]


def test_empty_formula_is_one_valley():
    vs = enumerate_valleys_exhaustive(pubo_from_cnf(CnfFormula(4, ())), 3)
    assert len(vs) == 1 and vs[0].size == 16
    stats = valley_entropy_complexity(vs, 4)
    assert stats.entropies == [pytest.approx(math.log(2))]
    assert list(stats.sigma.values()) == [0.0]


def test_duplicate_clauses_keep_valley_structure():
    f = generate_random_3sat(8, 3.0, seed=1)
    g = CnfFormula(8, f.clauses + f.clauses)
    a = enumerate_valleys_exhaustive(pubo_from_cnf(f), 3)
    b = enumerate_valleys_exhaustive(pubo_from_cnf(g), 5)
    assert {(v.configs, v.is_local_min) for v in a} <= {(v.configs, v.is_local_min) for v in b}
    for v in a:
        assert 2 * v.energy in {w.energy for w in b if w.configs == v.configs}


def test_plateau_valley_matches_exhaustive():
    f = generate_random_3sat(12, 4.23, seed=3)
    p = pubo_from_cnf(f)
    for v in enumerate_valleys_exhaustive(p, 3):
        w = plateau_valley(p, v.configs[-1])
        assert w == v


def test_exhaustive_limits():
    with pytest.raises(ValueError):
        enumerate_valleys_exhaustive(pubo_from_cnf(CnfFormula(30, ())), 1)
    with pytest.raises(ValueError):
        gwl_sample_valleys(pubo_from_cnf(CnfFormula(70, ())), 1)


@pytest.mark.parametrize("seed", range(3))
def test_gwl_matches_exhaustive_lowest_levels(seed):
    f = generate_random_3sat(14, 4.23, seed + 20)
    p = pubo_from_cnf(f)
    exact = discard_saddles(enumerate_valleys_exhaustive(p, 4))
    got = gwl_sample_valleys(p, None, GwlConfig(seed=seed, n_levels=4))
    levels = sorted({v.energy for v in exact})
    assert {v.configs for v in got} == {v.configs for v in exact if v.energy in levels}


def test_gwl_reproducible_and_seed_stable_on_lowest_level():
    f = generate_random_3sat(14, 4.23, seed=40)
    p = pubo_from_cnf(f)
    a = gwl_sample_valleys(p, None, GwlConfig(seed=1, n_levels=2))
    b = gwl_sample_valleys(p, None, GwlConfig(seed=1, n_levels=2))
    c = gwl_sample_valleys(p, None, GwlConfig(seed=2, n_levels=2))
    assert a.valleys == b.valleys and a.steps == b.steps
    low = min(v.energy for v in a)
    assert {v.configs for v in a if v.energy == low} == {v.configs for v in c if v.energy == low}


def test_gwl_single_valley_request_is_ground_state():
    f = generate_random_3sat(12, 3.0, seed=4)
    p = pubo_from_cnf(f)
    res = gwl_sample_valleys(p, 1, GwlConfig(seed=0, n_levels=1))
    assert len(res) == 1 and not res.partial
    assert res.valleys[0].energy == min(v.energy for v in enumerate_valleys_exhaustive(p, 1))


def test_gwl_reports_partial():
    p = pubo_from_cnf(CnfFormula(6, ()))
    res = gwl_sample_valleys(p, 5, GwlConfig(seed=0))
    assert res.partial and len(res) == 1


def valley_pairs(f, limit):
    p = pubo_from_cnf(f)
    n = f.n_vars
    out = []
    for v in enumerate_valleys_exhaustive(p, 3):
        members = set(v.configs)
        for k in v.configs:
            for b in range(n):
                if k ^ (1 << b) in members and len(out) < limit:
                    out.append((v.energy, bits_of(k, n), bits_of(k ^ (1 << b), n)))
    return out


@pytest.mark.parametrize("P", [0.5, 1.0, 2.0])
def test_transition_prob_matches_brute_force(P):
    f = generate_random_3sat(8, 1.5, seed=2)  # 12 clauses
    q = quadratize(f, P)
    for e, xa, xb in valley_pairs(f, 12):
        for T in (0.05, 0.5, 3.0, math.inf, 0.0):
            est = qubo_transition_prob(q, xa, xb, T)
            n_y, p = brute_transition_p(f.to_ints(), P, e, xa, xb, T)
            assert est.n_y == n_y
            assert abs(est.p - p) <= 1e-12


def test_transition_prob_cap_applies_to_total_delta():
    # x=(0,1,0,...) -> flip x2: per-clause dE of mixed sign under P=1, so the
    # capped average is not a product of per-clause averages
    f = generate_random_3sat(8, 1.5, seed=300)
    q = quadratize(f, 1.0)
    xa, xb = bits_of(2, 8), bits_of(6, 8)
    e = count_unsat(f, xa)
    assert e == count_unsat(f, xb) == 2
    n_y, p = brute_transition_p(f.to_ints(), 1.0, e, xa, xb, 0.5)
    est = qubo_transition_prob(q, xa, xb, 0.5)
    assert est.n_y == n_y == 4
    assert est.p == pytest.approx(p, abs=1e-12) and p == pytest.approx(0.5676676416, abs=1e-9)


def test_transition_prob_limits_and_monotone():
    f = generate_random_3sat(10, 2.0, seed=5)
    q = quadratize(f, 1.0)
    for _, xa, xb in valley_pairs(f, 10):
        ps = [qubo_transition_prob(q, xa, xb, T).p for T in (0.01, 0.1, 1.0, 10.0, math.inf)]
        assert ps[-1] == 1.0
        assert all(a <= b + 1e-15 for a, b in zip(ps, ps[1:]))


def test_transition_prob_rejects_bad_pairs(example_formula):
    q = quadratize(example_formula)
    with pytest.raises(ValueError):
        qubo_transition_prob(q, [0, 0, 0, 0], [1, 1, 0, 0], 1.0)
    with pytest.raises(ValueError):  # energies differ: 1 vs 0
        qubo_transition_prob(q, [0, 0, 0, 0], [0, 0, 1, 0], 1.0)


def test_connectivity_singletons_and_infinite_temperature():
    f = generate_random_3sat(10, 4.23, seed=6)
    p, q = pubo_from_cnf(f), quadratize(f, 1.0)
    vs = discard_saddles(enumerate_valleys_exhaustive(p, 3))
    comps = build_qubo_connectivity(vs, q, math.inf)
    assert sorted(map(sorted, comps)) == sorted(sorted(v.configs) for v in vs)
    cold = build_qubo_connectivity(vs, q, 0.05)
    assert len(cold) >= len(vs)
    assert sorted(k for c in cold for k in c) == sorted(k for v in vs for k in v.configs)
    single = Valley((5,), 1.0, True)
    assert build_qubo_connectivity([single], q, 0.05) == [(5,)]


def test_connectivity_bernoulli_reproducible():
    f = generate_random_3sat(10, 4.23, seed=7)
    p, q = pubo_from_cnf(f), quadratize(f, 0.5)
    vs = discard_saddles(enumerate_valleys_exhaustive(p, 3))
    a = build_qubo_connectivity(vs, q, 0.3, "bernoulli", seed=3)
    assert a == build_qubo_connectivity(vs, q, 0.3, "bernoulli", seed=3)
    with pytest.raises(ValueError):
        build_qubo_connectivity(vs, q, 0.3, "bernoulli")
    with pytest.raises(ValueError):
        build_qubo_connectivity(vs, q, 0.3, "sometimes")


def test_entropy_and_complexity_examples():
    st_ = valley_entropy_complexity([148], 50)
    assert st_.entropies[0] == pytest.approx(math.log(148) / 50)
    assert st_.entropies[0] == pytest.approx(0.1, abs=1e-3)
    two = valley_entropy_complexity([148, 140], 50)
    assert list(two.sigma.values()) == [pytest.approx(math.log(2) / 50)]
    assert two.sigma[9] == pytest.approx(0.01386, abs=1e-5)


def test_average_stats():
    a = valley_entropy_complexity([2, 2, 4], 4, bin_width=0.1)
    b = valley_entropy_complexity([2], 4, bin_width=0.1)
    avg = average_stats([a, b])
    assert avg.sigma[1] == pytest.approx((math.log(2) / 4 + 0.0) / 2)
    assert avg.counts[1] == 3 and avg.meta["n_instances"] == 2
    with pytest.raises(ValueError):
        average_stats([a, valley_entropy_complexity([2], 4, bin_width=0.2)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(6, 10))
def test_valleys_partition_their_levels(seed, n):
    f = generate_random_3sat(n, 4.0, seed)
    vs = enumerate_valleys_exhaustive(pubo_from_cnf(f), 3)
    members = [k for v in vs for k in v.configs]
    assert len(members) == len(set(members))
    levels = {v.energy for v in vs}
    on_levels = [k for k in range(1 << n) if count_unsat(f, bits_of(k, n)) in levels]
    assert sorted(members) == on_levels
