import itertools

import numpy as np
import pytest

from hopsat.cnf import CnfFormula, count_unsat, evaluate, generate_random_3sat
from hopsat.energy import eval_energy, flip_delta, pubo_from_cnf, quadratize
from hopsat.solvers import (AnnealSchedule, ConfigError, PuboSolverConfig, QuboSolverConfig,
                            qubo_sat_while_positive, run_pubo_classic, run_pubo_focus_offset,
                            run_qubo, substreams)
from helpers import satisfiable
from oracles import all_assignments


@pytest.fixture(scope="module")
def uf20():
    # uf20 shape: 20 variables, 91 clauses
    return [f for _, f in satisfiable(20, 4.55, 3, first_seed=500)]


def qcfg(steps=500, groups=8, t0=1.5, seed=0, **kw):
    return QuboSolverConfig(groups, AnnealSchedule(t0, max(steps, 1)), steps, seed=seed, **kw)


# -- schedule and config ------------------------------------------------------

def test_linear_schedule_reaches_zero():
    s = AnnealSchedule(2.0, 5)
    assert list(s.temperatures(0, 7)) == [2.0, 1.5, 1.0, 0.5, 0.0, 0.0, 0.0]


def test_geometric_schedule_clamped():
    s = AnnealSchedule(1.0, 4, "geometric", 0.5)
    t = s.temperatures(0, 5)
    assert list(t) == [1.0, 0.5, 0.25, 0.0, 0.0]
    assert np.all(np.diff(t) <= 0)


@pytest.mark.parametrize("make", [
    lambda: AnnealSchedule(-1.0, 10),
    lambda: AnnealSchedule(1.0, 10, "geometric", 1.5),
    lambda: QuboSolverConfig(0, AnnealSchedule(1.0, 10), 10),
    lambda: QuboSolverConfig(2, AnnealSchedule(1.0, 10), 10, sat_check_period=0),
    lambda: PuboSolverConfig("classic", 10, e_offset_increment=0.5),
    lambda: PuboSolverConfig("focus_offset", 10, e_offset_increment=0.0),
    lambda: PuboSolverConfig("greedy", 10),
])
def test_invalid_configs(make):
    with pytest.raises(ConfigError):
        make()


def test_focus_offset_default_increment():
    assert PuboSolverConfig("focus_offset", 10).e_offset_increment == 0.5


def test_rule_mismatch(example_formula):
    p = pubo_from_cnf(example_formula)
    with pytest.raises(ConfigError):
        run_pubo_classic(example_formula, p, PuboSolverConfig("focus_offset", 10))
    with pytest.raises(ConfigError):
        run_pubo_focus_offset(example_formula, p, PuboSolverConfig("classic", 10))


def test_qubo_model_mismatch(example_formula):
    other = quadratize(generate_random_3sat(5, 1.0, 0))
    with pytest.raises(ValueError):
        run_qubo(example_formula, other, qcfg())
    with pytest.raises(ConfigError):
        run_qubo(example_formula, quadratize(example_formula), qcfg(groups=7))


def test_substreams_are_distinct_and_reproducible():
    a, b = substreams(42), substreams(42)
    draws = {k: a[k].integers(0, 2**32, 4).tolist() for k in a}
    assert draws == {k: b[k].integers(0, 2**32, 4).tolist() for k in b}
    assert len({tuple(v) for v in draws.values()}) == 4


# -- QUBO ---------------------------------------------------------------------

def test_qubo_halts_when_initial_state_satisfies(example_formula):
    q = quadratize(example_formula)
    r = run_qubo(example_formula, q, qcfg(groups=2, sat_check_period=3), initial_state=[1, 1, 0, 1])
    assert r.solved and r.steps_taken <= 3
    assert r.final_state.shape == (6,)


def test_qubo_zero_temperature_sequential_is_descent(uf20):
    f = uf20[0]
    q = quadratize(f, 1.0)
    for seed in range(5):
        r = run_qubo(f, q, qcfg(steps=50, groups=q.n_vars, t0=0.0, seed=seed), trace=True)
        assert np.all(np.diff(r.trace[:, 0]) <= 0)


def test_qubo_solves_uf20_and_is_deterministic(uf20):
    for f in uf20:
        q = quadratize(f, 1.0)
        runs = [run_qubo(f, q, qcfg(steps=1000, seed=s)) for s in range(100)]
        assert sum(r.solved for r in runs) > 0
        for s in (0, 7, 42):
            again = run_qubo(f, q, qcfg(steps=1000, seed=s))
            assert again.to_json() == runs[s].to_json()
        for r in runs:
            if r.solved:
                assert evaluate(f, r.final_state[:f.n_vars])


def test_qubo_trace_and_energy_bookkeeping(uf20):
    f = uf20[1]
    q = quadratize(f, 0.5)
    r = run_qubo(f, q, qcfg(steps=300, seed=3), trace=True)
    assert r.trace.shape == (r.steps_taken + 1, 2)
    assert r.final_energy == pytest.approx(eval_energy(q, r.final_state), abs=1e-9)
    assert r.trace[-1, 1] == count_unsat(f, r.final_state[:f.n_vars])
    assert r.trace_csv().splitlines()[0] == "step,energy,unsat"


def test_qubo_metropolis_switch(uf20):
    f = uf20[0]
    q = quadratize(f, 1.0)
    r = run_qubo(f, q, qcfg(steps=1000, t0=0.5, acceptance="metropolis", seed=1))
    assert r.final_energy == pytest.approx(eval_energy(q, r.final_state))


def test_qubo_long_run_passes_drift_checkpoints(uf20):
    f = uf20[2]
    q = quadratize(f, 0.5)
    r = run_qubo(f, q, qcfg(steps=10_500, t0=5.0, seed=9, sat_check_period=10**9))
    assert r.steps_taken == 10_500
    assert r.final_energy == pytest.approx(eval_energy(q, r.final_state), abs=1e-9)


def test_sat_checker_events_recorded(uf20):
    """The checker may stop runs whose QUBO energy is still positive; count, don't require."""
    events = 0
    for f in uf20:
        q = quadratize(f, 0.5)
        for s in range(30):
            r = run_qubo(f, q, qcfg(steps=500, seed=s, penalty_P=0.5))
            events += qubo_sat_while_positive(r)
            if qubo_sat_while_positive(r):
                assert evaluate(f, r.final_state[:f.n_vars])
    print(f"SAT-checker stops with positive QUBO energy at P=0.5: {events}/90")
    assert events >= 0


def test_run_result_json(example_formula):
    r = run_qubo(example_formula, quadratize(example_formula), qcfg(groups=3, seed=5))
    d = r.to_dict()
    assert set(d) == {"solved", "steps_taken", "final_energy", "final_state", "seed"}
    assert len(d["final_state"]) == 6 and d["seed"] == 5


# -- PUBO classic ---------------------------------------------------------------

def test_classic_already_solved(example_formula):
    p = pubo_from_cnf(example_formula)
    r = run_pubo_classic(example_formula, p, PuboSolverConfig("classic", 100), initial_state=[1, 1, 0, 1])
    assert r.solved and r.steps_taken == 0


def test_classic_single_clause_solves_fast():
    f = CnfFormula.from_ints(3, [[1, 2, 3]])
    p = pubo_from_cnf(f)
    # only (0,0,0) is unsatisfying; each flip from it is improving, hit w.p. 1 per step
    for seed in range(20):
        r = run_pubo_classic(f, p, PuboSolverConfig("classic", 50, seed=seed), initial_state=[0, 0, 0])
        assert r.solved and r.steps_taken == 1


def test_classic_trace_nonincreasing_and_deterministic(uf20):
    f = uf20[0]
    p = pubo_from_cnf(f)
    for seed in range(10):
        cfg = PuboSolverConfig("classic", 3000, seed=seed)
        r = run_pubo_classic(f, p, cfg, trace=True)
        assert np.all(np.diff(r.trace[:, 0]) <= 0)
        assert np.array_equal(r.trace[:, 0], r.trace[:, 1])  # E equals unsat count
        assert run_pubo_classic(f, p, cfg).to_json() == r.to_json()
        assert r.solved == (r.final_energy == 0) == evaluate(f, r.final_state)


def test_classic_long_run_drift_checkpoints():
    # unsatisfiable: all 8 sign patterns on one triple
    clauses = [[a * 1, b * 2, c * 3] for a, b, c in itertools.product((1, -1), repeat=3)]
    f = CnfFormula.from_ints(3, clauses)
    r = run_pubo_classic(f, pubo_from_cnf(f), PuboSolverConfig("classic", 25_000, seed=1))
    assert not r.solved and r.steps_taken == 25_000 and r.final_energy == 1


# -- PUBO focus/offset ----------------------------------------------------------

def strict_local_minimum_instance():
    """Search 4-variable formulas for a non-solution whose cheapest flip costs exactly 2."""
    for seed in range(5000):
        f = generate_random_3sat(4, 5.0, seed)
        p = pubo_from_cnf(f)
        for x in all_assignments(4):
            e = eval_energy(p, x)
            deltas = [flip_delta(p, x, i).delta_e for i in range(4)]
            if e > 0 and min(deltas) == 2:
                return f, p, x, deltas
    raise AssertionError("no instance found")


def test_focus_offset_escapes_strict_minimum_after_two_offsets():
    f, p, x, deltas = strict_local_minimum_instance()
    e0 = eval_energy(p, x)
    for seed in range(10):
        cfg = PuboSolverConfig("focus_offset", 3, seed=seed, e_offset_increment=1.0)
        r = run_pubo_focus_offset(f, p, cfg, initial_state=x, trace=True)
        assert list(r.trace[:, 0]) == [e0, e0, e0, e0 + 2]
        flipped = np.flatnonzero(r.final_state != x)
        assert len(flipped) == 1 and deltas[flipped[0]] == 2


def test_focus_offset_plateau_flips_immediately():
    # x3 appears in no clause, so flipping it is a zero-cost candidate at offset 0
    f = CnfFormula.from_ints(4, [[1, 2, 3], [1, 2, -3], [1, -2, 3], [1, -2, -3]])
    p = pubo_from_cnf(f)
    x = np.array([0, 0, 0, 0])
    assert flip_delta(p, x, 3).delta_e == 0 and eval_energy(p, x) == 1
    for seed in range(10):
        r = run_pubo_focus_offset(f, p, PuboSolverConfig("focus_offset", 1, seed=seed),
                                  initial_state=x, trace=True)
        assert r.steps_taken == 1
        assert not np.array_equal(r.final_state, x)


def test_focus_offset_deterministic_and_sound(uf20):
    for f in uf20:
        p = pubo_from_cnf(f)
        for seed in range(20):
            cfg = PuboSolverConfig("focus_offset", 5000, seed=seed)
            r = run_pubo_focus_offset(f, p, cfg, trace=True)
            assert run_pubo_focus_offset(f, p, cfg, trace=True).to_json() == r.to_json()
            if r.solved:
                assert evaluate(f, r.final_state) and r.final_energy == 0


def test_focus_offset_increase_only_after_offset():
    f, p, x, _ = strict_local_minimum_instance()
    cfg = PuboSolverConfig("focus_offset", 200, seed=3, e_offset_increment=0.5)
    r = run_pubo_focus_offset(f, p, cfg, initial_state=x, trace=True)
    e = r.trace[:, 0]
    for k in range(1, len(e)):
        if e[k] > e[k - 1]:
            assert k >= 2 and e[k - 1] == e[k - 2], "uphill move without a preceding offset step"
