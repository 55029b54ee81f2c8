"""Hopfield-network 3-SAT solvers on the QUBO and PUBO energies.

Randomness
----------
Every run owns a :class:`numpy.random.SeedSequence` built from its 64-bit
seed, spawned into four independent PCG64 substreams in this fixed order:

0. initial state
1. group partitions (QUBO)
2. annealing noise (QUBO)
3. neuron picks / tie-breaks (PUBO)

Draws are made in fixed-size chunks of steps, so a trajectory depends only
on the seed and config, never on where a run stops.

Step units
----------
QUBO: one step is one full cycle through all groups. PUBO: one step is one
neuron selection (classic) or one flip-or-offset event (focus/offset).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal as Lit

import numpy as np

from . import _kernels as K
from .cnf import CnfFormula, count_unsat
from .energy import PuboEnergy, QuboModel, consistent_aux


class ConfigError(ValueError):
    pass


STREAMS = ("init", "partition", "noise", "tiebreak")
CHUNK = 256


def substreams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(c)) for name, c in zip(STREAMS, children)}


@dataclass(frozen=True)
class AnnealSchedule:
    t_initial: float
    total_steps: int
    shape: Lit["linear", "geometric"] = "linear"
    geometric_factor: float = 0.99

    def __post_init__(self):
        if self.t_initial < 0:
            raise ConfigError("t_initial must be >= 0")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.shape not in ("linear", "geometric"):
            raise ConfigError(f"unknown schedule shape {self.shape!r}")
        if self.shape == "geometric" and not 0 < self.geometric_factor < 1:
            raise ConfigError("geometric_factor must be in (0, 1)")

    def temperatures(self, start: int, count: int) -> np.ndarray:
        """Temperatures for steps ``start .. start+count-1``; 0 from the final step on."""
        k = np.arange(start, start + count, dtype=np.float64)
        last = self.total_steps - 1
        if self.shape == "linear":
            t = self.t_initial * (1.0 - k / last) if last > 0 else np.zeros(count)
        else:
            t = self.t_initial * self.geometric_factor ** k
        return np.where(k >= last, 0.0, np.maximum(t, 0.0))


@dataclass(frozen=True)
class QuboSolverConfig:
    n_groups: int
    schedule: AnnealSchedule
    max_steps: int
    seed: int = 0
    penalty_P: float = 1.0
    sat_check_period: int = 1
    acceptance: Lit["noise", "metropolis"] = "noise"

    def __post_init__(self):
        if self.n_groups < 1:
            raise ConfigError("n_groups must be >= 1")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.sat_check_period < 1:
            raise ConfigError("sat_check_period must be >= 1")
        if self.penalty_P <= 0:
            raise ConfigError("penalty_P must be > 0")
        if self.acceptance not in ("noise", "metropolis"):
            raise ConfigError(f"unknown acceptance {self.acceptance!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PuboSolverConfig:
    rule: Lit["classic", "focus_offset"]
    max_steps: int
    seed: int = 0
    e_offset_increment: float | None = None
    init: str = "uniform_random"

    def __post_init__(self):
        if self.rule not in ("classic", "focus_offset"):
            raise ConfigError(f"unknown rule {self.rule!r}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.rule == "focus_offset":
            if self.e_offset_increment is None:
                object.__setattr__(self, "e_offset_increment", 0.5)
            elif not self.e_offset_increment > 0:
                raise ConfigError("e_offset_increment must be > 0")
        elif self.e_offset_increment is not None:
            raise ConfigError("e_offset_increment only applies to rule='focus_offset'")
        if self.init != "uniform_random":
            raise ConfigError(f"unknown init {self.init!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    solved: bool
    steps_taken: int
    final_state: np.ndarray
    final_energy: float
    seed: int
    trace: np.ndarray | None = None  # (steps+1, 2): energy, unsat; row 0 is the initial state
    flips: np.ndarray | None = field(default=None, repr=False)  # (n, 3): -dE, dSAT, var

    def to_dict(self) -> dict:
        return {
            "solved": self.solved,
            "steps_taken": self.steps_taken,
            "final_energy": self.final_energy,
            "final_state": "".join(str(int(b)) for b in self.final_state),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def trace_csv(self) -> str:
        if self.trace is None:
            raise ValueError("run was made without trace=True")
        rows = ["step,energy,unsat"]
        rows += [f"{k},{e:g},{int(u)}" for k, (e, u) in enumerate(self.trace)]
        return "\n".join(rows) + "\n"


class _CnfArrays:
    """Clause-literal arrays plus variable occurrence index for the kernels."""

    def __init__(self, formula: CnfFormula):
        if formula.arity not in (3, None) or any(len(c) != 3 for c in formula.clauses):
            raise ValueError("solvers require exactly 3 literals per clause")
        var, neg = formula.literal_arrays()
        self.cvars = np.ascontiguousarray(var).reshape(-1, 3)
        self.cneg = np.ascontiguousarray(neg).reshape(-1, 3)
        buckets = [[] for _ in range(formula.n_vars)]
        for c, row in enumerate(self.cvars):
            for v in row:
                buckets[v].append(c)
        self.occ_ptr = np.zeros(formula.n_vars + 1, dtype=np.int64)
        self.occ_ptr[1:] = np.cumsum([len(b) for b in buckets])
        self.occ = np.array([c for b in buckets for c in b], dtype=np.int64)


def _initial_x(formula: CnfFormula, streams, initial_state) -> np.ndarray:
    if initial_state is not None:
        x = np.asarray(initial_state, dtype=np.int64).copy()
        if x.shape != (formula.n_vars,):
            raise ValueError(f"initial_state must have length {formula.n_vars}")
        return x
    return streams["init"].integers(0, 2, size=formula.n_vars).astype(np.int64)


def _finish(formula: CnfFormula, s: np.ndarray, solved: bool, steps: int, e: float, seed: int,
            trace_parts, flips=None) -> RunResult:
    state = s.astype(np.uint8)
    if solved and count_unsat(formula, state[:formula.n_vars]) != 0:
        raise AssertionError("solver reported success on an unsatisfying assignment")
    trace = np.concatenate(trace_parts) if trace_parts is not None else None
    return RunResult(bool(solved), int(steps), state, float(e), int(seed), trace, flips)


def run_qubo(formula: CnfFormula, model: QuboModel, cfg: QuboSolverConfig, *,
             initial_state=None, trace: bool = False, record_flips: bool = False) -> RunResult:
    """Annealed group-parallel Hopfield dynamics on the QUBO with a SAT checker.

    ``initial_state`` sets x; aux bits always start at ``y = a*b``.
    With ``record_flips`` every applied flip is logged in ``result.flips``.
    """
    if model.n_orig != formula.n_vars or model.n_aux != formula.n_clauses:
        raise ValueError("QUBO model does not match formula dimensions")
    if cfg.n_groups > model.n_vars:
        raise ConfigError(f"n_groups={cfg.n_groups} exceeds {model.n_vars} variables")
    arr = _CnfArrays(formula)
    c = model.compiled
    st = substreams(cfg.seed)
    x = _initial_x(formula, st, initial_state)
    s = np.concatenate([x, consistent_aux(model, x)]).astype(np.int64)
    g = K.fields(c.term_vars, c.term_w, c.n_vars, s)
    e = K.energy(c.term_vars, c.term_w, c.constant, s)
    cnt = K.clause_true_counts(arr.cvars, arr.cneg, s)
    unsat = int((cnt == 0).sum())
    n = model.n_vars
    trace_parts = [np.array([[e, unsat]])] if trace else None
    rec = ([], []) if record_flips else None
    steps, solved = 0, unsat == 0
    base = np.arange(n, dtype=np.int64)
    metropolis = cfg.acceptance == "metropolis"
    while not solved and steps < cfg.max_steps:
        m = min(CHUNK, cfg.max_steps - steps)
        perms = st["partition"].permuted(np.tile(base, (m, 1)), axis=1)
        if metropolis:
            noise = st["noise"].random((m, n))
        else:
            noise = st["noise"].uniform(-1.0, 1.0, (m, n))
        temps = cfg.schedule.temperatures(steps, m)
        te, tu = np.empty(m), np.empty(m)
        cap = m * n if record_flips else 0
        rde, rds, rvar = np.empty(cap), np.empty(cap, dtype=np.int64), np.empty(cap, dtype=np.int64)
        done, e, unsat, n_rec, solved = K.qubo_chunk(
            perms, noise, temps, cfg.n_groups, metropolis, cfg.sat_check_period, s, g, e, unsat,
            cnt, steps, c.term_vars, c.term_w, c.constant, c.var_ptr, c.var_terms, model.n_orig,
            arr.cvars, arr.cneg, arr.occ_ptr, arr.occ, te, tu, rde, rds, rvar, 0, record_flips)
        if trace:
            trace_parts.append(np.column_stack([te[:done], tu[:done]]))
        if record_flips:
            rec[0].append(np.column_stack([rde[:n_rec], rds[:n_rec]]))
            rec[1].append(rvar[:n_rec])
        steps += done
    flips = None
    if record_flips:
        vals = np.concatenate(rec[0]) if rec[0] else np.empty((0, 2))
        vars_ = np.concatenate(rec[1]) if rec[1] else np.empty(0, dtype=np.int64)
        flips = np.column_stack([vals, vars_]) if len(vars_) else np.empty((0, 3))
    return _finish(formula, s, solved, steps, e, cfg.seed, trace_parts, flips)


def _check_pubo(formula: CnfFormula, model: PuboEnergy, cfg: PuboSolverConfig, rule: str):
    if cfg.rule != rule:
        raise ConfigError(f"config rule {cfg.rule!r} does not match solver {rule!r}")
    if model.n_vars != formula.n_vars:
        raise ValueError("PUBO model does not match formula dimensions")


def _run_pubo(formula, model, cfg, initial_state, trace, rule):
    _check_pubo(formula, model, cfg, rule)
    arr = _CnfArrays(formula)
    c = model.compiled
    st = substreams(cfg.seed)
    s = _initial_x(formula, st, initial_state)
    g = K.fields(c.term_vars, c.term_w, c.n_vars, s)
    e = K.energy(c.term_vars, c.term_w, c.constant, s)
    cnt = K.clause_true_counts(arr.cvars, arr.cneg, s)
    unsat = int((cnt == 0).sum())
    trace_parts = [np.array([[e, unsat]])] if trace else None
    steps, offset = 0, 0.0
    chunk = CHUNK * 16
    args = (c.term_vars, c.term_w, c.constant, c.var_ptr, c.var_terms,
            arr.cvars, arr.cneg, arr.occ_ptr, arr.occ)
    while e != 0.0 and steps < cfg.max_steps:
        m = min(chunk, cfg.max_steps - steps)
        te, tu = np.empty(m), np.empty(m)
        if rule == "classic":
            picks = st["tiebreak"].integers(0, model.n_vars, size=m)
            done, e, unsat = K.pubo_classic_chunk(picks, s, g, e, unsat, cnt, steps, *args, te, tu)
        else:
            u = st["tiebreak"].random(m)
            flipped = np.empty(m, dtype=np.int64)
            done, e, unsat, offset = K.pubo_focus_chunk(
                u, s, g, e, unsat, offset, cnt, steps, cfg.e_offset_increment, *args, te, tu, flipped)
        if trace:
            trace_parts.append(np.column_stack([te[:done], tu[:done]]))
        steps += done
    return _finish(formula, s, e == 0.0, steps, e, cfg.seed, trace_parts)


def run_pubo_classic(formula: CnfFormula, model: PuboEnergy, cfg: PuboSolverConfig, *,
                     initial_state=None, trace: bool = False) -> RunResult:
    """One uniformly random neuron per step, flipped iff its dE <= 0."""
    return _run_pubo(formula, model, cfg, initial_state, trace, "classic")


def run_pubo_focus_offset(formula: CnfFormula, model: PuboEnergy, cfg: PuboSolverConfig, *,
                          initial_state=None, trace: bool = False) -> RunResult:
    return _run_pubo(formula, model, cfg, initial_state, trace, "focus_offset")


def run_pubo(formula: CnfFormula, model: PuboEnergy, cfg: PuboSolverConfig, **kw) -> RunResult:
    if cfg.rule == "classic":
        return run_pubo_classic(formula, model, cfg, **kw)
    return run_pubo_focus_offset(formula, model, cfg, **kw)


def qubo_sat_while_positive(result: RunResult) -> bool:
    """True when the SAT checker stopped a run whose QUBO energy was still > 0."""
    return result.solved and result.final_energy > 0 and not math.isclose(result.final_energy, 0.0)
