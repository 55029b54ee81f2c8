"""CNF formulas: DIMACS I/O, random 3-SAT generation and evaluation.

Variables are 0-based internally; DIMACS files are 1-based and converted
only in :func:`parse_dimacs` / :func:`serialize_dimacs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed DIMACS input. ``line`` is 1-based (0 when not attributable)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Literal:
    var: int
    negated: bool = False

    def value(self, x) -> bool:
        return bool(x[self.var]) != self.negated

    def to_dimacs(self) -> int:
        return -(self.var + 1) if self.negated else self.var + 1

    @classmethod
    def from_dimacs(cls, lit: int) -> "Literal":
        return cls(abs(lit) - 1, lit < 0)


Clause = tuple  # tuple[Literal, ...]


@dataclass(frozen=True)
class CnfFormula:
    n_vars: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        for ci, clause in enumerate(clauses):
            seen = set()
            for lit in clause:
                if not 0 <= lit.var < self.n_vars:
                    raise ValueError(f"clause {ci}: variable {lit.var} out of range for n_vars={self.n_vars}")
                if lit.var in seen:
                    raise ValueError(f"clause {ci}: repeated variable {lit.var}")
                seen.add(lit.var)

    @classmethod
    def from_ints(cls, n_vars: int, clauses: Iterable[Sequence[int]]) -> "CnfFormula":
        """Build from DIMACS-style signed 1-based integer clauses."""
        return cls(n_vars, tuple(tuple(Literal.from_dimacs(v) for v in c) for c in clauses))

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    def to_ints(self) -> list[list[int]]:
        return [[lit.to_dimacs() for lit in c] for c in self.clauses]

    @cached_property
    def arity(self) -> int | None:
        """Common clause length, or None for mixed / empty formulas."""
        sizes = {len(c) for c in self.clauses}
        return sizes.pop() if len(sizes) == 1 else None

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        k = max((len(c) for c in self.clauses), default=0)
        var = np.full((self.n_clauses, k), -1, dtype=np.int64)
        neg = np.zeros((self.n_clauses, k), dtype=bool)
        for ci, clause in enumerate(self.clauses):
            for j, lit in enumerate(clause):
                var[ci, j] = lit.var
                neg[ci, j] = lit.negated
        var.flags.writeable = False
        neg.flags.writeable = False
        return var, neg

    def literal_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(var, negated) arrays of shape (n_clauses, k_max); padding has var -1."""
        return self._arrays


def _check_assignment(formula: CnfFormula, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != formula.n_vars:
        raise ValueError(f"assignment length {x.shape} does not match n_vars={formula.n_vars}")
    return x.astype(bool)


def clause_truth(formula: CnfFormula, x) -> np.ndarray:
    """Boolean vector: which clauses have at least one true literal."""
    x = _check_assignment(formula, x)
    var, neg = formula.literal_arrays()
    if var.size == 0:
        return np.zeros(formula.n_clauses, dtype=bool)
    vals = x[np.where(var >= 0, var, 0)] != neg
    return np.any(vals & (var >= 0), axis=1)


def count_unsat(formula: CnfFormula, x) -> int:
    return int(formula.n_clauses - clause_truth(formula, x).sum())


def evaluate(formula: CnfFormula, x) -> bool:
    return count_unsat(formula, x) == 0


def parse_dimacs(data: str | bytes) -> CnfFormula:
    """Parse DIMACS CNF text.

    Tolerates arbitrary line breaks inside clauses and the SATLIB ``%``
    trailer (everything after a line starting with ``%`` is ignored).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    header = None
    clauses: list[list[int]] = []
    current: list[int] = []
    current_start = 0
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            if header is not None:
                raise ParseError("duplicate problem header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"malformed header {line!r}", lineno) from None
            if n < 0 or m < 0:
                raise ParseError(f"negative count in header {line!r}", lineno)
            header = (n, m)
            continue
        if header is None:
            raise ParseError("clause data before 'p cnf' header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"invalid token {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(current)
                current = []
                continue
            if abs(lit) > header[0]:
                raise ParseError(f"literal {lit} exceeds declared {header[0]} variables", lineno)
            if not current:
                current_start = lineno
            if any(abs(v) == abs(lit) for v in current):
                raise ParseError(f"variable {abs(lit)} repeated within clause", lineno)
            current.append(lit)
    if header is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        raise ParseError("unterminated clause (missing trailing 0)", current_start)
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula.from_ints(header[0], clauses)


def read_dimacs(path) -> CnfFormula:
    return parse_dimacs(Path(path).read_bytes())


def serialize_dimacs(formula: CnfFormula, comments: Iterable[str] = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {formula.n_vars} {formula.n_clauses}")
    lines.extend(" ".join(str(v) for v in clause) + " 0" for clause in formula.to_ints())
    return "\n".join(lines) + "\n"


def write_dimacs(formula: CnfFormula, path, comments: Iterable[str] = ()) -> None:
    Path(path).write_text(serialize_dimacs(formula, comments), encoding="utf-8")


def clause_count(n_vars: int, clause_ratio: float) -> int:
    # half-up rounding: 4.23 * 50 = 211.5 -> 212
    return int(math.floor(clause_ratio * n_vars + 0.5))


def generate_random_3sat(n_vars: int, clause_ratio: float, seed: int,
                         distinct_clauses: bool = False) -> CnfFormula:
    """Uniform random 3-SAT with ``round(clause_ratio * n_vars)`` clauses.

    Each clause draws 3 distinct variables without replacement and an
    independent fair-coin polarity per literal. With ``distinct_clauses``
    a clause identical (as a literal set) to an earlier one is redrawn.
    """
    if n_vars < 3:
        raise ValueError("n_vars must be >= 3")
    if clause_ratio <= 0:
        raise ValueError("clause_ratio must be > 0")
    m = clause_count(n_vars, clause_ratio)
    rng = np.random.Generator(np.random.PCG64(seed))
    clauses = []
    seen = set()
    while len(clauses) < m:
        vs = rng.choice(n_vars, size=3, replace=False)
        signs = rng.integers(0, 2, size=3)
        clause = tuple(Literal(int(v), bool(s)) for v, s in zip(vs, signs))
        if distinct_clauses:
            key = frozenset(clause)
            if key in seen:
                continue
            seen.add(key)
        clauses.append(clause)
    return CnfFormula(n_vars, tuple(clauses))


def is_satisfiable(formula: CnfFormula) -> bool:
    """Complete satisfiability check (delegates to a CDCL solver)."""
    from pysat.solvers import Minisat22

    with Minisat22(bootstrap_with=formula.to_ints()) as solver:
        return bool(solver.solve())
