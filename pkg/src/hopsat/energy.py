"""Pseudo-Boolean energy models compiled from 3-SAT formulas.

Two models share one sparse multilinear representation over ``{0,1}``:

* :class:`PuboEnergy` - the native cubic energy, one term per clause equal
  to the product of its literal complements, so ``E(x)`` counts the
  violated clauses.
* :class:`QuboModel` - the Rosenberg quadratization. Each clause gets one
  auxiliary ``y`` standing for the product of its first two literal
  complements ``a*b``, the cubic term becomes ``y*c`` and the penalty
  ``P*(a*b - 2*a*y - 2*b*y + 3*y)`` is added.

A *literal complement* is ``x_i`` for a negated literal and ``1 - x_i``
for a positive one; it is 1 exactly when the literal is false.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cnf import CnfFormula

# monomial -> coefficient, monomial is a sorted tuple of distinct var indices
Poly = dict


def _factor(var: int, negated: bool) -> Poly:
    return {(var,): 1.0} if negated else {(): 1.0, (var,): -1.0}


def _mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for mp, cp in p.items():
        for mq, cq in q.items():
            mono = tuple(sorted(set(mp) | set(mq)))  # x*x = x on {0,1}
            out[mono] = out.get(mono, 0.0) + cp * cq
    return out


def _add(acc: Poly, p: Poly, scale: float = 1.0) -> None:
    for mono, c in p.items():
        acc[mono] = acc.get(mono, 0.0) + scale * c


class _Polynomial:
    """Shared evaluation machinery. Subclasses provide ``n_vars`` and terms."""

    n_vars: int
    constant: float
    linear: dict
    quadratic: dict
    cubic: dict

    def terms(self):
        """Iterate ``(vars_tuple, weight)`` over all non-constant monomials."""
        for i, w in self.linear.items():
            yield (i,), w
        yield from self.quadratic.items()
        yield from self.cubic.items()

    @cached_property
    def compiled(self) -> "CompiledPoly":
        return CompiledPoly.build(self)

    def _check_state(self, s) -> np.ndarray:
        s = np.asarray(s)
        if s.shape[-1] != self.n_vars:
            raise ValueError(f"state length {s.shape[-1]} does not match model size {self.n_vars}")
        return s

    def energy(self, s) -> float:
        s = self._check_state(s)
        if s.ndim != 1:
            raise ValueError("expected a single state; use energies() for batches")
        return float(self.energies(s[None, :])[0])

    def energies(self, states, chunk: int = 1 << 16) -> np.ndarray:
        """Energies of a batch of states, shape (B, n_vars)."""
        states = np.atleast_2d(self._check_state(states)).astype(np.float64)
        tv, tw = self.compiled.term_vars, self.compiled.term_w
        out = np.empty(states.shape[0])
        for lo in range(0, states.shape[0], chunk):
            block = states[lo:lo + chunk]
            ext = np.concatenate([block, np.ones((block.shape[0], 1))], axis=1)
            if tv.shape[0]:
                out[lo:lo + chunk] = self.constant + ext[:, tv].prod(axis=2) @ tw
            else:
                out[lo:lo + chunk] = self.constant
        return out

    def flip_delta(self, s, i: int) -> "FlipDelta":
        """Exact energy change of flipping bit ``i``, touching only its terms."""
        s = self._check_state(s)
        if not 0 <= i < self.n_vars:
            raise IndexError(f"variable {i} out of range")
        c = self.compiled
        field_ = 0.0
        for t in c.var_terms[c.var_ptr[i]:c.var_ptr[i + 1]]:
            prod = c.term_w[t]
            for j in c.term_vars[t]:
                if j >= 0 and j != i:
                    prod *= s[j]
            field_ += prod
        return FlipDelta(i, float((1 - 2 * int(s[i])) * field_))

    def _poly_dict(self) -> dict:
        return {
            "constant": self.constant,
            "linear": [[i, w] for i, w in sorted(self.linear.items())],
            "quadratic": [[i, j, w] for (i, j), w in sorted(self.quadratic.items())],
            "cubic": [[i, j, k, w] for (i, j, k), w in sorted(self.cubic.items())],
        }


def _split(poly: Poly) -> tuple[float, dict, dict, dict]:
    const, lin, quad, cub = 0.0, {}, {}, {}
    for mono, c in sorted(poly.items()):
        if c == 0.0:
            continue
        if len(mono) == 0:
            const += c
        elif len(mono) == 1:
            lin[mono[0]] = c
        elif len(mono) == 2:
            quad[mono] = c
        elif len(mono) == 3:
            cub[mono] = c
        else:
            raise ValueError(f"monomial of degree {len(mono)} not supported")
    return const, lin, quad, cub


@dataclass(frozen=True, eq=False)
class PuboEnergy(_Polynomial):
    n_vars: int
    constant: float = 0.0
    linear: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    cubic: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"form": "pubo", "n_vars": self.n_vars, **self._poly_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PuboEnergy":
        return cls(
            n_vars=int(d["n_vars"]),
            constant=float(d["constant"]),
            linear={int(i): float(w) for i, w in d["linear"]},
            quadratic={(int(i), int(j)): float(w) for i, j, w in d["quadratic"]},
            cubic={(int(i), int(j), int(k)): float(w) for i, j, k, w in d["cubic"]},
        )


@dataclass(frozen=True)
class AuxRecord:
    """One Rosenberg substitution ``y = a*b`` for a clause.

    ``pair`` holds the two substituted literals and ``rest`` the remaining
    one, each as ``(var, negated)``; the factor is ``x`` when negated and
    ``1 - x`` otherwise.
    """

    clause: int
    aux_var: int
    pair: tuple
    rest: tuple

    def to_dict(self) -> dict:
        enc = lambda lit: [lit[0], "x" if lit[1] else "1-x"]  # noqa: E731
        return {"clause": self.clause, "aux": self.aux_var,
                "pair": [enc(self.pair[0]), enc(self.pair[1])], "rest": enc(self.rest)}

    @classmethod
    def from_dict(cls, d: dict) -> "AuxRecord":
        dec = lambda e: (int(e[0]), e[1] == "x")  # noqa: E731
        return cls(int(d["clause"]), int(d["aux"]), (dec(d["pair"][0]), dec(d["pair"][1])), dec(d["rest"]))


@dataclass(frozen=True, eq=False)
class QuboModel(_Polynomial):
    n_orig: int
    n_aux: int
    penalty_P: float
    constant: float = 0.0
    linear: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    aux_map: tuple = ()
    cubic: dict = field(default_factory=dict, init=False)

    @property
    def n_vars(self) -> int:
        return self.n_orig + self.n_aux

    @cached_property
    def aux_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(var, negated) arrays of shape (n_aux, 3) in order a, b, c."""
        var = np.zeros((self.n_aux, 3), dtype=np.int64)
        neg = np.zeros((self.n_aux, 3), dtype=bool)
        for r in self.aux_map:
            k = r.aux_var - self.n_orig
            for j, (v, n) in enumerate((*r.pair, r.rest)):
                var[k, j], neg[k, j] = v, n
        return var, neg

    def factor_values(self, x) -> np.ndarray:
        """Literal-complement values (a, b, c) per clause, shape (..., n_aux, 3)."""
        x = np.asarray(x)
        var, neg = self.aux_arrays
        vals = x[..., var].astype(np.int64)
        return np.where(neg, vals, 1 - vals)

    def clause_energies(self, x) -> np.ndarray:
        """Per-clause QUBO energy for y=0 and y=1, shape (..., n_aux, 2).

        The model energy is the sum over clauses of the entry selected by
        that clause's aux bit; no other terms exist.
        """
        f = self.factor_values(x).astype(np.float64)
        a, b, c = f[..., 0], f[..., 1], f[..., 2]
        P = self.penalty_P
        g0 = P * a * b
        g1 = c + P * (a * b - 2 * a - 2 * b + 3)
        return np.stack([g0, g1], axis=-1)

    def to_dict(self) -> dict:
        return {"form": "qubo", "n_vars": self.n_orig, "n_aux": self.n_aux,
                **self._poly_dict(), "penalty_P": self.penalty_P,
                "aux_map": [r.to_dict() for r in self.aux_map]}

    @classmethod
    def from_dict(cls, d: dict) -> "QuboModel":
        return cls(
            n_orig=int(d["n_vars"]), n_aux=int(d["n_aux"]), penalty_P=float(d["penalty_P"]),
            constant=float(d["constant"]),
            linear={int(i): float(w) for i, w in d["linear"]},
            quadratic={(int(i), int(j)): float(w) for i, j, w in d["quadratic"]},
            aux_map=tuple(AuxRecord.from_dict(r) for r in d["aux_map"]),
        )


@dataclass(frozen=True)
class FlipDelta:
    var: int
    delta_e: float


@dataclass(frozen=True)
class CompiledPoly:
    """Array form for kernels: terms padded to width 3 plus a var->term CSR index."""

    term_vars: np.ndarray  # (T, 3) int64, -1 padding
    term_w: np.ndarray     # (T,) float64
    var_ptr: np.ndarray    # (n+1,) int64
    var_terms: np.ndarray  # (nnz,) int64
    constant: float
    n_vars: int

    @classmethod
    def build(cls, model: _Polynomial) -> "CompiledPoly":
        items = list(model.terms())
        tv = np.full((len(items), 3), -1, dtype=np.int64)
        tw = np.zeros(len(items))
        buckets = [[] for _ in range(model.n_vars)]
        for t, (vs, w) in enumerate(items):
            tv[t, :len(vs)] = vs
            tw[t] = w
            for v in vs:
                buckets[v].append(t)
        ptr = np.zeros(model.n_vars + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(b) for b in buckets])
        idx = np.array([t for b in buckets for t in b], dtype=np.int64)
        return cls(tv, tw, ptr, idx, float(model.constant), model.n_vars)


def _require_3sat(formula: CnfFormula) -> None:
    for ci, clause in enumerate(formula.clauses):
        if len(clause) != 3:
            raise ValueError(f"clause {ci} has arity {len(clause)}; exactly 3 required")


def pubo_from_cnf(formula: CnfFormula) -> PuboEnergy:
    _require_3sat(formula)
    poly: Poly = {}
    for clause in formula.clauses:
        term = {(): 1.0}
        for lit in clause:
            term = _mul(term, _factor(lit.var, lit.negated))
        _add(poly, term)
    const, lin, quad, cub = _split(poly)
    return PuboEnergy(formula.n_vars, const, lin, quad, cub)


def quadratize(formula: CnfFormula, P: float = 1.0) -> QuboModel:
    _require_3sat(formula)
    if not P > 0:
        raise ValueError("penalty P must be > 0")
    n = formula.n_vars
    poly: Poly = {}
    records = []
    for ci, (l0, l1, l2) in enumerate(formula.clauses):
        y = n + ci
        a = _factor(l0.var, l0.negated)
        b = _factor(l1.var, l1.negated)
        c = _factor(l2.var, l2.negated)
        ypoly = {(y,): 1.0}
        _add(poly, _mul(ypoly, c))
        _add(poly, _mul(a, b), P)
        _add(poly, _mul(a, ypoly), -2 * P)
        _add(poly, _mul(b, ypoly), -2 * P)
        _add(poly, ypoly, 3 * P)
        records.append(AuxRecord(ci, y, ((l0.var, l0.negated), (l1.var, l1.negated)), (l2.var, l2.negated)))
    const, lin, quad, cub = _split(poly)
    assert not cub
    return QuboModel(n, formula.n_clauses, float(P), const, lin, quad, tuple(records))


def eval_energy(model: _Polynomial, s) -> float:
    return model.energy(s)


def flip_delta(model: _Polynomial, s, i: int) -> FlipDelta:
    return model.flip_delta(s, i)


def consistent_aux(model: QuboModel, x) -> np.ndarray:
    """Aux values satisfying every substitution, ``y = a*b``."""
    f = model.factor_values(x)
    return (f[..., 0] * f[..., 1]).astype(np.uint8)


def min_over_aux(model: QuboModel, x) -> tuple[float, np.ndarray]:
    """Exact ``min_y g(x, y)``; each aux lives in one clause so this is per clause.

    Ties go to the consistent value ``y = a*b``.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != model.n_orig:
        raise ValueError(f"expected {model.n_orig} original variables, got shape {x.shape}")
    g = model.clause_energies(x)
    y = np.where(g[:, 0] == g[:, 1], consistent_aux(model, x), g[:, 1] < g[:, 0]).astype(np.uint8)
    return model.energy(np.concatenate([x.astype(np.uint8), y])), y


def model_to_json(model: _Polynomial) -> str:
    return json.dumps(model.to_dict(), indent=1)


def model_from_json(text: str) -> _Polynomial:
    d = json.loads(text)
    if d.get("form") == "qubo" or "n_aux" in d:
        return QuboModel.from_dict(d)
    return PuboEnergy.from_dict(d)
