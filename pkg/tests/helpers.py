"""Shared instance builders and the acceptance result registry."""

from hopsat.cnf import CnfFormula, generate_random_3sat, is_satisfiable

# criterion number -> (passed, detail); printed by the conftest summary hook
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def satlib_style(formula: CnfFormula) -> str:
    """Mimic the SATLIB uf layout: padded header, leading spaces, '%' trailer."""
    lines = ["c This Formular is generated by mcnf", "c", "c    horn? no", "c",
             f"p cnf {formula.n_vars}  {formula.n_clauses} "]
    lines += [" " + " ".join(str(v) for v in c) + " 0" for c in formula.to_ints()]
    return "\n".join(lines) + "\n%\n0\n\n"


def satisfiable(n, ratio, count, first_seed=0):
    """The first ``count`` generator outputs (from ``first_seed`` on) that a complete solver accepts."""
    out, seed = [], first_seed
    while len(out) < count:
        f = generate_random_3sat(n, ratio, seed)
        if is_satisfiable(f):
            out.append((seed, f))
        seed += 1
    return out
