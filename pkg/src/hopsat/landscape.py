"""Valley structure of the PUBO landscape and its QUBO deformation.

Configurations are encoded as integers with bit ``i`` equal to ``x_i``.
A valley is a maximal set of equal-energy configurations connected by
zero-energy single flips; it is a local-minimum valley when no member has
a strictly lower neighbour.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .energy import PuboEnergy, QuboModel

EXHAUSTIVE_LIMIT = 24
KEY_BITS_LIMIT = 62
_ROUND = 9


def bits_of(key: int, n: int) -> np.ndarray:
    return ((int(key) >> np.arange(n)) & 1).astype(np.uint8)


def key_of(x) -> int:
    return int(sum(1 << i for i, b in enumerate(np.asarray(x)) if b))


def bitstring(key: int, n: int) -> str:
    return "".join(str(b) for b in bits_of(key, n))


@dataclass(frozen=True)
class Valley:
    configs: tuple  # sorted config keys
    energy: float
    is_local_min: bool

    @property
    def size(self) -> int:
        return len(self.configs)

    @property
    def canonical(self) -> int:
        return self.configs[0]

    def assignments(self, n_vars: int) -> np.ndarray:
        return np.array([bits_of(k, n_vars) for k in self.configs], dtype=np.uint8)


def _sorted_valleys(valleys):
    return sorted(valleys, key=lambda v: (v.energy, v.canonical))


def _all_energies(model: PuboEnergy) -> np.ndarray:
    n = model.n_vars
    keys = np.arange(1 << n, dtype=np.int64)
    out = np.empty(1 << n)
    chunk = 1 << 16
    for lo in range(0, 1 << n, chunk):
        block = keys[lo:lo + chunk]
        out[lo:lo + chunk] = model.energies(((block[:, None] >> np.arange(n)) & 1).astype(np.uint8))
    return np.round(out, _ROUND)


def enumerate_valleys_exhaustive(model: PuboEnergy, k_lowest: int) -> list[Valley]:
    """All valleys on the ``k_lowest`` lowest distinct energy levels, by a full sweep."""
    n = model.n_vars
    if n > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive enumeration limited to n_vars <= {EXHAUSTIVE_LIMIT}")
    if k_lowest < 1:
        raise ValueError("k_lowest must be >= 1")
    E = _all_energies(model)
    levels = np.unique(E)[:k_lowest]
    keep = np.isin(E, levels)
    keys = np.arange(1 << n, dtype=np.int64)
    has_lower = np.zeros(1 << n, dtype=bool)
    rows, cols = [], []
    for b in range(n):
        nb = keys ^ (1 << b)
        has_lower |= E[nb] < E
        sel = keep & ((keys >> b) & 1 == 0) & (E[nb] == E)
        rows.append(keys[sel])
        cols.append(nb[sel])
    idx = np.flatnonzero(keep)
    pos = np.full(1 << n, -1, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    r, c = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(r.size), (pos[r], pos[c])), shape=(idx.size, idx.size))
    n_comp, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    valleys = []
    for k in range(n_comp):
        members = idx[order[bounds[k]:bounds[k + 1]]]
        valleys.append(Valley(tuple(int(m) for m in members), float(E[members[0]]),
                              not bool(has_lower[members].any())))
    return _sorted_valleys(valleys)


def discard_saddles(valleys) -> list[Valley]:
    return [v for v in valleys if v.is_local_min]


def plateau_valley(model: PuboEnergy, start, max_size: int = 1 << 22) -> Valley:
    """Flood-fill the valley containing ``start`` (a key or a bit vector)."""
    n = model.n_vars
    if n > KEY_BITS_LIMIT:
        raise ValueError(f"valley search limited to n_vars <= {KEY_BITS_LIMIT}")
    key = start if isinstance(start, (int, np.integer)) else key_of(start)
    c = model.compiled
    members, e, local_min, complete = K.plateau_bfs(
        np.int64(key), n, c.term_vars, c.term_w, c.constant, c.var_ptr, c.var_terms, max_size)
    if not complete:
        raise RuntimeError(f"valley exceeded max_size={max_size}")
    return Valley(tuple(sorted(int(m) for m in members)), round(float(e), _ROUND), bool(local_min))


@dataclass(frozen=True)
class GwlConfig:
    """Flat-histogram sampler settings.

    ``n_levels`` restricts the result to that many lowest energy levels seen
    (None keeps every recorded level below the overflow bin).
    """

    seed: int = 0
    ln_f_initial: float = 1.0
    ln_f_final: float = 1e-6
    flatness: float = 0.8
    check_every: int | None = None  # default 2000 * n_vars steps
    max_steps: int = 50_000_000
    n_levels: int | None = None
    bin_width: float = 1.0
    extra_bins: int = 3
    max_records: int = 2_000_000
    max_valley_size: int = 1 << 22


@dataclass
class GwlResult:
    valleys: list
    partial: bool
    steps: int
    ln_f: float
    levels: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.valleys)

    def __len__(self):
        return len(self.valleys)


def _descend(model: PuboEnergy, rng, restarts: int = 8) -> float:
    """Lowest energy reached by a few greedy descents; sizes the histogram."""
    c = model.compiled
    best = math.inf
    for _ in range(restarts):
        s = rng.integers(0, 2, size=model.n_vars).astype(np.int64)
        g = K.fields(c.term_vars, c.term_w, c.n_vars, s)
        while True:
            de = (1 - 2 * s) * g
            i = int(np.argmin(de))
            if de[i] >= 0:
                break
            K.apply_flip(i, s, g, c.term_vars, c.term_w, c.var_ptr, c.var_terms)
        best = min(best, K.energy(c.term_vars, c.term_w, c.constant, s))
    return best


def gwl_sample_valleys(model: PuboEnergy, n_valleys: int | None = 200,
                       cfg: GwlConfig = GwlConfig()) -> GwlResult:
    """Collect low local-minimum valleys with a Wang-Landau walk over energy levels.

    The walk uses single-bit-flip proposals and the ``ln f`` schedule in
    ``cfg``. Every visited config on a low level with no downhill flip seeds
    a plateau flood fill; valleys are deduplicated by membership. The result
    holds local-minimum valleys only, sorted by (energy, canonical member),
    truncated to ``n_valleys``, and is ``partial`` when fewer were found.
    Energies are assumed non-negative (true for CNF-derived models).
    """
    n = model.n_vars
    if n > KEY_BITS_LIMIT:
        raise ValueError(f"valley sampling limited to n_vars <= {KEY_BITS_LIMIT}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    e_est = _descend(model, rng)
    wanted = cfg.n_levels if cfg.n_levels is not None else 1
    record_bins = int(math.floor(e_est / cfg.bin_width + 1e-9)) + wanted + cfg.extra_bins
    n_bins = record_bins + 1
    c = model.compiled
    s = rng.integers(0, 2, size=n).astype(np.int64)
    lng, hist = np.zeros(n_bins), np.zeros(n_bins)
    visited = np.zeros(n_bins, dtype=bool)
    rec_keys = np.empty(cfg.max_records, dtype=np.int64)
    rec_e = np.empty(cfg.max_records)
    ln_f, steps, n_rec = cfg.ln_f_initial, 0, 0
    seen_keys: set[int] = set()
    records: list[tuple[float, int]] = []
    chunk = 1 << 20
    while steps < cfg.max_steps and ln_f >= cfg.ln_f_final:
        m = min(chunk, cfg.max_steps - steps)
        picks = rng.integers(0, n, size=m)
        u = rng.random(m)
        done, ln_f, got = K.wang_landau(
            s, m, picks, u, lng, hist, visited, ln_f, cfg.ln_f_final, cfg.flatness,
            cfg.check_every or 2000 * n, cfg.bin_width, c.term_vars, c.term_w, c.constant, c.var_ptr,
            c.var_terms, record_bins, rec_keys, rec_e)
        for k, e in zip(rec_keys[:got].tolist(), rec_e[:got].tolist()):
            if k not in seen_keys:
                seen_keys.add(k)
                records.append((round(e, _ROUND), k))
        steps += done
    levels = sorted({round(float(b) * cfg.bin_width, _ROUND) for b in np.flatnonzero(visited) if b < record_bins})
    if cfg.n_levels is not None:
        levels = levels[:cfg.n_levels]
    cutoff = levels[-1] if levels else -math.inf
    members: set[int] = set()
    valleys = []
    for e, k in sorted(records):
        if e > cutoff or k in members:
            continue
        v = plateau_valley(model, k, cfg.max_valley_size)
        members.update(v.configs)
        if v.is_local_min:
            valleys.append(v)
    valleys = _sorted_valleys(valleys)
    partial = n_valleys is not None and len(valleys) < n_valleys
    if n_valleys is not None:
        valleys = valleys[:n_valleys]
    return GwlResult(valleys, partial, steps, ln_f, levels)


@dataclass(frozen=True)
class TransitionEstimate:
    from_config: tuple
    to_config: tuple
    n_y: int
    p: float


def _clause_options(model: QuboModel, x_a: np.ndarray, x_b: np.ndarray):
    """Per clause and aux value: offset d = g_c(x_a, y) - pubo_c(x_a), and dE = g_c(x_b, y) - g_c(x_a, y)."""
    ga = model.clause_energies(x_a)
    gb = model.clause_energies(x_b)
    fa = model.factor_values(x_a)
    pubo = fa.prod(axis=1).astype(np.float64)
    d = np.round(ga - pubo[:, None], _ROUND)
    de = np.round(gb - ga, _ROUND)
    return d, de


def _boltzmann(de, T: float):
    """Acceptance weight min(1, exp(-dE/T)); T <= 0 is the zero-temperature limit."""
    de = np.asarray(de, dtype=np.float64)
    if math.isinf(T):
        return np.ones_like(de)
    if T <= 0:
        return (de <= 0).astype(np.float64)
    return np.minimum(1.0, np.exp(-np.maximum(de, 0.0) / T))


def qubo_transition_prob(model: QuboModel, x_a, x_b, T: float,
                         pubo: PuboEnergy | None = None) -> TransitionEstimate:
    """Probability that the QUBO lets a zero-PUBO-barrier flip ``x_a -> x_b`` through.

    Averages ``min(1, exp(-dE(y)/T))`` over every aux assignment ``y`` with
    ``E_QUBO(x_a, y) = E_PUBO(x_a)``, where ``dE(y)`` is the QUBO energy change
    of the move at fixed ``y``. The QUBO energy is a sum of per-clause terms
    each owning one aux bit, so the count of aux assignments per (offset, dE)
    total is built clause by clause as a convolution; the cap at 1 acts on the
    total dE, so the average itself does not factor over clauses.
    """
    x_a = np.asarray(x_a, dtype=np.int64)
    x_b = np.asarray(x_b, dtype=np.int64)
    if x_a.shape != (model.n_orig,) or x_b.shape != (model.n_orig,):
        raise ValueError("x_a and x_b must be original-variable assignments")
    if int(np.sum(x_a != x_b)) != 1:
        raise ValueError("x_a and x_b must differ in exactly one bit")
    d, de = _clause_options(model, x_a, x_b)
    if pubo is not None:
        if pubo.energy(x_a) != pubo.energy(x_b):
            raise ValueError("x_a and x_b must have equal PUBO energy")
    else:
        fa, fb = model.factor_values(x_a), model.factor_values(x_b)
        if fa.prod(axis=1).sum() != fb.prod(axis=1).sum():
            raise ValueError("x_a and x_b must have equal PUBO energy")
    key = (tuple(int(v) for v in x_a), tuple(int(v) for v in x_b))
    # state: (offset sum, dE sum) -> number of partial aux assignments
    lo_rest = np.concatenate([np.cumsum(np.minimum(d.min(axis=1), 0)[::-1])[::-1][1:], [0.0]])
    hi_rest = np.concatenate([np.cumsum(d.max(axis=1)[::-1])[::-1][1:], [0.0]])
    dist: Counter = Counter({(0.0, 0.0): 1})
    for c in range(d.shape[0]):
        nxt: Counter = Counter()
        for (off, acc), cnt in dist.items():
            for y in (0, 1):
                o = round(off + d[c, y], _ROUND)
                # the final offset must come back to exactly 0
                if o + lo_rest[c] > 1e-9 or o + hi_rest[c] < -1e-9:
                    continue
                nxt[(o, round(acc + de[c, y], _ROUND))] += cnt
        dist = nxt
    final = {acc: cnt for (off, acc), cnt in dist.items() if abs(off) < 1e-9}
    n_y = sum(final.values())
    p = sum(cnt * float(_boltzmann(acc, T)) for acc, cnt in final.items()) / n_y
    return TransitionEstimate(*key, n_y, float(p))


def build_qubo_connectivity(valleys, model: QuboModel, T: float, mode: str = "threshold",
                            p_min: float | None = 0.5, seed: int | None = None) -> list[tuple]:
    """Split PUBO local-minimum valleys into QUBO-connected components.

    Each ordered single-flip pair inside a valley is tested; the pair is
    joined when the move is accepted in either direction (``threshold``:
    ``p >= p_min``; ``bernoulli``: a coin with probability ``p``). Returns
    components as sorted key tuples, ordered by (size desc, first key).
    """
    if mode == "threshold":
        if p_min is None:
            raise ValueError("threshold mode needs p_min")
    elif mode == "bernoulli":
        if seed is None:
            raise ValueError("bernoulli mode needs a seed")
        rng = np.random.Generator(np.random.PCG64(seed))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    n = model.n_orig
    comps = []
    for v in valleys:
        members = list(v.configs)
        if len(members) == 1:
            comps.append(tuple(members))
            continue
        pos = {k: i for i, k in enumerate(members)}
        rows, cols = [], []
        for k in members:
            xa = bits_of(k, n)
            for b in range(n):
                nb = k ^ (1 << b)
                if nb not in pos:
                    continue
                p = qubo_transition_prob(model, xa, bits_of(nb, n), T).p
                ok = p >= p_min if mode == "threshold" else rng.random() < p
                if ok:
                    rows.append(pos[k])
                    cols.append(pos[nb])
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(members),) * 2)
        n_comp, labels = connected_components(graph, directed=False)
        for c in range(n_comp):
            comps.append(tuple(members[i] for i in np.flatnonzero(labels == c)))
    return sorted(comps, key=lambda c: (-len(c), c[0]))


@dataclass
class LandscapeStats:
    n_vars: int
    entropies: list          # s per valley / component
    bin_width: float
    sigma: dict              # bin index -> complexity
    counts: dict             # bin index -> number of valleys
    meta: dict = field(default_factory=dict)

    def bin_edge(self, b: int) -> float:
        return round(b * self.bin_width, 12)

    def rows(self) -> list[tuple[float, float, int]]:
        return [(self.bin_edge(b), self.sigma[b], self.counts[b]) for b in sorted(self.sigma)]


def valley_entropy_complexity(components, n_vars: int, bin_width: float = 0.01,
                              meta: dict | None = None) -> LandscapeStats:
    """Entropy ``s = ln|valley|/N`` per valley and complexity ``ln(count)/N`` per s-bin.

    ``components`` may hold valleys, member collections or plain sizes.
    """
    sizes = [c if isinstance(c, (int, np.integer)) else
             (c.size if isinstance(c, Valley) else len(c)) for c in components]
    if not sizes:
        raise ValueError("no valleys to summarize")
    s = [math.log(z) / n_vars for z in sizes]
    counts = Counter(int(math.floor(v / bin_width + 1e-9)) for v in s)
    sigma = {b: math.log(c) / n_vars for b, c in counts.items()}
    return LandscapeStats(n_vars, s, bin_width, sigma, dict(counts), dict(meta or {}))


def average_stats(stats: list[LandscapeStats]) -> LandscapeStats:
    """Bin-wise mean complexity over instances (each bin averaged where present)."""
    if not stats:
        raise ValueError("nothing to average")
    width = stats[0].bin_width
    if any(st.bin_width != width for st in stats):
        raise ValueError("bin widths differ")
    acc: dict[int, list[float]] = {}
    counts: Counter = Counter()
    for st in stats:
        for b, v in st.sigma.items():
            acc.setdefault(b, []).append(v)
            counts[b] += st.counts[b]
    sigma = {b: float(np.mean(v)) for b, v in acc.items()}
    ent = [x for st in stats for x in st.entropies]
    return LandscapeStats(stats[0].n_vars, ent, width, sigma, dict(counts),
                          {"n_instances": len(stats)})
