"""Numba kernels over :class:`~hopsat.energy.CompiledPoly` arrays.

All randomness is drawn outside and passed in as arrays, so a kernel is a
pure function of its inputs.
"""

import numpy as np
from numba import njit

RECOMPUTE_EVERY = 10_000
DRIFT_TOL = 1e-9


@njit(cache=True)
def energy(tv, tw, const, s):
    e = const
    for t in range(tv.shape[0]):
        p = tw[t]
        for k in range(3):
            j = tv[t, k]
            if j >= 0:
                p *= s[j]
        e += p
    return e


@njit(cache=True)
def fields(tv, tw, n, s):
    """Local fields dE/ds_i; flipping i changes energy by (1 - 2 s_i) * field_i."""
    g = np.zeros(n)
    for t in range(tv.shape[0]):
        for k in range(3):
            i = tv[t, k]
            if i < 0:
                continue
            p = tw[t]
            for m in range(3):
                j = tv[t, m]
                if j >= 0 and m != k:
                    p *= s[j]
            g[i] += p
    return g


@njit(cache=True)
def apply_flip(i, s, g, tv, tw, ptr, idx):
    """Flip bit i and update the local fields of its term neighbours."""
    d = 1 - 2 * s[i]
    s[i] = 1 - s[i]
    for q in range(ptr[i], ptr[i + 1]):
        t = idx[q]
        for k in range(3):
            j = tv[t, k]
            if j < 0 or j == i:
                continue
            p = tw[t] * d
            for m in range(3):
                r = tv[t, m]
                if r >= 0 and r != i and r != j:
                    p *= s[r]
            g[j] += p


@njit(cache=True)
def clause_true_counts(cvars, cneg, x):
    m = cvars.shape[0]
    cnt = np.zeros(m, dtype=np.int64)
    for c in range(m):
        for k in range(cvars.shape[1]):
            v = cvars[c, k]
            if v >= 0 and (x[v] == 1) != cneg[c, k]:
                cnt[c] += 1
    return cnt


@njit(cache=True)
def cnf_flip(v, s, cnt, cvars, cneg, occ_ptr, occ):
    """Update true-literal counts after bit v has ALREADY been flipped in s.

    Returns the change in the number of unsatisfied clauses.
    """
    dunsat = 0
    for q in range(occ_ptr[v], occ_ptr[v + 1]):
        c = occ[q]
        for k in range(cvars.shape[1]):
            if cvars[c, k] == v:
                now_true = (s[v] == 1) != cneg[c, k]
                if now_true:
                    if cnt[c] == 0:
                        dunsat -= 1
                    cnt[c] += 1
                else:
                    cnt[c] -= 1
                    if cnt[c] == 0:
                        dunsat += 1
    return dunsat


@njit(cache=True)
def _check_drift(tv, tw, const, s, e):
    full = energy(tv, tw, const, s)
    if abs(full - e) > DRIFT_TOL:
        raise RuntimeError("incremental energy drifted from full recomputation")
    return full


@njit(cache=True)
def pubo_classic_chunk(picks, s, g, e, unsat, cnt, step0, tv, tw, const, ptr, idx,
                       cvars, cneg, occ_ptr, occ, trace_e, trace_u):
    """Single random neuron per step, flip iff dE <= 0. Stops at e == 0.

    Returns (steps_done, e, unsat). trace arrays (len >= len(picks)) get the
    energy / unsat count after each step.
    """
    n_done = 0
    for k in range(picks.shape[0]):
        if e == 0.0:
            break
        i = picks[k]
        de = (1 - 2 * s[i]) * g[i]
        if de <= 0.0:
            apply_flip(i, s, g, tv, tw, ptr, idx)
            e += de
            unsat += cnf_flip(i, s, cnt, cvars, cneg, occ_ptr, occ)
        n_done += 1
        if (step0 + n_done) % RECOMPUTE_EVERY == 0:
            e = _check_drift(tv, tw, const, s, e)
        trace_e[k] = e
        trace_u[k] = unsat
    return n_done, e, unsat


@njit(cache=True)
def pubo_focus_chunk(u, s, g, e, unsat, offset, cnt, step0, inc, tv, tw, const, ptr, idx,
                     cvars, cneg, occ_ptr, occ, trace_e, trace_u, flipped):
    """Focus/offset rule: flip a uniformly chosen i with dE_i - offset <= 0,
    otherwise raise the offset by ``inc``. Stops at e == 0.

    Returns (steps_done, e, unsat, offset).
    """
    n = s.shape[0]
    n_done = 0
    for k in range(u.shape[0]):
        if e == 0.0:
            break
        n_cand = 0
        for i in range(n):
            if (1 - 2 * s[i]) * g[i] - offset <= 0.0:
                n_cand += 1
        if n_cand > 0:
            pick = int(u[k] * n_cand)
            if pick >= n_cand:
                pick = n_cand - 1
            for i in range(n):
                de = (1 - 2 * s[i]) * g[i]
                if de - offset <= 0.0:
                    if pick == 0:
                        apply_flip(i, s, g, tv, tw, ptr, idx)
                        e += de
                        unsat += cnf_flip(i, s, cnt, cvars, cneg, occ_ptr, occ)
                        flipped[k] = i
                        break
                    pick -= 1
            offset = 0.0
        else:
            offset += inc
            flipped[k] = -1
        n_done += 1
        if (step0 + n_done) % RECOMPUTE_EVERY == 0:
            e = _check_drift(tv, tw, const, s, e)
        trace_e[k] = e
        trace_u[k] = unsat
    return n_done, e, unsat, offset


@njit(cache=True)
def qubo_chunk(perms, noise, temps, n_groups, metropolis, check_period, s, g, e, unsat, cnt,
               step0, tv, tw, const, ptr, idx, n_orig, cvars, cneg, occ_ptr, occ,
               trace_e, trace_u, rec_de, rec_dsat, rec_var, n_rec, record):
    """Stochastic group-parallel sweeps.

    Per step the permutation ``perms[k]`` is split into ``n_groups`` nearly
    equal contiguous groups processed in order. Inside a group all neurons
    decide against the state frozen at group entry, then accepted flips are
    applied together. Acceptance: ``dE + T*noise < 0`` with noise in
    [-1, 1), or Metropolis ``noise < exp(-dE/T)`` with noise in [0, 1).
    The CNF is checked every ``check_period`` steps.

    Returns (steps_done, e, unsat, n_rec, solved).
    """
    n = s.shape[0]
    accept = np.empty(n, dtype=np.int64)
    n_done = 0
    for k in range(perms.shape[0]):
        T = temps[k]
        for grp in range(n_groups):
            lo = grp * n // n_groups
            hi = (grp + 1) * n // n_groups
            n_acc = 0
            for q in range(lo, hi):
                i = perms[k, q]
                de = (1 - 2 * s[i]) * g[i]
                if metropolis:
                    if de < 0.0 or (T > 0.0 and noise[k, q] < np.exp(-de / T)):
                        accept[n_acc] = i
                        n_acc += 1
                elif de + T * noise[k, q] < 0.0:
                    accept[n_acc] = i
                    n_acc += 1
            for a in range(n_acc):
                i = accept[a]
                de = (1 - 2 * s[i]) * g[i]
                apply_flip(i, s, g, tv, tw, ptr, idx)
                e += de
                dsat = 0
                if i < n_orig:
                    dsat = -cnf_flip(i, s, cnt, cvars, cneg, occ_ptr, occ)
                    unsat -= dsat
                if record:
                    rec_de[n_rec] = -de
                    rec_dsat[n_rec] = dsat
                    rec_var[n_rec] = i
                    n_rec += 1
        n_done += 1
        if (step0 + n_done) % RECOMPUTE_EVERY == 0:
            e = _check_drift(tv, tw, const, s, e)
        trace_e[k] = e
        trace_u[k] = unsat
        if (step0 + n_done) % check_period == 0 and unsat == 0:
            return n_done, e, unsat, n_rec, True
    return n_done, e, unsat, n_rec, False


@njit(cache=True)
def decode(key, n, s):
    for i in range(n):
        s[i] = (key >> i) & 1


@njit(cache=True)
def encode(s):
    key = 0
    for i in range(s.shape[0]):
        if s[i]:
            key |= 1 << i
    return key


@njit(cache=True)
def plateau_bfs(start, n, tv, tw, const, ptr, idx, max_size):
    """Zero-dE flood fill from config ``start`` (bit i of the key is x_i).

    Returns (members, energy, is_local_min, complete). ``complete`` is False
    when the plateau exceeded ``max_size`` members.
    """
    s = np.zeros(n, dtype=np.int64)
    decode(start, n, s)
    e0 = energy(tv, tw, const, s)
    seen = {start: True}
    queue = [start]
    head = 0
    local_min = True
    while head < len(queue):
        key = queue[head]
        head += 1
        decode(key, n, s)
        g = fields(tv, tw, n, s)
        for i in range(n):
            de = (1 - 2 * s[i]) * g[i]
            if de < -DRIFT_TOL:
                local_min = False
            elif de <= DRIFT_TOL:
                nb = key ^ (1 << i)
                if nb not in seen:
                    if len(queue) >= max_size:
                        return np.array(queue, dtype=np.int64), e0, local_min, False
                    seen[nb] = True
                    queue.append(nb)
    return np.array(queue, dtype=np.int64), e0, local_min, True


@njit(cache=True)
def wang_landau(s, n_steps, picks, u, lng, hist, visited, ln_f, ln_f_final, flatness,
                check_every, bin_width, tv, tw, const, ptr, idx, record_bins, rec_keys, rec_e):
    """Flat-histogram walk over energy bins with single-bit-flip proposals.

    Bin b holds energies in [b*w, (b+1)*w); the last bin collects everything
    above. Configs reached with bin < ``record_bins`` and no downhill flip
    are stored (deduplicated) in ``rec_keys``/``rec_e``.

    Returns (steps_done, ln_f, n_records).
    """
    n = s.shape[0]
    nb = lng.shape[0]
    g = fields(tv, tw, n, s)
    e = energy(tv, tw, const, s)
    b = min(max(int(np.floor(e / bin_width + 1e-9)), 0), nb - 1)
    recorded = {np.int64(0): True}
    recorded.pop(np.int64(0))
    n_rec = 0
    moved = True
    steps = 0
    for k in range(n_steps):
        if ln_f < ln_f_final:
            break
        if moved and b < record_bins:
            lowest = True
            for i in range(n):
                if (1 - 2 * s[i]) * g[i] < -DRIFT_TOL:
                    lowest = False
                    break
            if lowest:
                key = encode(s)
                if key not in recorded and n_rec < rec_keys.shape[0]:
                    recorded[key] = True
                    rec_keys[n_rec] = key
                    rec_e[n_rec] = e
                    n_rec += 1
        i = picks[k]
        de = (1 - 2 * s[i]) * g[i]
        b2 = min(max(int(np.floor((e + de) / bin_width + 1e-9)), 0), nb - 1)
        moved = False
        if u[k] < np.exp(lng[b] - lng[b2]):
            apply_flip(i, s, g, tv, tw, ptr, idx)
            e += de
            b = b2
            moved = True
        lng[b] += ln_f
        hist[b] += 1
        visited[b] = True
        steps += 1
        if steps % RECOMPUTE_EVERY == 0:
            e = energy(tv, tw, const, s)
        if steps % check_every == 0:
            tot = 0.0
            cnt = 0
            mn = 1e300
            for q in range(nb):
                if visited[q]:
                    tot += hist[q]
                    cnt += 1
                    if hist[q] < mn:
                        mn = hist[q]
            if cnt > 0 and mn >= flatness * tot / cnt:
                ln_f *= 0.5
                for q in range(nb):
                    hist[q] = 0.0
    return steps, ln_f, n_rec
