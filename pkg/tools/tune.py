"""One-off hyperparameter tuning for the bench defaults.

Tuning instances come from generator seeds 900000+ and never overlap the
acceptance instances (seeds < 10000). PUBO budgets are read off a single
long run per seed; QUBO configs are a grid because the anneal schedule
spans the whole budget.

    python tools/tune.py [--instances 10] [--runs 50]
"""

import argparse
import itertools
import json
import time

import numpy as np

from hopsat.bench import run_seed, tts_steps
from hopsat.cnf import generate_random_3sat, is_satisfiable
from hopsat.energy import pubo_from_cnf, quadratize
from hopsat.solvers import AnnealSchedule, PuboSolverConfig, QuboSolverConfig, run_pubo, run_qubo


def tuning_set(n, count, ratio=4.23, first_seed=900_000):
    out, seed = [], first_seed
    while len(out) < count:
        f = generate_random_3sat(n, ratio, seed)
        if is_satisfiable(f):
            out.append((f"tune-{seed}", f))
        seed += 1
    return out


def pubo_budgets(instances, rule, inc, runs, budgets, cap):
    per_budget = {b: [] for b in budgets}
    for iid, f in instances:
        p = pubo_from_cnf(f)
        steps = []
        for r in range(runs):
            cfg = PuboSolverConfig(rule, cap, seed=run_seed(1, iid, r),
                                   e_offset_increment=inc if rule == "focus_offset" else None)
            res = run_pubo(f, p, cfg)
            steps.append(res.steps_taken if res.solved else np.inf)
        steps = np.array(steps)
        for b in budgets:
            per_budget[b].append(tts_steps(float(np.mean(steps <= b)), b))
    return {b: float(np.median(v)) for b, v in per_budget.items()}


def qubo_grid(instances, runs, groups, temps, budgets):
    out = {}
    for G, T0, ms in itertools.product(groups, temps, budgets):
        tts = []
        for iid, f in instances:
            q = quadratize(f, 1.0)
            cfg = QuboSolverConfig(G, AnnealSchedule(T0, ms), ms)
            ok = [run_qubo(f, q, QuboSolverConfig(G, cfg.schedule, ms, seed=run_seed(1, iid, r))).solved
                  for r in range(runs)]
            tts.append(tts_steps(float(np.mean(ok)), ms))
        out[(G, T0, ms)] = float(np.median(tts))
        print(f"qubo G={G} T0={T0} ms={ms}: median tts {out[(G, T0, ms)]:.0f}", flush=True)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--runs", type=int, default=50)
    args = ap.parse_args()
    inst = tuning_set(args.n, args.instances)
    t0 = time.time()
    budgets = [250, 500, 1000, 2000, 5000, 10000, 20000]
    res = {"n": args.n, "instances": [i for i, _ in inst], "runs": args.runs}
    for inc in (0.5, 1.0):
        r = pubo_budgets(inst, "focus_offset", inc, args.runs, budgets, max(budgets))
        print("focus inc", inc, r, flush=True)
        res[f"focus_inc{inc}"] = r
    r = pubo_budgets(inst, "classic", None, args.runs, budgets, max(budgets))
    print("classic", r, flush=True)
    res["classic"] = r
    q = qubo_grid(inst, max(10, args.runs // 2), [4, 8, 32], [1.0, 1.5, 2.0], [2000, 5000, 10000])
    best = min(q, key=q.get)
    res["qubo"] = {str(k): v for k, v in q.items()}
    res["qubo_best"] = best
    print("best qubo", best, q[best], "elapsed", time.time() - t0)
    print(json.dumps(res, indent=1, default=str))


if __name__ == "__main__":
    main()
