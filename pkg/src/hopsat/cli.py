"""``hopsat`` command line: gen, convert, solve, bench, landscape.

Exit codes: 0 success / solved, 10 budget exhausted unsolved, 2 bad
configuration, 1 I/O or input errors.

Every subcommand accepts ``--config FILE`` (flat JSON object keyed by the
long option names with dashes replaced by underscores). Explicit flags
win over the file, and the merged configuration is written with the
outputs.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as B
from . import landscape as L
from .cnf import ParseError, generate_random_3sat, read_dimacs, write_dimacs
from .energy import model_to_json, pubo_from_cnf, quadratize
from .solvers import ConfigError, run_pubo, run_qubo

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_UNSOLVED = 0, 1, 2, 10


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _resolve(args, defaults: dict) -> dict:
    """defaults <- config file <- explicitly given flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise UsageError(f"missing required setting {key!r}")
    return cfg[key]


def _instances(pattern: str) -> list[str]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise UsageError(f"no instances match {pattern!r}")
    return paths


# -- gen ---------------------------------------------------------------------

GEN_DEFAULTS = {"n": 50, "ratio": 4.23, "count": 1, "seed": 0, "out_dir": ".", "distinct_clauses": False}


def gen_filename(n: int, ratio: float, seed: int, index: int) -> str:
    return f"rand3sat-n{n}-r{ratio:g}-s{seed}-{index:04d}.cnf"


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def cmd_gen(args) -> int:
    cfg = _resolve(args, GEN_DEFAULTS)
    if cfg["count"] < 0:
        raise UsageError("count must be >= 0")
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    for k in range(cfg["count"]):
        f = generate_random_3sat(cfg["n"], cfg["ratio"], instance_seed(cfg["seed"], k),
                                 distinct_clauses=cfg["distinct_clauses"])
        name = gen_filename(cfg["n"], cfg["ratio"], cfg["seed"], k)
        write_dimacs(f, out / name, [f"random 3-SAT n={cfg['n']} ratio={cfg['ratio']} seed={cfg['seed']} index={k}"])
    _write(out / "gen_config.json", _dump(cfg))
    return EXIT_OK


# -- convert -----------------------------------------------------------------

CONVERT_DEFAULTS = {"input": None, "form": "pubo", "penalty": 1.0, "out": None}


def cmd_convert(args) -> int:
    cfg = _resolve(args, CONVERT_DEFAULTS)
    if cfg["form"] not in ("pubo", "qubo"):
        raise UsageError("form must be pubo or qubo")
    if cfg["form"] == "qubo" and not cfg["penalty"] > 0:
        raise UsageError("penalty must be > 0")
    f = read_dimacs(_require(cfg, "input"))
    model = pubo_from_cnf(f) if cfg["form"] == "pubo" else quadratize(f, cfg["penalty"])
    text = model_to_json(model) + "\n"
    if cfg["out"]:
        _write(Path(cfg["out"]), text)
        _write(Path(cfg["out"] + ".config.json"), _dump(cfg))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- solve -------------------------------------------------------------------

SOLVE_DEFAULTS = {
    "input": None, "solver": "pubo-focus", "seed": 0, "max_steps": None,
    "n_groups": B.DEFAULT_QUBO["n_groups"], "t_initial": B.DEFAULT_QUBO["t_initial"],
    "schedule": B.DEFAULT_QUBO["shape"], "geometric_factor": 0.99,
    "penalty": B.DEFAULT_QUBO["penalty_P"], "sat_check_period": 1, "acceptance": "noise",
    "e_offset": B.DEFAULT_FOCUS_OFFSET, "out": None, "trace": None,
}


def _solver_spec(cfg: dict, max_steps=None) -> B.SolverSpec:
    name = cfg["solver"]
    if name == "qubo":
        return B.default_solver(name, max_steps, n_groups=cfg["n_groups"], t_initial=cfg["t_initial"],
                                shape=cfg["schedule"], geometric_factor=cfg["geometric_factor"],
                                penalty_P=cfg["penalty"], sat_check_period=cfg["sat_check_period"],
                                acceptance=cfg["acceptance"])
    if name == "pubo-focus":
        return B.default_solver(name, max_steps, e_offset_increment=cfg["e_offset"])
    return B.default_solver(name, max_steps)


def cmd_solve(args) -> int:
    cfg = _resolve(args, SOLVE_DEFAULTS)
    if cfg["solver"] not in B.SOLVERS:
        raise UsageError(f"solver must be one of {B.SOLVERS}")
    if cfg["max_steps"] is None:
        cfg["max_steps"] = B.DEFAULT_MAX_STEPS[cfg["solver"]]
    spec = _solver_spec(cfg, cfg["max_steps"])
    f = read_dimacs(_require(cfg, "input"))
    run_cfg = replace(spec.config, seed=cfg["seed"])
    want_trace = cfg["trace"] is not None
    if spec.kind == "qubo":
        res = run_qubo(f, quadratize(f, run_cfg.penalty_P), run_cfg, trace=want_trace)
    else:
        res = run_pubo(f, pubo_from_cnf(f), run_cfg, trace=want_trace)
    # output destinations are left out so reruns compare byte for byte
    body = {**res.to_dict(), "solver": spec.name, "solver_config": spec.to_dict()["config"],
            "config": {k: v for k, v in cfg.items() if k not in ("out", "trace")}}
    text = _dump(body)
    if cfg["out"]:
        _write(Path(cfg["out"]), text)
    else:
        sys.stdout.write(text)
    if want_trace:
        _write(Path(cfg["trace"]), res.trace_csv())
    return EXIT_OK if res.solved else EXIT_UNSOLVED


# -- bench -------------------------------------------------------------------

BENCH_DEFAULTS = {
    "instances": None, "out_dir": "bench_out", "solvers": list(B.SOLVERS), "n_runs": 100,
    "target": 0.99, "master_seed": 0, "jobs": os.cpu_count() or 1,
    "qubo_max_steps": B.DEFAULT_MAX_STEPS["qubo"],
    "pubo_classic_max_steps": B.DEFAULT_MAX_STEPS["pubo-classic"],
    "pubo_focus_max_steps": B.DEFAULT_MAX_STEPS["pubo-focus"],
    "qubo_n_groups": B.DEFAULT_QUBO["n_groups"], "qubo_t_initial": B.DEFAULT_QUBO["t_initial"],
    "qubo_penalty": B.DEFAULT_QUBO["penalty_P"], "focus_e_offset": B.DEFAULT_FOCUS_OFFSET,
    **B.CostModel().to_dict(),
}


def cmd_bench(args) -> int:
    cfg = _resolve(args, BENCH_DEFAULTS)
    paths = _instances(_require(cfg, "instances"))
    specs = []
    for name in cfg["solvers"]:
        if name not in B.SOLVERS:
            raise UsageError(f"unknown solver {name!r}")
        steps = cfg[name.replace("-", "_") + "_max_steps"]
        if name == "qubo":
            specs.append(B.default_solver(name, steps, n_groups=cfg["qubo_n_groups"],
                                          t_initial=cfg["qubo_t_initial"], penalty_P=cfg["qubo_penalty"]))
        elif name == "pubo-focus":
            specs.append(B.default_solver(name, steps, e_offset_increment=cfg["focus_e_offset"]))
        else:
            specs.append(B.default_solver(name, steps))
    cost = B.CostModel.from_dict({k: cfg[k] for k in B.CostModel().to_dict()})
    insts = [B.Instance(Path(p).stem, read_dimacs(p), f"file:{Path(p).name}") for p in paths]
    report = B.run_benchmark(insts, specs, B.TtsConfig(cfg["target"], cfg["n_runs"]), cost,
                             cfg["master_seed"], cfg["jobs"])
    out = Path(cfg["out_dir"])
    _write(out / "report.json", report.to_json() + "\n")
    _write(out / "medians.csv", report.medians_csv())
    _write(out / "resolved_config.json", _dump(cfg))
    return EXIT_OK


# -- landscape ---------------------------------------------------------------

LANDSCAPE_DEFAULTS = {
    "instances": None, "out_dir": "landscape_out", "T": [0.05, 0.5, 10.0], "P": 0.5,
    "mode": "threshold", "p_min": 0.5, "n_valleys": 200, "levels": 5, "seed": 0,
    "bin_width": 0.01, "exhaustive_max_n": 16, "dump_valleys": False,
}
LANDSCAPE_COLUMNS = ["instance", "T", "P", "mode", "s_bin", "sigma", "n_valleys"]


def landscape_rows(name: str, formula, cfg: dict):
    """(rows, {label: LandscapeStats}, valleys) for one instance."""
    pubo = pubo_from_cnf(formula)
    qubo = quadratize(formula, cfg["P"])
    if formula.n_vars <= cfg["exhaustive_max_n"]:
        valleys = L.discard_saddles(L.enumerate_valleys_exhaustive(pubo, cfg["levels"]))
        if cfg["n_valleys"]:
            valleys = valleys[:cfg["n_valleys"]]
    else:
        valleys = L.gwl_sample_valleys(pubo, cfg["n_valleys"],
                                       L.GwlConfig(seed=cfg["seed"], n_levels=cfg["levels"])).valleys
    n = formula.n_vars
    stats = {"pubo": L.valley_entropy_complexity(valleys, n, cfg["bin_width"])}
    rows = [(name, "", cfg["P"], "pubo", b, sg, c) for b, sg, c in stats["pubo"].rows()]
    for T in cfg["T"]:
        comps = L.build_qubo_connectivity(valleys, qubo, T, cfg["mode"], cfg["p_min"],
                                          seed=cfg["seed"] if cfg["mode"] == "bernoulli" else None)
        st = L.valley_entropy_complexity(comps, n, cfg["bin_width"])
        stats[T] = st
        rows += [(name, T, cfg["P"], cfg["mode"], b, sg, c) for b, sg, c in st.rows()]
    return rows, stats, valleys


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LANDSCAPE_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def cmd_landscape(args) -> int:
    cfg = _resolve(args, LANDSCAPE_DEFAULTS)
    if cfg["mode"] not in ("threshold", "bernoulli"):
        raise UsageError("mode must be threshold or bernoulli")
    if not cfg["P"] > 0 or cfg["levels"] < 1 or cfg["bin_width"] <= 0:
        raise UsageError("P and bin_width must be > 0 and levels >= 1")
    paths = _instances(_require(cfg, "instances"))
    out = Path(cfg["out_dir"])
    all_rows: list = []
    per_label: dict = {}
    dumps = {}
    for p in paths:
        name = Path(p).stem
        rows, stats, valleys = landscape_rows(name, read_dimacs(p), cfg)
        all_rows += rows
        for label, st in stats.items():
            per_label.setdefault(label, []).append(st)
        if cfg["dump_valleys"]:
            n = read_dimacs(p).n_vars
            dumps[name] = [{"energy": v.energy, "configs": [L.bitstring(k, n) for k in v.configs]}
                           for v in valleys]
    agg = []
    for label, sts in per_label.items():
        avg = L.average_stats(sts)
        mode = "pubo" if label == "pubo" else cfg["mode"]
        T = "" if label == "pubo" else label
        agg += [("ALL", T, cfg["P"], mode, b, sg, c) for b, sg, c in avg.rows()]
    _write(out / "landscape.csv", _csv(all_rows))
    _write(out / "landscape_avg.csv", _csv(agg))
    _write(out / "resolved_config.json", _dump(cfg))
    if cfg["dump_valleys"]:
        _write(out / "valleys.json", _dump(dumps))
    return EXIT_OK


# -- entry -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hopsat", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate random 3-SAT DIMACS files")
    g.add_argument("--n", type=int)
    g.add_argument("--ratio", type=float)
    g.add_argument("--count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("--distinct-clauses", dest="distinct_clauses", action="store_const", const=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("convert", help="compile a CNF into PUBO or QUBO JSON")
    c.add_argument("input", nargs="?")
    c.add_argument("--form", choices=["pubo", "qubo"])
    c.add_argument("--penalty", type=float)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert)

    s = sub.add_parser("solve", help="run one solver trajectory")
    s.add_argument("input", nargs="?")
    s.add_argument("--solver", choices=list(B.SOLVERS))
    s.add_argument("--seed", type=int)
    s.add_argument("--max-steps", dest="max_steps", type=int)
    s.add_argument("--n-groups", dest="n_groups", type=int)
    s.add_argument("--t-initial", dest="t_initial", type=float)
    s.add_argument("--schedule", choices=["linear", "geometric"])
    s.add_argument("--geometric-factor", dest="geometric_factor", type=float)
    s.add_argument("--penalty", type=float)
    s.add_argument("--sat-check-period", dest="sat_check_period", type=int)
    s.add_argument("--acceptance", choices=["noise", "metropolis"])
    s.add_argument("--e-offset", dest="e_offset", type=float)
    s.add_argument("--out")
    s.add_argument("--trace", help="write the per-step trace CSV here")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="multi-instance TTS/ETS benchmark")
    b.add_argument("instances", nargs="?", help="glob of DIMACS files")
    b.add_argument("--out-dir", dest="out_dir")
    b.add_argument("--solvers", nargs="+")
    b.add_argument("--n-runs", dest="n_runs", type=int)
    b.add_argument("--target", type=float)
    b.add_argument("--master-seed", dest="master_seed", type=int)
    b.add_argument("--jobs", type=int)
    b.set_defaults(func=cmd_bench)

    la = sub.add_parser("landscape", help="valley entropy / complexity statistics")
    la.add_argument("instances", nargs="?", help="glob of DIMACS files")
    la.add_argument("--out-dir", dest="out_dir")
    la.add_argument("--T", dest="T", type=float, nargs="+")
    la.add_argument("--P", dest="P", type=float)
    la.add_argument("--mode", choices=["threshold", "bernoulli"])
    la.add_argument("--p-min", dest="p_min", type=float)
    la.add_argument("--n-valleys", dest="n_valleys", type=int)
    la.add_argument("--levels", type=int)
    la.add_argument("--seed", type=int)
    la.add_argument("--dump-valleys", dest="dump_valleys", action="store_const", const=True)
    la.set_defaults(func=cmd_landscape)

    for p in (g, c, s, b, la):
        p.add_argument("--config", help="flat JSON config file; flags override it")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"hopsat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError) as exc:
        print(f"hopsat: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hopsat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
