"""Command line entry point: bound | compile | simulate | reshape-bench | compare."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .dynamics import bench_reshaping
from .errors import ConfigError, DiagLearnError
from .estimation import IDEAL, RESHAPED, EstimationRun, baselines, estimate
from .l1 import (BosonicProblem, L1Problem, L1Solution, bosonic_columns, closed_form_bosonic,
                 closed_form_independent, solution_to_json, solve_l1)
from .pauli import GeneratorSet
from .protocol import Protocol, compile_protocol, protocol_to_json

COMMANDS = ("bound", "compile", "simulate", "reshape-bench", "compare")
MATCH_TOL = 1e-9

ESTIMATION_FIELDS = ("protocol_id", "mode", "L", "nu", "q_true", "q_est_mean", "q_est_var", "crb", "ratio")
BASELINE_FIELDS = ("n", "alpha_hash", "Q1", "Q2", "var_local", "var_entangled")
TRIAL_FIELDS = ("n", "lambda", "t", "L", "trial", "X")
SUMMARY_FIELDS = ("L", "bias_norm", "mean_X", "var_X", "bound_2l2t2_over_L")


def _digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def dumps_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def dumps_csv(fields: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def dumps_table(fields: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        return dumps_json([{k: _plain(v) for k, v in zip(fields, row)} for row in rows])
    return dumps_csv(fields, rows)


def _gf2_rank(masks: Sequence[int]) -> int:
    basis: list[int] = []
    for v in masks:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


# -- pipelines --------------------------------------------------------------

def _qubit_problem(cfg: ExperimentConfig) -> tuple[GeneratorSet, L1Problem]:
    gens = cfg.generator_set()
    return gens, L1Problem.from_generators(gens, cfg.alpha, cfg.t, cfg.columns)


def solve_config(cfg: ExperimentConfig) -> L1Solution:
    if cfg.is_bosonic:
        prob = BosonicProblem(cfg.bosonic.m, cfg.bosonic.P, cfg.alpha, cfg.t).to_l1()
    else:
        _, prob = _qubit_problem(cfg)
    return solve_l1(prob)


def bound_report(cfg: ExperimentConfig) -> dict:
    sol = solve_config(cfg)
    doc = {"solution": solution_to_json(sol), "t": cfg.t}
    check = None
    if cfg.is_bosonic:
        doc["columns"] = [list(c) for c in bosonic_columns(cfg.bosonic.m, cfg.bosonic.P)]
        check = ("bosonic", closed_form_bosonic(cfg.alpha, cfg.bosonic.P, cfg.t))
    else:
        gens = cfg.generator_set()
        if cfg.columns is None and _gf2_rank(gens.masks) == gens.m:
            check = ("independent", closed_form_independent(cfg.alpha, cfg.t))
    if check is not None:
        kind, value = check
        status = "matched" if abs(value - sol.bound) <= MATCH_TOL * max(1.0, value) else "mismatch"
        doc["closed_form"] = {"kind": kind, "value": value, "status": status}
    return doc


def compile_config(cfg: ExperimentConfig) -> Protocol:
    if cfg.is_bosonic:
        raise ConfigError("compile needs a qubit configuration")
    sol = solve_config(cfg)
    return compile_protocol(sol, cfg.generator_set().n, cfg.t)


def estimation_rows(cfg: ExperimentConfig, seed: int) -> list[tuple]:
    proto = compile_config(cfg)
    h0 = cfg.hamiltonian()
    q_true = cfg.q_true()
    pid = _digest(protocol_to_json(proto))
    est = cfg.estimation
    base = dict(protocol=proto, hamiltonian=h0, q_true=q_true, nu=est.nu, seed=seed,
                repetitions=est.repetitions)
    runs = [EstimationRun(mode=IDEAL, **base)]
    grid = list(cfg.trotter.L_grid)
    if cfg.trotter.L is not None and cfg.trotter.L not in grid:
        grid.insert(0, cfg.trotter.L)
    runs += [EstimationRun(mode=RESHAPED, L=L, **base) for L in grid]
    rows = []
    for run in runs:
        r = estimate(run)
        rows.append((pid, run.mode, run.L, run.nu, q_true, r.q_est, r.var, r.crb, r.ratio))
    return rows


def bench_tables(cfg: ExperimentConfig, seed: int):
    if cfg.is_bosonic:
        raise ConfigError("reshape-bench needs a qubit configuration")
    if not cfg.trotter.L_grid:
        raise ConfigError("trotter.L_grid is empty")
    if cfg.trotter.trials < 30:
        raise ConfigError("trotter.trials must be at least 30")
    if cfg.theta is None:
        cfg = replace(cfg, theta=(0.0,) * len(cfg.alpha))
    res = bench_reshaping(cfg.hamiltonian(), cfg.t, cfg.trotter.L_grid, cfg.trotter.trials, seed)
    return res.trial_rows(), res.summary_rows()


def baseline_rows(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.is_bosonic:
        raise ConfigError("compare needs a qubit configuration")
    sol = solve_config(cfg)
    n = cfg.generator_set().n
    rep = baselines(cfg.alpha, n, cfg.t, cfg.estimation.nu, sol.l1)
    return [(n, _digest(list(cfg.alpha)), rep.Q1, rep.Q2, rep.var_local, rep.var_entangled_meas)]


# -- command dispatch --------------------------------------------------------

def _resolve_seed(args, cfg: ExperimentConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.trotter.seed
    if seed is None:
        raise ConfigError("no seed: pass --seed or set trotter.seed in the config")
    if not 0 <= int(seed) < 1 << 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return int(seed)


def run_command(command: str, cfg: ExperimentConfig, fmt: str | None,
                seed: int | None = None) -> dict[str, str]:
    """Produce {file name: contents} for one command."""
    if command == "bound":
        doc = bound_report(cfg)
        if fmt == "csv":
            rows = [(e["x"], e["v"]) for e in doc["solution"]["a"]]
            return {"bound.csv": dumps_csv(("x", "v"), rows)}
        return {"bound.json": dumps_json(doc)}
    if command == "compile":
        doc = protocol_to_json(compile_config(cfg))
        if fmt == "csv":
            rows = [(e["time"], e["branch"], e["from"], e["to"]) for e in doc["events"]]
            return {"protocol.csv": dumps_csv(("time", "branch", "from", "to"), rows)}
        return {"protocol.json": dumps_json(doc)}
    fmt = fmt or "csv"
    if command == "simulate":
        return {f"estimation.{fmt}": dumps_table(ESTIMATION_FIELDS, estimation_rows(cfg, seed), fmt)}
    if command == "reshape-bench":
        trials, summary = bench_tables(cfg, seed)
        return {f"reshape_trials.{fmt}": dumps_table(TRIAL_FIELDS, trials, fmt),
                f"reshape_summary.{fmt}": dumps_table(SUMMARY_FIELDS, summary, fmt)}
    if command == "compare":
        return {f"baselines.{fmt}": dumps_table(BASELINE_FIELDS, baseline_rows(cfg), fmt)}
    raise ConfigError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diaglearn", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="overrides trotter.seed")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config)
        seed = _resolve_seed(args, cfg) if args.command in ("simulate", "reshape-bench") else None
        out = Path(args.out if args.out is not None else cfg.output.dir)
        files = run_command(args.command, cfg, args.format or cfg.output.format, seed)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out / name, "w", newline="") as fh:
                fh.write(text)
    except DiagLearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name in files:
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
