"""Command-line experiment runner.

Usage::

    ranked-bm <command> --config FILE [--seed U64] [--jobs N] [--out DIR]
                        [--format csv|json|binary] [command options]

Commands: validate, stationary, simulate, converge, compare, collisions.
Exit status is 0 on success, 1 when a checked condition fails and 2 for
usage or configuration errors.  The seed is taken from ``--seed``, else from
the ``RANKED_BM_SEED`` environment variable, else from the config.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
import time
from functools import reduce
from pathlib import Path

import numpy as np

from . import analyze, io
from .config import STATIONARY, ExperimentConfig, load_config
from .errors import ConfigError, RankedBMError
from .infinite import build_lambda_ladder, check_pi_admissible, lambda_limit_symmetric
from .model import (
    NAMED, InitialConfig, check_initial_admissible, gaps_from_positions,
    rank_configuration, validate_spec,
)
from .reflection import build_reflection_data, stationary_rates
from .simulate import (
    NAMED_EULER, NoiseSource, run_replicas, sample_stationary_gaps,
    simulate_coupled, simulate_named, simulate_ranked_gaps,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "RANKED_BM_SEED"


class _Run:
    """Resolved settings shared by every command."""

    def __init__(self, args, cfg: ExperimentConfig):
        seed = args.seed
        if seed is None and os.environ.get(SEED_ENV):
            try:
                seed = int(os.environ[SEED_ENV])
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer") from None
        if seed is not None:
            cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=seed))
        self.cfg = cfg
        self.jobs = max(1, args.jobs)
        self.out = Path(args.out or cfg.output.dir)
        self.format = args.format or cfg.output.format
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.started = time.perf_counter()

    @property
    def sim(self):
        return self.cfg.sim

    def csv(self, name, header, rows):
        self.outputs.append(io.write_csv(self.out / name, header, rows))

    def json(self, name, obj):
        self.outputs.append(io.write_json(self.out / name, obj))

    def binary(self, name, array):
        self.outputs.append(io.write_binary(self.out / name, array))

    def finish(self, command: str, extra=None):
        io.write_manifest(self.out, command=command, config_hash=self.cfg.digest(),
                          seed=self.sim.seed, wall_time=time.perf_counter() - self.started,
                          outputs=[p.name for p in self.outputs], extra=extra)


def _size(cfg: ExperimentConfig) -> int:
    if cfg.sim.N is not None:
        return int(cfg.sim.N)
    if cfg.spec.infinite:
        raise ConfigError("an infinite spec needs sim.N to simulate")
    return int(cfg.spec.size)


def _start_gaps(cfg: ExperimentConfig, N: int, replica: int) -> tuple[np.ndarray, float]:
    """Initial gaps and bottom position for one replica."""
    init = cfg.initial
    if init is None:
        return np.zeros(N - 1), 0.0
    if init == STATIONARY:
        law = stationary_rates(cfg.spec, N)
        if law.rates is None:
            raise RankedBMError(f"no stationary law to start from ({law.status})")
        rng = NoiseSource(cfg.sim.seed, replica).init_generator()
        return sample_stationary_gaps(law.rates, rng), 0.0
    y = init.values.array(N)
    if init.kind == NAMED:
        y = rank_configuration(y).ranked
    return np.asarray(gaps_from_positions(y), dtype=float), float(y[0])


def _named_start(cfg: ExperimentConfig, N: int, replica: int) -> np.ndarray:
    if isinstance(cfg.initial, InitialConfig):
        return cfg.initial.values.array(N)
    z, y1 = _start_gaps(cfg, N, replica)
    return np.concatenate(([y1], y1 + np.cumsum(z)))


def _law_rates(cfg: ExperimentConfig, N: int):
    return stationary_rates(cfg.spec, N).rates if N >= 2 else None


# commands

def cmd_validate(run: _Run) -> int:
    cfg = run.cfg
    report = validate_spec(cfg.spec)
    out = {"spec": report.to_dict()}
    failing = report.failing()
    if isinstance(cfg.initial, InitialConfig):
        ini = check_initial_admissible(cfg.initial)
        out["initial"] = ini.to_dict()
        failing += ini.failing()
    ok = not failing
    out["passed"] = ok
    out["failing"] = failing
    run.json("validation.json", out)
    for cid in failing:
        print(f"FAIL {cid}")
    run.finish("validate")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_stationary(run: _Run, args) -> int:
    cfg = run.cfg
    ladder = args.ladder or cfg.analysis.ladder
    N = args.N or cfg.analysis.N
    if ladder is None and N is None:
        if cfg.spec.infinite:
            raise ConfigError("an infinite spec needs --N or --ladder")
        N = cfg.spec.size
    if ladder is not None:
        try:
            lad = build_lambda_ladder(cfg.spec, ladder)
        except RankedBMError as exc:
            run.json("ladder.json", {"error": type(exc).__name__, "detail": str(exc)})
            run.finish("stationary")
            print(f"FAIL {type(exc).__name__}: {exc}")
            return EXIT_FAIL
        out = lad.to_dict()
        if cfg.spec.infinite and cfg.spec.symmetric:
            try:
                rule = lambda_limit_symmetric(cfg.spec, lad)
                out["closed_form_limit"] = rule.to_dict()
                out["admissibility"] = check_pi_admissible(rule).to_dict()
            except RankedBMError as exc:
                out["closed_form_limit"] = {"unavailable": str(exc)}
        run.csv("ladder.csv", ["N", "k", "lambda"], lad.rows())
        run.json("ladder.json", out)
        run.finish("stationary")
        return EXIT_OK
    law = stationary_rates(cfg.spec, int(N))
    out = law.to_dict()
    out["reflection"] = build_reflection_data(cfg.spec, int(N)).to_dict()
    run.json("stationary.json", out)
    if law.rates is not None:
        run.csv("rates.csv", ["k", "lambda", "mean"],
                ((k, r, 1.0 / r) for k, r in enumerate(law.rates, start=1)))
    run.finish("stationary")
    if law.status != "OK":
        print(f"FAIL {law.status}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_simulate(run: _Run) -> int:
    cfg, sim = run.cfg, run.sim
    N = _size(cfg)
    targets = cfg.analysis.targets

    def one(r):
        if sim.scheme == NAMED_EULER:
            tr = simulate_named(cfg.spec, _named_start(cfg, N, r), sim, replica=r)
            return tr, tr.as_gap_trajectory()
        z0, y1 = _start_gaps(cfg, N, r)
        tr = simulate_ranked_gaps(cfg.spec, z0, sim, N=N, y1=y1, replica=r)
        return tr, tr

    results = run_replicas(one, sim.replicas, run.jobs)
    if "trajectory" in targets:
        _write_trajectories(run, [r[0] for r in results], sim.scheme == NAMED_EULER)
    rates = _law_rates(cfg, N)
    summary = {"N": N, "replicas": sim.replicas, "scheme": sim.scheme,
               "boundary": sim.boundary}
    gaps = [r[1] for r in results]
    if sim.scheme != NAMED_EULER:
        summary["max_lcp_residual"] = max(g.max_lcp_residual for g in gaps)
    if rates is not None and ("gap_stats" in targets or "histogram" in targets):
        try:
            stats = analyze.empirical_gap_stats(gaps, rates)
        except RankedBMError as exc:
            summary["gap_stats"] = {"unavailable": str(exc)}
        else:
            summary["gap_stats"] = stats.to_dict()
            if "gap_stats" in targets:
                run.csv("gap_stats.csv", ["k", "count", "mean", "target_mean", "var", "ks", "stride"],
                        ((k + 1, stats.count[k], stats.mean[k], 1.0 / stats.rates[k],
                          stats.var[k], stats.ks[k], stats.stride[k]) for k in range(N - 1)))
            if "histogram" in targets:
                per = [analyze.gap_samples(g, rates) for g in gaps]
                pooled = [np.concatenate([p[k] for p in per]) for k in range(N - 1)]
                run.csv("histogram.csv", ["series", "x", "y"], io.histogram_rows(pooled, rates))
    run.json("simulate.json", summary)
    run.finish("simulate")
    return EXIT_OK


def _write_trajectories(run: _Run, trajs, named: bool):
    if run.format == "csv":
        rows_fn = io.named_rows if named else io.trajectory_rows
        rows = (row for r, tr in enumerate(trajs) for row in rows_fn(tr, r))
        run.csv("trajectory.csv", ["replica", "time", "series", "k", "value"], rows)
        return
    for r, tr in enumerate(trajs):
        if named:
            cols = {"times": tr.times, "X": tr.X, "rank_holder": tr.perm + 1}
        else:
            cols = {"times": tr.times, "Y1": tr.Y1, "Z": tr.Z, "L": tr.L}
        if run.format == "json":
            run.json(f"trajectory_{r}.json", cols)
        else:
            # columns: time, then the remaining series in the order above
            stacked = np.column_stack([np.asarray(v, dtype=float) for v in cols.values()])
            run.binary(f"trajectory_{r}.bin", stacked)


def cmd_converge(run: _Run, args) -> int:
    cfg, sim = run.cfg, run.sim
    N = _size(cfg)
    law = stationary_rates(cfg.spec, N)
    if law.rates is None:
        run.json("converge.json", {"error": law.status})
        run.finish("converge")
        print(f"FAIL {law.status}")
        return EXIT_FAIL
    rates = law.rates
    start = args.start or cfg.analysis.start
    factor = args.factor if args.factor is not None else cfg.analysis.factor
    if start == "stationary":
        factor = 1.0
    checkpoints = sorted(cfg.analysis.checkpoints)
    steps = [int(round(t / sim.dt)) for t in checkpoints]
    stride = reduce(math.gcd, steps)
    run_cfg = dataclasses.replace(sim, T=max(checkpoints), burn_in=0.0, output_stride=stride)
    rows = [s // stride for s in steps]

    def one(r):
        e = NoiseSource(sim.seed, r).init_generator().standard_exponential(N - 1)
        base0 = np.where(np.isinf(rates), 0.0, e / rates)
        if start == "custom":
            z0 = np.asarray(cfg.analysis.custom_start, dtype=float)
        else:
            z0 = factor * base0
        a, b = simulate_coupled(cfg.spec, cfg.spec, z0, base0, run_cfg, replica=r, N_a=N, N_b=N)
        return a.Z[rows], b.Z[rows]

    res = run_replicas(one, sim.replicas, run.jobs)
    starts = np.stack([r[0] for r in res])   # replica, checkpoint, k
    base = np.stack([r[1] for r in res])
    table = []
    for i, t in enumerate(checkpoints):
        dom = analyze.dominance_check(base[:, i, :], starts[:, i, :])
        for k in range(N - 1):
            table.append((t, k + 1, analyze.ks_exponential(starts[:, i, k], rates[k]),
                          analyze.ks_exponential(base[:, i, k], rates[k]),
                          dom.worst_margin[k]))
    run.csv("converge.csv", ["t", "k", "ks_start", "ks_baseline", "dominance_margin"], table)
    run.json("converge.json", {"start": start, "factor": factor, "checkpoints": checkpoints,
                               "replicas": sim.replicas, "rates": rates, "table": table})
    run.finish("converge")
    return EXIT_OK


def cmd_compare(run: _Run, args) -> int:
    cfg_a = run.cfg
    cfg_b = load_config(args.config_b)
    if args.seed is not None or os.environ.get(SEED_ENV):
        cfg_b = dataclasses.replace(cfg_b, sim=dataclasses.replace(cfg_b.sim, seed=cfg_a.sim.seed))
    inequality = args.inequality or cfg_a.analysis.inequality
    threshold = args.threshold if args.threshold is not None else cfg_a.analysis.threshold
    sim = run.sim
    Na, Nb = _size(cfg_a), _size(cfg_b)

    def one(r):
        za, ya = _start_gaps(cfg_a, Na, r)
        zb, yb = _start_gaps(cfg_b, Nb, r)
        pair = simulate_coupled(cfg_a.spec, cfg_b.spec, za, zb, sim, replica=r,
                                y1_a=ya, y1_b=yb, N_a=Na, N_b=Nb)
        return analyze.comparison_report(pair, inequality)

    try:
        reports = run_replicas(one, sim.replicas, run.jobs)
    except RankedBMError as exc:
        print(f"FAIL {type(exc).__name__}: {exc}")
        run.finish("compare")
        return EXIT_FAIL
    frac = np.mean([r.violation_fraction for r in reports], axis=0)
    within = np.mean([r.within_slack_fraction for r in reports], axis=0)
    worst = np.max([r.max_violation for r in reports], axis=0)
    run.csv("compare.csv", ["coordinate", "violation_fraction", "within_slack_fraction",
                            "max_violation"],
            ((k + 1, frac[k], within[k], worst[k]) for k in range(len(frac))))
    passed = bool(np.all(frac < threshold))
    run.json("compare.json", {"inequality": inequality, "threshold": threshold,
                              "slack": reports[0].slack, "replicas": sim.replicas,
                              "violation_fraction": frac, "within_slack_fraction": within,
                              "max_violation": worst, "passed": passed})
    run.finish("compare")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_collisions(run: _Run) -> int:
    cfg, sim = run.cfg, run.sim
    K = cfg.analysis.K
    cond = analyze.collision_condition_check(cfg.spec, K)
    N = _size(cfg)
    dts = cfg.analysis.dts or (sim.dt,)
    rows = []
    for dt in dts:
        deltas = cfg.analysis.deltas or tuple(c * math.sqrt(dt) for c in (0.5, 1.0, 2.0, 4.0))
        dcfg = dataclasses.replace(sim, dt=dt)

        def one(r):
            z0, y1 = _start_gaps(cfg, N, r)
            tr = simulate_ranked_gaps(cfg.spec, z0, dcfg, N=N, y1=y1, replica=r)
            return analyze.near_collision_stats(tr, deltas)

        reps = run_replicas(one, sim.replicas, run.jobs)
        counts = sum(rep.counts for rep in reps)
        steps = sum(rep.steps for rep in reps)
        for i, k in enumerate(reps[0].ranks):
            for j, d in enumerate(reps[0].deltas):
                rows.append((dt, d, k, int(counts[i, j]), steps, counts[i, j] / steps))
    run.csv("collisions.csv", ["dt", "delta", "k", "count", "steps", "fraction"], rows)
    run.json("collisions.json", {"condition": cond.to_dict(), "near_collisions": rows})
    run.finish("collisions")
    return EXIT_OK


# parser

def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML experiment config")
    common.add_argument("--seed", type=_u64, default=None, help="overrides config and env seed")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for replicas")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json", "binary"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ranked-bm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check standing assumptions")
    p = sub.add_parser("stationary", parents=[common], help="stationary rates or lambda ladder")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--ladder", type=_int_list, default=None)
    sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    p = sub.add_parser("converge", parents=[common], help="convergence from a chosen start")
    p.add_argument("--start", choices=("dominating", "stationary", "custom"), default=None)
    p.add_argument("--factor", type=float, default=None)
    p = sub.add_parser("compare", parents=[common], help="coupled pathwise comparison")
    p.add_argument("--config-b", required=True)
    p.add_argument("--inequality", choices=analyze.INEQUALITIES, default=None)
    p.add_argument("--threshold", type=float, default=None)
    sub.add_parser("collisions", parents=[common], help="collision condition and statistics")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        run = _Run(args, load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "validate":
            return cmd_validate(run)
        if args.command == "stationary":
            return cmd_stationary(run, args)
        if args.command == "simulate":
            return cmd_simulate(run)
        if args.command == "converge":
            return cmd_converge(run, args)
        if args.command == "compare":
            return cmd_compare(run, args)
        return cmd_collisions(run)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RankedBMError as exc:
        print(f"FAIL {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
