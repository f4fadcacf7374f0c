"""Command-line front end: ``stlforge parse|train|simulate|eval|verify``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DomainError, SpecError, StlForgeError, TrainingDiverged

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    from .config import load_config

    if not args.config:
        raise SpecError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.train.seed = args.seed
    return cfg


def _problem_and_params(cfg, args):
    from .checkpoint import load_checkpoint

    problem = cfg.train.build_problem()
    if not args.checkpoint:
        raise SpecError("--checkpoint is required")
    ckpt = load_checkpoint(args.checkpoint)
    return problem, ckpt.params(problem)


def cmd_parse(args) -> int:
    from .stl import describe_nodes, depth, to_text_stl

    cfg = _load(args)
    tc = cfg.train
    problem = tc.build_problem()
    dyn = problem.dynamics
    print(f"dynamics: {dyn.name}  states={list(dyn.states)} controls={list(dyn.controls)}")
    print(f"controller: dims={problem.layer_dims} params={problem.n_theta}")
    if problem.formula is None:
        print("formula: none")
        return EXIT_OK
    print(f"formula: {to_text_stl(problem.formula)}")
    print(f"horizon: {problem.horizon}  depth: {depth(problem.formula)}")
    rows = describe_nodes(problem.formula)
    print(f"{'node_id':>7}  {'kind':<10} {'weights':>7}  {'slots':<9} subformula")
    for r in rows:
        lo, hi = r["slots"]
        print(f"{r['node_id']:>7}  {r['kind']:<10} {r['weights']:>7}  {f'{lo}..{hi}':<9} {r['formula']}")
    n_beta = sum(r["weights"] for r in rows)
    print(f"beta slots: {n_beta}  smoothing params: {problem.zeta.size()} ({problem.zeta.form})")
    return EXIT_OK


def cmd_train(args) -> int:
    from .checkpoint import Checkpoint, save_checkpoint
    from .stl import to_text_stl
    from .trainer import train

    cfg = _load(args)
    if args.iterations is not None:
        cfg.train.iterations = args.iterations
    out = _out_dir(args)
    every = max(1, cfg.train.iterations // 20)

    def progress(i, rec):
        if not args.quiet and (i % every == 0 or i == cfg.train.iterations - 1):
            print(f"iter {i:>6}  {rec.branch:<10} J={rec.J:9.4f}  Gamma={rec.Gamma:9.4f}", flush=True)

    res = train(cfg.train, progress=progress)
    formula = to_text_stl(res.problem.formula) if res.problem.formula is not None else None
    ckpt = Checkpoint(res.policy, res.zeta, res.problem.horizon, cfg.train.seed, formula)
    save_checkpoint(ckpt, out / cfg.paths.checkpoint_out)
    res.log.to_csv(out / cfg.paths.log_out)
    print(f"trained {cfg.train.iterations} iterations in {res.runtime:.1f} s; branches {res.log.branch_counts()}")
    print(f"wrote {out / cfg.paths.checkpoint_out} and {out / cfg.paths.log_out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .objectives import perf_reward
    from .plant import rollout, sample_init, sample_model
    from .semantics import hard_robustness, stl2cbf

    cfg = _load(args)
    problem, p = _problem_and_params(cfg, args)
    if args.count < 0:
        raise SpecError("--count must be non-negative")
    theta, zeta = problem.split(p)
    from .policy import init_params

    pol = init_params(problem.layer_dims, 0, problem.squash).with_vector(theta)
    out = _out_dir(args) / cfg.paths.traj_out
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.train.seed)
    init = cfg.train.build_init()
    rows = []
    for i in range(args.count):
        x0 = sample_init(init, rng)
        delta = sample_model(problem.dynamics, rng)
        traj = rollout(problem.dynamics, pol, x0, delta, problem.horizon)
        traj.to_csv(out / f"traj_{i:04d}.csv")
        sig = traj.envs()
        J = perf_reward(sig, problem.reward, problem.gamma)
        if problem.formula is not None:
            G, rho = stl2cbf(problem.formula, sig, zeta), hard_robustness(problem.formula, sig)
        else:
            G = rho = float("inf")
        rows.append((i, J, G, rho))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "J", "Gamma", "rho"])
        for r in rows:
            w.writerow([r[0]] + [format(float(v), ".17g") for v in r[1:]])
    if rows:
        rho = np.array([r[3] for r in rows])
        print(f"{len(rows)} trajectories; mean J={np.mean([r[1] for r in rows]):.4f} "
              f"mean Gamma={np.mean([r[2] for r in rows]):.4f} mean rho={rho.mean():.4f} "
              f"satisfied={np.mean(rho > 0):.3f}")
    else:
        print("0 trajectories")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .plant import Trajectory
    from .semantics import bool_sat, hard_robustness, stl2cbf

    cfg = _load(args)
    problem = cfg.train.build_problem()
    if problem.formula is None:
        raise SpecError("config has no formula")
    if not args.trajectory:
        raise SpecError("--trajectory is required")
    traj = Trajectory.from_csv(args.trajectory, problem.dynamics.states)
    if traj.states.shape[1] != problem.dynamics.n:
        raise SpecError(f"trajectory has {traj.states.shape[1]} state columns, plant has {problem.dynamics.n}")
    zeta = problem.zeta
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        ckpt.zeta.check_bound(problem.formula)
        zeta = ckpt.zeta
    sig = traj.envs()
    result = {
        "satisfied": bool(bool_sat(problem.formula, sig)),
        "rho": float(hard_robustness(problem.formula, sig)),
        "Gamma": float(stl2cbf(problem.formula, sig, zeta)),
    }
    print(json.dumps(result))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .engine import make_engine
    from .risk import estimate_risk, probabilistic_guarantee

    cfg = _load(args)
    problem, p = _problem_and_params(cfg, args)
    rc = cfg.risk
    N = args.samples if args.samples is not None else rc.N
    seed = args.seed if args.seed is not None else rc.seed
    betas = args.betas if args.betas else rc.betas
    for b in betas:
        if not 0.0 < b < 1.0:
            raise SpecError(f"beta must lie in (0, 1), got {b}")
    if N < 1000:
        raise SpecError("--samples must be at least 1000")
    engine = make_engine(problem, cfg.train.engine)
    report, rho = estimate_risk(engine, p, cfg.train.build_init(), N, betas, seed, args.threads)
    report.config.update({"config": str(args.config), "checkpoint": str(args.checkpoint)})
    out = _out_dir(args)
    report.to_json(out / "risk.json")
    if args.raw:
        np.savetxt(out / "rho_samples.csv", rho, fmt="%.17g", header="rho", comments="")
    print(f"N={N} seed={seed} mean rho={report.summary['mean']:.4f} satisfied={report.summary['satisfaction']:.4f}")
    print(f"{'beta':>6} {'-VaR':>9} {'-CVaR':>9}")
    for e in report.entries:
        print(f"{e.beta:>6g} {e.neg_var:>9.4f} {e.neg_cvar:>9.4f}   {probabilistic_guarantee(report, e.beta)}")
    print(f"wrote {out / 'risk.json'}")
    return EXIT_OK


COMMANDS = {"parse": cmd_parse, "train": cmd_train, "simulate": cmd_simulate, "eval": cmd_eval,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlforge", description="Train and verify STL-constrained neural controllers.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="project config (JSON)")
    ap.add_argument("--checkpoint", help="controller checkpoint (JSON)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, default=1, help="worker cap for sampling")
    ap.add_argument("--out", help="output directory (default: current directory)")
    ap.add_argument("--iterations", type=int, help="train: override the iteration budget")
    ap.add_argument("--count", type=int, default=500, help="simulate: number of trajectories")
    ap.add_argument("--trajectory", help="eval: trajectory CSV")
    ap.add_argument("--samples", type=int, help="verify: number of Monte-Carlo samples")
    ap.add_argument("--betas", type=float, nargs="+", help="verify: confidence levels")
    ap.add_argument("--raw", action="store_true", help="verify: also write raw robustness samples")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpecError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DomainError, TrainingDiverged, StlForgeError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
