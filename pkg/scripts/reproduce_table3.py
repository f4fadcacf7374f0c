"""Monte-Carlo VaR / CVaR of the negated robustness for trained checkpoints.

Expects the checkpoints written by reproduce_table1.py.
"""
import argparse
import json
from pathlib import Path

from stlforge.checkpoint import load_checkpoint
from stlforge.engine import make_engine
from stlforge.experiments import config_with
from stlforge.risk import estimate_risk

ROOT = Path(__file__).resolve().parents[1]
REFERENCE = {  # (-VaR, -CVaR) at beta = 0.95, 0.98, 0.99, 0.999
    "unicycle_rho03": [(0.246, 0.132), (0.133, 0.036), (0.059, -0.027), (-0.133, -0.191)],
    "unicycle_rho05": [(0.540, 0.417), (0.421, 0.311), (0.336, 0.239), (0.121, 0.067)],
    "quadrotor_rho01": [(0.527, 0.455), (0.452, 0.395), (0.406, 0.360), (0.305, 0.284)],
}
BETAS = [0.95, 0.98, 0.99, 0.999]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", nargs="+", default=list(REFERENCE), choices=list(REFERENCE))
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)

    table = {}
    for name in args.runs:
        tc = config_with(ROOT / "configs" / f"{name}.json")
        prob = tc.build_problem()
        p = load_checkpoint(out / f"{name}_checkpoint.json").params(prob)
        rep, _ = estimate_risk(make_engine(prob), p, tc.build_init(), args.samples, BETAS, args.seed, args.threads)
        table[name] = rep.to_dict()
        print(f"== {name}  N={args.samples}  mean rho {rep.summary['mean']:.4f}  sat {rep.summary['satisfaction']:.4f}")
        for e, (rv, rc) in zip(rep.entries, REFERENCE[name]):
            print(f"   beta {e.beta:<6g} -VaR {e.neg_var:8.4f} (ref {rv:6.3f})   -CVaR {e.neg_cvar:8.4f} (ref {rc:6.3f})")
    (out / "table3.json").write_text(json.dumps(table, indent=2))


if __name__ == "__main__":
    main()
