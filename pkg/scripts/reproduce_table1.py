"""Train the three shipped configurations and report validation statistics.

Writes one checkpoint and training log per run plus ``table1.json`` to --out.
"""
import argparse
import json
from pathlib import Path

from stlforge.checkpoint import Checkpoint, save_checkpoint
from stlforge.experiments import config_with, run
from stlforge.stl import to_text_stl

ROOT = Path(__file__).resolve().parents[1]
RUNS = ["unicycle_rho03", "unicycle_rho05", "quadrotor_rho01"]
# reference rows: (J, Gamma, rho_phi, runtime in s)
REFERENCE = {
    "unicycle_rho03": (35.3430, 0.6108, 0.6109, 1048),
    "unicycle_rho05": (33.3528, 0.8456, 0.8518, 1067),
    "quadrotor_rho01": (24.3024, 0.6729, 0.7516, 155),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", nargs="+", default=RUNS, choices=RUNS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--validation", type=int, default=10_000, help="fresh validation samples")
    ap.add_argument("--iterations", type=int, help="override the iteration budget (quick looks)")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = {}
    for name in args.runs:
        over = {"seed": args.seed}
        if args.iterations:
            over["iterations"] = args.iterations
        tc = config_with(ROOT / "configs" / f"{name}.json", **over)
        print(f"== {name}: {tc.iterations} iterations, rho={tc.rho}, tau={tc.tau:g}", flush=True)
        res, _, val = run(tc, n_val=args.validation)
        ck = Checkpoint(res.policy, res.zeta, tc.horizon, tc.seed, to_text_stl(res.problem.formula))
        save_checkpoint(ck, out / f"{name}_checkpoint.json")
        res.log.to_csv(out / f"{name}_log.csv")
        row = val.to_dict()
        row.update(runtime=res.runtime, branches=res.log.branch_counts(), disjunct_weights=res.zeta.weight_report()[0])
        table[name] = row
        J, G, rho, secs = REFERENCE[name]
        print(f"   J {val.mean_J:8.4f} (ref {J})  Gamma {val.mean_Gamma:.4f} (ref {G})  rho {val.mean_rho:.4f} "
              f"(ref {rho})  sat {val.satisfaction:.4f}  {res.runtime:.0f} s (ref {secs} s)", flush=True)
    (out / "table1.json").write_text(json.dumps(table, indent=2))


if __name__ == "__main__":
    main()
