"""Compare the Lagrangian baseline with the switching trainer on the unicycle task."""
import argparse
import json
from pathlib import Path

from stlforge.experiments import config_with, run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--weight", type=float, default=1.0, help="Lagrange multiplier for every batch state")
    ap.add_argument("--validation", type=int, default=1000)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    rows = []
    for seed in args.seeds:
        for mode in ("switching", "lagrangian"):
            tc = config_with(ROOT / "configs" / "unicycle_rho03.json", seed=seed, iterations=args.iterations,
                             mode=mode, lagrange_weight=args.weight)
            _, _, val = run(tc, n_val=args.validation)
            rows.append({"seed": seed, "mode": mode, **val.to_dict()})
            print(f"seed {seed} {mode:<10} sat {val.satisfaction:.3f}  mean rho {val.mean_rho:7.4f}  "
                  f"mean J {val.mean_J:7.3f}", flush=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "lagrangian.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
