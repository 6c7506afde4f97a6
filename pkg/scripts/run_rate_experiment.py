"""Convergence-rate experiment for several rules on one test function.

Example:
    python scripts/run_rate_experiment.py --function sine --rules vertical,uniform --reps 20
"""

import argparse
import json
import math
from pathlib import Path

from warptree.estimators import FitConfig
from warptree.risk import DEFAULT_KAPPA_GRID, ExperimentConfig, rate_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--design", default="uniform")
    ap.add_argument("--function", default="sine")
    ap.add_argument("--sigma", type=float, default=0.1)
    ap.add_argument("--rules", default="vertical,uniform")
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--min-exp", type=int, default=9)
    ap.add_argument("--max-exp", type=int, default=15)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--no-cv", action="store_true", help="use kappa = 1 instead of cross-validation")
    ap.add_argument("--out", default="results/rates")
    args = ap.parse_args()

    grid = [2**e for e in range(args.min_exp, args.max_exp + 1)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for rule in args.rules.split(","):
        adaptive = rule in ("vertical", "piecewise", "hard")
        exp = ExperimentConfig(
            design=args.design,
            function=args.function,
            sigma=args.sigma,
            n_reps=args.reps,
            base_seed=args.seed,
            fit=FitConfig(rule=rule, design=args.design),
            kappa_cv=adaptive and not args.no_cv,
            kappa_grid=DEFAULT_KAPPA_GRID,
        )
        report = rate_experiment(grid, exp, checkpoint_dir=out / "checkpoints")
        summary[rule] = report.to_dict()
        print(f"{rule:>18}: slope {report.fitted_slope:.3f} (theory {report.theoretical_exponent:.3f})")
        for n, risk, se in report.points:
            print(f"{'':>20}n={n:<6d} log(ln n/n)={math.log(math.log(n) / n):8.4f} risk={risk:.4e} se={se:.1e}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
