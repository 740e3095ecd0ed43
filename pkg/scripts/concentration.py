"""Concentration of m-POT values (over k) and of padded plans (against full enumeration).

    python scripts/concentration.py --out results/
"""
import argparse
from pathlib import Path

from mbpot.diagnostics import concentration_plan_experiment, concentration_value_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replicates", type=int, default=200)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    value = concentration_value_experiment(100, 10, 0.75, [1, 4, 16, 64], args.replicates, args.seed)
    (args.out / "value_concentration.csv").write_text(value.to_csv())
    print(value.to_csv())

    plan = concentration_plan_experiment(8, 3, 0.5, [16, 64, 256, 1024, 4096, "all"], 20, args.seed)
    (args.out / "plan_concentration.csv").write_text(plan.to_csv())
    print(plan.to_csv())


if __name__ == "__main__":
    main()
