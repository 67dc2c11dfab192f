#!/usr/bin/env python3
"""Run the labelled-dataset experiment series and print both tables:
errors per data ordering, and errors across the migration-threshold
sweep. Expect a few minutes of runtime at the default 20 repeats."""

import argparse

from dca import PopulationConfig, run_bc_experiment, synthetic_items


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    items = synthetic_items()

    print(f"errors by data ordering (seed {args.seed}, {args.repeats} repeats)")
    orderings = [
        ("random", "random", {}),
        ("two-step", "two-step", {}),
        ("one-step", "one-step", {}),
        ("two-step single-sample", "two-step",
         {"antigen_sample_multiplicity": 1}),
    ]
    for name, order, overrides in orderings:
        cfg = PopulationConfig.breast_cancer(seed=args.seed, **overrides)
        result = run_bc_experiment(items, order, cfg, repeats=args.repeats)
        print(f"  {name:<26} {result.summary.errors:>4} errors")

    print("\nerrors by migration threshold (one-step order)")
    sweep = [("1", ("fixed", 1.0)), ("5", ("fixed", 5.0)),
             ("10", ("fixed", 10.0)), ("15", ("fixed", 15.0)),
             ("uniform(5,15)", ("uniform", 5.0, 15.0))]
    for name, mode in sweep:
        cfg = PopulationConfig.breast_cancer(seed=args.seed,
                                             threshold_mode=mode)
        result = run_bc_experiment(items, "one-step", cfg,
                                   repeats=args.repeats)
        print(f"  threshold {name:<14} {result.summary.errors:>4} errors")


if __name__ == "__main__":
    main()
