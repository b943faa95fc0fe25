"""Monte Carlo tables for the six working-model pairs.

mse:       grid MSE (x1e-3) for every pair, n in {50, 100}, bandwidth scale in {1, 3, 6}.
intervals: bias, SD, mean SE and coverage at tau/5 and 2tau/5 for pairs 2 and 6,
           perturbation scale in {1, 5, 10}.

    python scripts/run_grid.py mse --reps 500 --seed 1 --workers 4
    python scripts/run_grid.py intervals --reps 500 --seed 1 --json out.json
"""

import argparse
import json
import time

from drsurv.simulation import Scenario, run_study


def mse_grid(args):
    rows, records = [], []
    for n in args.n:
        for pair in range(1, 7):
            cells = []
            for scale in args.bandwidth_scales:
                sc = Scenario(n=n, reps=args.reps, pair=pair, bandwidth_scale=scale,
                              seed=args.seed, compute_se=False)
                rep = run_study(sc, workers=args.workers)
                records.append(rep.to_dict() | {"replicates": None})
                cells.append(f"{1e3 * rep.mse:6.2f}" + ("*" if rep.flagged else " "))
            rows.append(f"| {n:4d} | {pair} | " + " | ".join(cells) + " |")
    head = "| n    | pair | " + " | ".join(f"a_n={s}n^-1/3" for s in args.bandwidth_scales) + " |"
    print("MSE x 1e-3 (* = more than 1% failed replicates)")
    print(head)
    print("|" + "---|" * (2 + len(args.bandwidth_scales)))
    print("\n".join(rows))
    return records


def interval_grid(args):
    records = []
    print("| n | pair | eps scale | t | bias x1e-2 | SD | mean SE | coverage |")
    print("|---|---|---|---|---|---|---|---|")
    for n in args.n:
        for pair in (2, 6):
            scales = args.epsilon_scales if pair != 6 else args.epsilon_scales[:1]
            for eps in scales:
                sc = Scenario(n=n, reps=args.reps, pair=pair, epsilon_scale=eps, seed=args.seed)
                rep = run_study(sc, workers=args.workers)
                records.append(rep.to_dict() | {"replicates": None})
                for k, t in enumerate(rep.check_times):
                    print(f"| {n} | {pair} | {eps if pair != 6 else '-'} | {t:.1f} | {1e2 * rep.bias[k]:.2f} "
                          f"| {rep.empirical_sd[k]:.4f} | {rep.mean_se[k]:.4f} | {rep.coverage[k]:.3f} |")
    return records


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("study", choices=("mse", "intervals"))
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--n", type=int, nargs="+", default=[50, 100])
    ap.add_argument("--bandwidth-scales", type=float, nargs="+", default=[1, 3, 6])
    ap.add_argument("--epsilon-scales", type=float, nargs="+", default=[1, 5, 10])
    ap.add_argument("--json", help="also write the aggregated reports here")
    args = ap.parse_args()
    start = time.perf_counter()
    records = mse_grid(args) if args.study == "mse" else interval_grid(args)
    print(f"\n{time.perf_counter() - start:.0f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(records, fh, indent=2)


if __name__ == "__main__":
    main()
