"""Simulated noncoherent RMSE: integer allocation vs uniform power.

For each per-subcarrier SNR the branch-and-bound allocation is computed and
both allocations are run through the same Monte Carlo campaign (same seed).
The crossover is the first grid point from which the integer allocation stays
ahead of uniform power.

    python scripts/crossover.py --snr-db=-12:6:2 --trials 10050
"""

import argparse
import csv
from pathlib import Path

from ofdm_zzb.bounds import BoundQuery
from ofdm_zzb.config import SnrGrid, parse_snr_list
from ofdm_zzb.integer import BnbConfig, solve_bnb
from ofdm_zzb.ofdm import OfdmConfig, uniform_allocation
from ofdm_zzb.sim import CampaignSpec, run_campaign


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--snr-db", default="-6:6:2", help="per-subcarrier SNR grid start:stop:step")
    p.add_argument("--trials", type=int, default=10_050)
    p.add_argument("--n-iter", type=int, default=200, help="branch-and-bound iteration budget")
    p.add_argument("--seed", type=int, default=900)
    p.add_argument("--out", type=Path, default=Path("results/crossover.csv"))
    args = p.parse_args(argv)

    cfg = OfdmConfig()
    u = uniform_allocation(cfg.K)
    spec = CampaignSpec(trials=args.trials, discard=50)
    rows = []
    for i, db in enumerate(SnrGrid(parse_snr_list(args.snr_db)).values_db):
        gamma = cfg.K * 10 ** (db / 10)
        rep = solve_bnb(BoundQuery("noncoherent", gamma, cfg), BnbConfig(L=8, n_iter=args.n_iter))
        a = run_campaign(rep.rho_star, "noncoherent", gamma, spec, seed=args.seed + i, cfg=cfg).rmse_samples
        b = run_campaign(u, "noncoherent", gamma, spec, seed=args.seed + i, cfg=cfg).rmse_samples
        rows.append((db, a, b, rep.gap))
        print(f"{db:+5.1f} dB  integer {a:.4f}  uniform {b:.4f}  samples  (bnb gap {rep.gap:.3f})")

    cross = None
    for i in range(1, len(rows)):
        if rows[i - 1][1] > rows[i - 1][2] and all(r[1] <= r[2] for r in rows[i:]):
            cross = (rows[i - 1][0], rows[i][0])
            break
    print("crossover:", "none on this grid" if cross is None else f"between {cross[0]:+.1f} and {cross[1]:+.1f} dB")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_db_per_subcarrier", "rmse_integer", "rmse_uniform", "bnb_gap"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
