"""Run a small closed-loop exploration experiment end to end.

Compares coordinated greedy planning against the per-sensor and random
baselines over a few episodes, then prints the per-method AUC summary.
Scaled down from the default protocol so it finishes in well under a
minute; pass --full for the default-sized scenes (much slower).
"""

import argparse
import dataclasses
import json

from nbvplan import simulation as sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--full", action="store_true",
                    help="default-scale scenes instead of the quick config")
    ap.add_argument("--out", help="also write metrics.csv and summary.json")
    args = ap.parse_args()

    if args.full:
        cfg = sim.ExperimentConfig()
        scene_seeds, run_seeds, bounds = [0, 1], [0, 1, 2], None
        rooms = 3
    else:
        cfg = dataclasses.replace(sim.ExperimentConfig(),
                                  sensors=2, candidates_per_sensor=4,
                                  rounds=4, resolution=0.1, max_range=6.0,
                                  image_width=160, image_height=120)
        scene_seeds, run_seeds = [0, 1], [0, 1, 2]
        bounds = sim.Box([0, 0, 0], [5, 4, 2.2])
        rooms = 2

    rows = sim.run_sweep(cfg, scene_seeds, run_seeds, methods=sim.METHODS,
                         room_count=rooms, bounds=bounds)
    summary = sim.summarize_rows(rows)
    print(f"{len(rows)} metric rows from {len(scene_seeds)} scenes x "
          f"{len(run_seeds)} seeds x {len(sim.METHODS)} methods")
    for m in sim.METHODS:
        s = summary["methods"][m]
        print(f"{m:>7s}: explored AUC {s['auc_explored']:6.2f} "
              f"+- {s['auc_explored_ci95'] or 0:.2f}, "
              f"surface AUC {s['auc_surface']:6.2f}, "
              f"final unknown {s['final_unknown_cm3_mean'] / 1e6:.3f} m^3")
    d = summary["ours_minus_single"]
    print(f"ours - single AUC gap {d['auc_explored_diff']:.2f} "
          f"(95% half-width {d['pooled_ci95_half_width']:.2f})")

    if args.out:
        import os
        os.makedirs(args.out, exist_ok=True)
        sim.write_metrics_csv(rows, os.path.join(args.out, "metrics.csv"))
        with open(os.path.join(args.out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        print(f"wrote {args.out}/metrics.csv and summary.json")


if __name__ == "__main__":
    main()
