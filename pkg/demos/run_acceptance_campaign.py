#!/usr/bin/env python3
"""Run the standard acceptance campaign through the CLI.

Executes every shipped config under campaigns/ in dependency order and
records wall-clock timings.  Artifacts land in results/acceptance/<name>;
rerunning with unchanged configs reproduces them byte for byte (fixed
seeds end to end).  Expect a few hours on one core; interrupted bundles
resume from their chain checkpoints.

    python demos/run_acceptance_campaign.py [--out results/acceptance]
"""

import argparse
import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from fklab.cli import main as fklab_main

ORDER = [
    "c5_n128_free",
    "c6_n128_wired",
    "c7_delta32",
    "c8_delta128",
    "c3_n256_free",
    "c4_n256_wired",
    "c9_n128_arms",
    "c10_n256_arms",
    "c2_n512_wired",
    "c2b_n512_wired_cross",
    "c1_n512_free",
    "f1_pi1_fit",
    "f2_pi2_fit",
]


def run(out_root):
    here = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir)
    timings = {}
    for name in ORDER:
        cfg = os.path.join(here, "campaigns", f"{name}.json")
        if name.startswith("f") and not os.path.exists(
            os.path.join(out_root, "c1_n512_free", "series.npz")
        ):
            print(f"== {name}: c1 series missing, skipping", flush=True)
            continue
        done_marker = os.path.join(out_root, name, "MANIFEST.txt")
        if os.path.exists(done_marker):
            print(f"== {name}: already complete, skipping", flush=True)
            continue
        print(f"== {name}: starting at {time.strftime('%H:%M:%S')}", flush=True)
        t0 = time.time()
        rc = fklab_main(["run", "--config", cfg, "--out", out_root])
        dt = time.time() - t0
        timings[name] = dt
        print(f"== {name}: rc={rc} in {dt/60:.1f} min", flush=True)
        if rc != 0:
            return rc
        with open(os.path.join(out_root, "campaign_timings.json"), "w") as fh:
            json.dump(timings, fh, indent=1, sort_keys=True)
    print("campaign complete", flush=True)
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join("results", "acceptance"))
    args = ap.parse_args()
    sys.exit(run(args.out))
