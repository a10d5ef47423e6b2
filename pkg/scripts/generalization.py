"""Train on 20 houses, evaluate greedy SR/GP on 5 unseen houses, per seed and variant.

    python scripts/generalization.py --seeds 0 1 2 --variants full no_lstm no_direction_loss --out results.json
"""

import argparse
import json
import logging

from seqnav.experiments import VARIANTS, generalization_suite, summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=VARIANTS)
    ap.add_argument("--epochs", type=int, default=25)
    ap.add_argument("--out", default="generalization.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    results = generalization_suite(args.seeds, args.variants, args.epochs)
    rows = summarize(results)
    for r in rows:
        print(f"seed {r['seed']} {r['variant']:>18}: SR {r['SR']:.3f} (random walk {r['rw_SR']:.3f})  "
              f"GP {r['GP']:.2f} (random walk {r['rw_GP']:.2f})  {r['seconds']}s")
    with open(args.out, "w") as f:
        json.dump(rows, f, indent=1)


if __name__ == "__main__":
    main()
