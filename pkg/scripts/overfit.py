"""Overfit 8 episodes of one house; reports optimizer steps to >=95% teacher accuracy and >=90% SR."""

import argparse
import logging

from seqnav.experiments import overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-updates", type=int, default=2000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    res = overfit(seed=args.seed, max_updates=args.max_updates)
    print(f"steps {res.steps}  teacher acc {res.accuracy:.3f}  SR {res.sr:.3f}  {res.seconds:.0f}s  "
          f"{'PASS' if res.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
