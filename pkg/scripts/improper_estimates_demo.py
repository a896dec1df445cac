#!/usr/bin/env python3
"""Demonstrate that the unbiased estimators leave the parameter space.

Three effects, all exact:
  1. any specificity below one makes the estimate at zero positives negative;
  2. sensitivity-only errors make the estimates diverge above one;
  3. for two diseases the leading components sum to more than one at
     z = (1, 1, 0) for every pool size k > 1, even with perfect tests.
"""

import sys
from fractions import Fraction as F
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gtseq.estimators import (  # noqa: E402
    EstimatorId,
    scan_properness,
    simplex_excess_at_one_one_zero,
    unbiased_one_misclass,
)


def main() -> int:
    print("1. negative estimate at zero positives (k = 2, c = 1)")
    print(f"   {'spec':>6} {'sens':>6} {'estimate at y=0':>18}")
    for spec_, sens in [(F("0.9"), F("0.95")), (F("0.95"), F("0.9")), (F("0.98"), F("0.95"))]:
        value = float(unbiased_one_misclass(0, 1, 2, spec_, sens))
        print(f"   {float(spec_):6.2f} {float(sens):6.2f} {value:18.6f}")

    print("\n2. divergence with sensitivity-only error (spec = 1, sens = 0.9, k = 2, c = 1)")
    hits = scan_properness(
        EstimatorId.UB_ONE_MISCLASS, 1, 2,
        specificity=F(1), sensitivity=F("0.9"), bound=10_000, max_violations=1,
    )
    first = hits[0]
    print(f"   first estimate above one at y = {first.sample[0]}: {first.value:.6f}")
    for y in (50, 100, 200):
        print(f"   estimate at y = {y}: {float(unbiased_one_misclass(y, 1, 2, F(1), F('0.9'))):.4g}")

    print("\n3. two-disease simplex excess at z = (1, 1, 0), perfect tests")
    print("   excess = sum of leading components minus one (exact rationals)")
    header = "   c\\k " + "".join(f"{k:>12}" for k in range(1, 7))
    print(header)
    for c in range(1, 6):
        cells = "".join(f"{str(simplex_excess_at_one_one_zero(c, k)):>12}" for k in range(1, 7))
        print(f"   {c:>4}{cells}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
