"""Regenerate the frozen oracle values in tests/data/.

Run from the repository root:

    python tests/make_oracle_data.py

Slow (a few minutes): the smoothed-ascent oracle climbs each instance to
stationarity within its million-iteration budget.  The solver tests then
compare against these frozen objectives without paying the oracle cost.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from oracles import random_psd_cov, smoothed_sice_oracle  # noqa: E402
from sicerep.glasso import sice_objective  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "data", "glasso_oracle.json")

LAMBDAS = (0.05, 0.2, 0.5)
DIMS = (3, 4, 5)
COUNT = 100
SEED_BASE = 9000


def instance(k):
    d = DIMS[k % 3]
    lam = LAMBDAS[(k // 3) % 3]
    sig = random_psd_cov(np.random.default_rng(SEED_BASE + k), d)
    return d, lam, sig


def main():
    rows = []
    for k in range(COUNT):
        d, lam, sig = instance(k)
        s, iters = smoothed_sice_oracle(sig, lam)
        obj = sice_objective(sig, lam, s)
        rows.append({"k": k, "d": d, "lam": lam,
                     "oracle_objective": obj, "oracle_iterations": int(iters)})
        print(f"{k:3d}: d={d} lam={lam} obj={obj:.12f} ({iters} iters)")
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump({"seed_base": SEED_BASE, "count": COUNT, "rows": rows}, fh, indent=1)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
