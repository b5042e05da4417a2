#!/usr/bin/env python3
"""Rebuild the bundled reduced admittance matrix.

Forms the susceptance Laplacian of the IEEE 14-bus line data (1/X per
branch) and eliminates the nine non-generator buses by Kron reduction,
leaving the 5x5 generator-coupling matrix stored under
src/netresil/data/. Run from the repository root after changing the
branch table; the bundled file is versioned data, not a computed input.
"""

import json
import os

import numpy as np

# branch reactances X [p.u.], 1-indexed bus pairs
BRANCHES = [
    (1, 2, 0.05917), (1, 5, 0.22304), (2, 3, 0.19797), (2, 4, 0.17632),
    (2, 5, 0.17388), (3, 4, 0.17103), (4, 5, 0.04211), (4, 7, 0.20912),
    (4, 9, 0.55618), (5, 6, 0.25202), (6, 11, 0.19890), (6, 12, 0.25581),
    (6, 13, 0.13027), (7, 8, 0.17615), (7, 9, 0.11001), (9, 10, 0.08450),
    (9, 14, 0.27038), (10, 11, 0.19207), (12, 13, 0.19988), (13, 14, 0.34802),
]
GENERATOR_BUSES = [1, 2, 3, 6, 8]
N_BUS = 14


def kron_reduced_admittance():
    L = np.zeros((N_BUS, N_BUS))
    for f, t, x in BRANCHES:
        b = 1.0 / x
        f, t = f - 1, t - 1
        L[f, f] += b
        L[t, t] += b
        L[f, t] -= b
        L[t, f] -= b
    keep = [b - 1 for b in GENERATOR_BUSES]
    elim = [i for i in range(N_BUS) if i not in keep]
    Lkk = L[np.ix_(keep, keep)]
    Lke = L[np.ix_(keep, elim)]
    Lee = L[np.ix_(elim, elim)]
    Y = Lkk - Lke @ np.linalg.solve(Lee, Lke.T)
    return 0.5 * (Y + Y.T)


def main():
    Y = kron_reduced_admittance()
    payload = {
        "Y": [[float(v) for v in row] for row in Y],
        "source": "kron-reduced IEEE14",
        "version": 1,
        "generator_buses": GENERATOR_BUSES,
    }
    out = os.path.join(os.path.dirname(__file__), "..", "src", "netresil",
                       "data", "ieee14_kron_y.json")
    out = os.path.normpath(out)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as fh:
        json.dump(payload, fh, indent=1)
    print(f"wrote {out}")
    print(np.array_str(Y, precision=6, suppress_small=True))


if __name__ == "__main__":
    main()
