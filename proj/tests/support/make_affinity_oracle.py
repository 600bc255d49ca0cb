"""Regenerates data/affinity_3x3_oracle.json.

Maximizes <A, P> + eps * H(P) over 3x3 plans with unit row and column sums by
damped Newton ascent on the four free entries P[:2, :2]; the last row and
column are fixed by the marginals.
"""
import json
import pathlib

import numpy as np

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"
EPS = 0.05


def complete(x):
    p = np.empty((3, 3))
    p[:2, :2] = x.reshape(2, 2)
    p[:2, 2] = 1.0 - p[:2, :2].sum(axis=1)
    p[2, :] = 1.0 - p[:2, :].sum(axis=0)
    return p


def objective(a, x):
    p = complete(x)
    if (p <= 0).any():
        return -np.inf
    return (a * p).sum() - EPS * (p * (np.log(p) - 1.0)).sum()


def solve(a):
    x = np.full(4, 1.0 / 3.0)
    for _ in range(200):
        p = complete(x)
        g = np.empty((2, 2))
        h = np.zeros((4, 4))
        w = 1.0 / p
        for i in range(2):
            for j in range(2):
                # dP_ij/dx_ij contributions: P_ij, P_i2, P_2j (sign -), P_22 (sign +)
                g[i, j] = (a[i, j] - a[i, 2] - a[2, j] + a[2, 2]
                           - EPS * (np.log(p[i, j]) - np.log(p[i, 2]) - np.log(p[2, j]) + np.log(p[2, 2])))
        for u in range(4):
            i, j = divmod(u, 2)
            for v in range(4):
                k, l = divmod(v, 2)
                val = (i == k) * (j == l) * w[i, j] + (i == k) * w[i, 2] + (j == l) * w[2, j] + w[2, 2]
                h[u, v] = -EPS * val
        step = np.linalg.solve(h, -g.reshape(4))
        t = 1.0
        f0 = objective(a, x)
        while objective(a, x + t * step) < f0 - 1e-16 and t > 1e-12:
            t *= 0.5
        x = x + t * step
        if np.abs(g).max() < 1e-13:
            break
    return complete(x)


def main():
    a = np.array(json.loads((DATA / "affinity_3x3.json").read_text()))
    p = solve(a)
    out = {"epsilon": EPS, "row_marginals": [1.0] * 3, "col_marginals": [1.0] * 3,
           "plan": p.tolist()}
    (DATA / "affinity_3x3_oracle.json").write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
