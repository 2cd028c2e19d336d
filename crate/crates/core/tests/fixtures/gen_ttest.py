"""Reference t-test values computed with mpmath at 50 digits.

Each output line: differences separated by spaces, a `;`, then t and the
two-sided p-value.
"""
import random

import mpmath

mpmath.mp.dps = 50
rng = random.Random(20240611)

lines = []
for case in range(100):
    n = rng.choice([2, 3, 4, 5, 8, 13, 20, 35, 55, 110, 385])
    shift = rng.choice([0.0, 0.001, 0.01, 0.05, 0.2, 1.0])
    scale = rng.choice([0.01, 0.1, 0.5, 1.0])
    diffs = [round(rng.gauss(shift, scale), 6) for _ in range(n)]
    xs = [mpmath.mpf(d) for d in diffs]
    mean = mpmath.fsum(xs) / n
    var = mpmath.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    t = mean * mpmath.sqrt(n) / mpmath.sqrt(var)
    df = n - 1
    p = mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
    lines.append(" ".join(repr(d) for d in diffs) + " ; " + mpmath.nstr(t, 20) + " " + mpmath.nstr(p, 20))

with open("ttest_reference.txt", "w") as f:
    f.write("\n".join(lines) + "\n")
