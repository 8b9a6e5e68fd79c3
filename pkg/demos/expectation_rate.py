"""
How fast the expected exceedance count settles
==============================================

For every continuous distribution the expected number of kth-NN balls with
content above the threshold is an exact binomial tail.  Its distance to the
limit exp(-t) shrinks like log log n / log n.
"""

import math

from knn_extremes import expected_count, threshold

print(f"{'n':>10} {'k':>2} {'threshold':>12} {'E[C]':>9} {'|E-1|':>8} {'scaled':>7}")
for k in (1, 2, 3):
    for p in range(3, 9):
        n = 10 ** p
        e = expected_count(n, k, 0.0)
        scaled = abs(e - 1) * math.log(n) / math.log(math.log(n))
        print(f"{n:>10} {k:>2} {threshold(n, k, 0.0):>12.4e} {e:>9.5f} {abs(e - 1):>8.5f} {scaled:>7.3f}")
    print()

# shifting t moves the limit to exp(-t)
for t in (-1.0, 0.0, 1.0, 2.0):
    print(f"t={t:+.1f}  E[C] at n=1e6, k=2: {expected_count(10 ** 6, 2, t):.4f}  "
          f"limit {math.exp(-t):.4f}")
