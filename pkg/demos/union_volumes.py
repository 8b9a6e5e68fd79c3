"""
Two overlapping balls
=====================

The volume of the union of two unit balls at center distance t, computed
from spherical caps, next to the cone/sector closed form that is only
exact in the plane.
"""

import math

import numpy as np

from knn_extremes import union_two_balls_exact, union_two_balls_paper_formula

# in the plane both agree to rounding
for t in (0.0, 0.5, 1.0, 1.5, 2.0):
    print(f"d=2 t={t:.1f}  caps {union_two_balls_exact(2, 1.0, t):.12f}  "
          f"sector {union_two_balls_paper_formula(2, t):.12f}")

# from d = 3 on the sector formula undercounts the overlap region
print()
for d in (3, 4, 5):
    t = np.linspace(0, 2, 5)
    gap = [union_two_balls_paper_formula(d, x) / union_two_balls_exact(d, 1.0, x) - 1 for x in t]
    print(f"d={d} relative gap over t in [0, 2]: " + " ".join(f"{g:+.4f}" for g in gap))

# the three-dimensional case at t = 1: 9 pi / 4 against 73 pi / 36
print()
print(union_two_balls_exact(3, 1.0, 1.0), 9 * math.pi / 4)
print(union_two_balls_paper_formula(3, 1.0), 73 * math.pi / 36)
