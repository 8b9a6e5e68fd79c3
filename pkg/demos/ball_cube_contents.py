"""
Ball contents near the boundary
===============================

Most kth-NN balls lie inside the cube, where the content is kappa_d r^d.
Near faces, edges and corners the ball is clipped and the content comes
from quadrature.  This script compares the two for a ball sliding toward
a corner, and inverts the content for a piecewise-constant density.
"""

import numpy as np

from knn_extremes import DensityModel, ball_box_volume, inverse_radius, mu_ball, unit_ball_volume

r = 0.2
for d in (2, 3, 4):
    print(f"d={d}, r={r}: interior volume {unit_ball_volume(d) * r ** d:.6f}")
    for s in (0.5, 0.2, 0.1, 0.0):
        center = np.full(d, s)
        print(f"  center ({s}, ...): {ball_box_volume(center, r):.9f}")

density = DensityModel.piecewise([[0.5, 1.0], [1.5, 1.0]])
z = np.array([0.45, 0.55])
for p in (0.001, 0.01, 0.1):
    radius = inverse_radius(density, z, p)
    print(f"p={p}: radius {radius:.6f}, content back {mu_ball(density, z, radius):.10f}")
