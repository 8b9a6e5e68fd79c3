"""
Large kth-nearest-neighbor balls of i.i.d. samples in the unit cube.

Closed forms for the exceedance count over the universal threshold, a
Monte Carlo harness comparing its law with the Poisson limit and the
maximum ball content with the Gumbel limit, grid-based Chen-Stein
diagnostics, and the geometric volumes these need.
"""

from .chenstein import (ChenSteinDiagnostics, GridSpec, block_maxima, chen_stein_bound,
                        estimate_b_terms, grid_size, tv_distance)
from .experiment import (ExperimentConfig, SummaryReport, ks_gumbel, load_replicates, persist,
                         poisson_pmf, run_experiment, run_replicate, sweep, tv_to_poisson)
from .geometry import (ball_box_intersection, ball_box_volume, spherical_cap_volume,
                       union_two_balls_exact, union_two_balls_paper_formula, unit_ball_volume)
from .limits import (ExceedanceRecord, ThresholdParams, binomial_tail, centered_max,
                     exceedance_count, expected_count, gumbel_cdf, threshold)
from .measures import DensityModel, PointSample, inverse_radius, mu_ball, sample_points
from .nn import NeighborRadii, brute_force_radii, kth_nn_radii

__version__ = "0.1.0"
