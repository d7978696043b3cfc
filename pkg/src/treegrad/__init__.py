"""Gradient, integrated-gradient and active-subspace estimates from
constant-leaf regression trees."""

from .data import (Dataset, Normalizer, SyntheticSpec, generate_synthetic, load_csv,
                   normalize_unit_cube, random_direction, true_gradient)
from .ensemble import BootstrapConfig, Forest, fit_forest, forest_grad_at, forest_tbas, forest_tbig
from .gradfield import GradientField, extract
from .integrodiff import (IDENTITY, OUTER, AttributionResult, Integrand, SubspaceResult, mce, pbe,
                          tbas, tbig, tbig_exact)
from .linalg import eig_sym, principal_angle, sqrt_psd
from .measure import Empirical, Segment, UniformCube
from .tree import FitConfig, RegressionTree, depth_schedule, fit

__version__ = "0.1.0"
