"""Numerical toolkit for the convolution operator with affine surface
measure on a paraboloid: the transform and its adjoint, the symmetry
group and its pullback action, paraball geometry with the quasidistance,
Lorentz/entropy decompositions, extremizer search for the L^p -> L^q
ratio, and affine arclength/surface measures.
"""

from .grid import GridFunction, GridSpec, box_spec
from .norms import (ExponentPair, RoughDecomposition, entropy_refine, lorentz_quasinorm,
                    lp_norm, psi_integral, rough_decompose, tail_mass, trim_small_levels)
from .operator import (TransformPlan, adjoint_transform, bilinear_form, forward_at_points,
                       forward_transform, inner, rayleigh_ratio)
from .symmetry import (GroupElement, apply_partner_point, apply_point, compose, galilean,
                       general_position, identity_element, incidence, incidence_defect,
                       interpolate_points, inverse, linear_symmetry, make_element,
                       partner_pullback, pullback, scaling, translation)
from .paraball import (DualPair, Paraball, contains, dual, dual_pair, expanded_contains,
                       fit_paraball, greedy_cover, partition_by_interaction, quasidistance,
                       rasterize, transform_dual_pair, transform_paraball, unit_paraball,
                       volume)
from .extremizer import (ExtremizeTrace, decay_exponent, decay_profile, el_iterate,
                         el_residual, extremize, frequency_split, gaussian_init,
                         positivity_profile, renormalize)
from .affine import (CurveChart, Reparam, SurfaceChart, affine_invariance_defect,
                     arclength_density, chart_by_name, measure, reparam_invariance_defect,
                     surface_density)

__version__ = "0.1.0"
