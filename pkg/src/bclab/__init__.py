"""Certified fixed-point experiments for planar branched covers of degree two."""

from .annulus import (AnnulusMap, PuncturedChart, StripLift, essential, fixed_point_in_fill, lift,
                      lifted_copy, puncture, select_lift_fixing)
from .errors import BclabError
from .fixedpoints import (CertificateList, FixedPointCertificate, count_periodic, find_fixed_points,
                          rate_estimate, winding_index)
from .maps import (Composed, Monomial, NormalizedModelMap, Quadratic, RotationCover, julia_dust,
                   make_family)
from .perturbation import NormalizedModel, PerturbationMap, build_V, maximal_disc_U, verify_no_new_fixed
from .plane import BoxRect, Point2, Polyline, tube
from .region import CompactRegion, components_of_complement, fill, is_connected, separates

__version__ = "0.1.0"
