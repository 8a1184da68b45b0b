"""Certified Plantinga-Vegter subdivision with condition-number tooling.

Main entry points:

* :func:`pv_interval` / :func:`pv_effective` subdivide [-a, a]^n,
* :func:`kappa_aff` and the local size bounds in :mod:`pvsubdiv.condition`,
* random models in :mod:`pvsubdiv.sampling`,
* Monte-Carlo estimates in :mod:`pvsubdiv.amortize`.
"""

from .boxes import NBox, standard_subdivision
from .condition import ConditionValue, kappa_aff, kappa_via_projection, local_size_bound, local_size_bound_fp
from .effective import cf_fp_test, precision_for_box, pv_effective, working_precision
from .fp import RoundedFloat, ThetaBudget
from .interval import (BoxCertificate, CertificateKind, DepthExceeded, Subdivision, cf_box_test, pv_interval,
                       verify_subdivision)
from .poly import AffinePoly, HomoPoly, figure1_quartic, load_poly, save_poly, weyl_norm
from .sampling import DobroSpec, sample_dobro, smoothed

__version__ = "0.1.0"
