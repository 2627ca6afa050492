"""compactness-lab: desk-scale compactness diagnostics for degenerate parabolic
equations and moving-domain divergence-free calculus.

The package is organized by mechanism:

- `grid`: Cartesian grids, scalar/MAC fields, discrete calculus, H^{-m} norms
- `mollify`: bump mollifiers, shifts, the product commutator
- `truncate`: nonlinearities with finite critical sets and the C^1 truncation
- `parabolic`: the semi-implicit degenerate-parabolic scheme and its monitor
- `productlimit`: the four-line product-limit pipeline and Orlicz machinery
- `movedom`: diffeomorphism families, epsilon-interiors, uniform constants
- `divfree`: normal traces, Neumann-harmonic projection, dual seminorm
- `probe`: the compactness proofs executed as diagnostics
- `cli`: the `compactness-lab` experiment runner
"""

__version__ = "0.1.0"

from .grid import (Grid, RasterDomain, ScalarField, StaggeredVectorField,  # noqa: F401
                   divergence, gradient, h_minus_m_norm, inner, lp_norm,
                   staggered_inner, staggered_l2)
from .mollify import (commutator, convolve_space, convolve_staggered,  # noqa: F401
                      make_mollifier, shift_space, shift_time)
from .movedom import (DiffeoFamily, NonCylindricalDomain, bilipschitz,  # noqa: F401
                      eps_exterior, eps_interior, framing_check,
                      jacobian_bounds, make_domain, make_family, peel_measure,
                      poincare_constant, sobolev_transport_constant,
                      transported_poincare, uniform_poincare_sweep)
from .parabolic import (DiffusionTensor, SchemeRun, StepTimeSeries,  # noqa: F401
                        barenblatt_profile, energy_report, run_scheme,
                        semi_implicit_step, hypothesis_monitor,
                        time_derivative_tv)
from .productlimit import (build_cutoff, exp_orlicz_pair, localize,  # noqa: F401
                           luxemburg_gauge, orlicz_holder_check,
                           product_pipeline)
from .divfree import (VectorStepSeries, dual_norm_check, dual_seminorm,  # noqa: F401
                      neumann_harmonic, normal_trace, per_slice_project,
                      project_divfree0, trace_norm_surrogate)
from .probe import (dual_time_estimate, kruzhkov_probe, local_to_global,  # noqa: F401
                    ns_probe, limsup_probe, time_shift_safety)
from .truncate import build_beta, chain_gradient_check, nonlinearity_preset  # noqa: F401
