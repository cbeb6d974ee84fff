"""Time-domain viscoacoustic wave simulation with memory variables.

Constant-Q media are approximated by rational (generalized Maxwell)
moduli, discretized with a mixed finite-element leapfrog scheme on
regular grids, absorbed at the edges by split-field layers, and bounded
by free surfaces enforced on grid-independent polylines.  Closed-form
references (1D dissipation operator, cylinder partial waves) and the
dispersion analysis of the scheme live alongside the solver.
"""

from .material import (
    KjartanssonModel,
    Rheology,
    calibrate_to_speed,
    complex_wavenumber,
    kjartansson_modulus,
    modulus_of_fit,
    quality_factor,
)
from .qfit import FitBand, FitError, FitReport, fit_gmb, fit_pade, fit_tau, hybrid_band
from .source import Wavelet, dominant_omega, omega_max, ricker, two_sine
from .grid import Grid, MaterialField, build_layout, rasterize_materials
from .solver import (
    NumericalAbort,
    SimState,
    assemble,
    cfl_max_dt,
    discrete_energy,
    init_state,
    step,
)
from .pml import PmlSpec, damping_profile, init_pml_state, layout_pml, pml_step
from .fictdom import SurfaceMesh, assemble_coupling, circle_surface, factor_schur, line_surface
from .oracle import (
    CylinderScene,
    TraceSet,
    analytic_trace_1d,
    correlation,
    cylinder_coefficients,
    cylinder_trace,
    dissipation_operator,
    l2_misfit,
)
from .dispersion import DispersionPoint, continuous_omega, discrete_omega, sweep_curves
from .scenario import Scenario, parse_scenario, print_scenario, read_snapshot, write_snapshot
from .runner import run

__version__ = "1.0.0"
