"""boundarylab: reflected diffusions, boundary local time and the
time-changed boundary jump process, cross-checked against deterministic
Dirichlet-to-Neumann computations on planar domains."""

from .boundary import (BoundaryTrace, JumpEvent, boundary_trace,
                       change_of_variables_check, jump_events,
                       local_time_inverse, scaling_check)
from .conductivity import (ConductivityField, bump_field, collared_radial_field,
                           constant_field, make_field, radial_poly_field)
from .excursions import ExcursionRecord, decompose_excursions, excursion_counting_measure
from .geometry import (BoundaryPoint, Domain, Projection, StarDomain, UnitDisk,
                       UnitSquare, make_domain)
from .reference import (DiskPolarGrid, DtNOperator, FourierSeries, SquareGrid,
                        dtn_apply, dtn_eigenvalues_radial,
                        integro_decomposition_check, levy_kernel,
                        poisson_kernel_disk, solve_dirichlet_fd, solve_neumann_fd)
from .simulate import (AbsorbedResult, PathSample, RngStream, sample_absorbed,
                       sample_path, simulate_absorbed_ensemble,
                       simulate_reflected_ensemble, step_reflected)

__version__ = "0.1.0"
