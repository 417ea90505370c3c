"""Physics-consistent channel models and optimizers for reconfigurable
surfaces with tunable inter-element connections, built on multiport network
theory.

The exact end-to-end channel of a (transmitter, surface, receiver) multiport
is reduced to a compact cascade ``H = hbar_rt + hbar_ri @ theta_bar @ hbar_it``
with a unitary symmetric surface response, under the exact model and three
standard approximations alike; on top of that sit a closed-form single-port
optimizer, a certified global single-stream optimizer, a multiuser sum-rate
solver, and Monte-Carlo studies of what mutual coupling and the unilateral
approximation are worth.
"""

from .netparams import (DEFAULT_COND_CAP, NetworkParameters, PortLayout,
                        ResampleBudgetError, SingularMatrixError,
                        Terminations, generate_rayleigh_scenario, y_to_z,
                        z_to_s, z_to_y)
from .topology import Topology, admittance_count, make_mask, optimal_bandwidth
from .channels import (CompactDecomposition, NotPositiveDefiniteError,
                       RisState, b_to_bbar, bbar_to_b, channel_app1,
                       channel_app2, channel_app3, channel_compact,
                       channel_exact, channel_explicit, decompose,
                       make_ris_state, theta_from_bbar)
from .coupling import (DipoleGeometry, QuadratureConvergenceError,
                       QuadratureSpec, build_ris_impedance,
                       dipole_mutual_impedance, near_field_transmitter_link)
from .symfit import (MaskViolationError, SymFitProblem, SymFitResult,
                     pack_free_variables, solve_symfit, unpack_free_variables)
from .sdpsolver import (SdpSolution, SdpSolverError, SdrLift, TwoConstraintSdp,
                        build_sdp_full, build_sdp_reduced, rank_one_extract,
                        solve)
from .optim import (AdmmDivergenceError, AdmmOptions, MimoSolution,
                    MultiuserSolution, NormMismatchError,
                    RecoveryResidualError, optimize_mimo_single_stream,
                    optimize_multiuser_admm, optimize_siso, receive_power,
                    recover_ris_state, relative_performance, sum_rate)
from .harness import (CSV_COLUMNS, ExperimentConfig, parse_config, run,
                      validate_prop2, write_csv)

__version__ = "0.1.0"
