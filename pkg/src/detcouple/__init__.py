"""Co-adapted Brownian couplings with deterministic mutual distance.

On each constant-curvature model space (Euclidean space, sphere, hyperbolic
half-space) a prescribed distance profile rho(t) is realizable by a coupled
pair of Brownian motions exactly when rho' stays inside a curvature-dependent
band; this package constructs the couplings, simulates them, and verifies the
constructions both algebraically and by Monte Carlo.
"""

from .coupling import (CouplingMatrices, TwoPlaneParams, build_a_phi, build_euclidean,
                       build_hyperbolic, build_sphere, frame_from_pair, psd_sqrt_2x2)
from .errors import (AdmissibilityError, DegenerateStateError, DetcoupleError,
                     ValidationError)
from .model_space import (SpaceKind, SpaceSpec, canonical_start, euclidean,
                          geodesic_distance, hyperbolic, point_at_distance, sphere,
                          to_unit_model, from_unit_model, validate_point)
from .profiles import (AdmissibilityReport, ClampedProfile, DistanceProfile, ProfileKind,
                       admissible_bounds, check_admissibility, constant, envelope,
                       euclidean_max_growth, eval_profile, hyperbolic_lower,
                       hyperbolic_upper, sphere_contracting, sphere_repulsive, tabulated,
                       tabulated_from_csv)
from .sde import (CoupledState, EnsembleResult, NoiseStream, PathRecord, Scheme,
                  StepConfig, driving_increments, simulate_ensemble, simulate_path, step,
                  time_grid)
from .verify import (VerifyReport, convergence_study, distance_error_stats, identity_scan,
                     identity_scan_all, mean_decay_check, rotation_ensemble,
                     rotation_oracle)

__version__ = "0.1.0"
