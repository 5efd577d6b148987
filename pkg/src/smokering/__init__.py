"""Concentrated smoke rings versus the point-vortex model.

Axisymmetric kernel evaluation, a Lagrangian particle simulator for thin
vortex rings, the planar point-vortex reference dynamics and the diagnostics
used to compare them.
"""

from .errors import (AccuracyError, AxisCollisionError, CollapseError,
                     ConfigurationError, DegenerateBlobError, DomainError,
                     FitError, NumericalError, RegimeError, SingularityError,
                     SmokeringError)
from .kernel import (difference_ratio, eval_G, eval_G_oracle, eval_K,
                     eval_special, special_values)
from .point_vortex import (PointVortexState, PvInvariants, pv_integrate,
                           pv_invariants, pv_rhs)
from .ring_sim import (FieldSplit, ParticleBlob, SimParams, advance,
                       external_field_split, induced_velocity, init_blobs)
from .diagnostics import (BlobMoments, BoundReport, MollifierParams,
                          blob_moments, bound_report, mass_tail,
                          mollified_mass, pv_deviation)
from .harness import (ConvergenceReport, ExperimentConfig, load_config,
                      run_case, solve_epsilon0, sweep_and_fit)

__version__ = "0.1.0"
