"""weakarrival: quantum arrival-time distributions from weak measurements.

Library layout:

* ``specfun``          complex erfc / Faddeeva with the exp(i pi/4) branch
* ``propagator``       grids, wavefunctions, free and split-operator evolution,
                       sharp region projectors
* ``arrival_op``       complex arrival operators Pi_plus / Pi_minus: closed-form
                       momentum matrix elements, expectations, backflow scan
* ``classical_oracle`` phase-space Monte Carlo arrival densities
* ``weak_meas_sim``    particle x pointer protocol with postselection
* ``cli``              CSV-producing command line (diag, diag-dt, expect, simulate)
"""

__version__ = "0.1.0"

from .arrival_op import (
    ArrivalConfig,
    BackflowScanResult,
    ComplexArrivalResult,
    expectation_pi,
    expectation_pi_grid,
    pi_minus_matrix_element,
    pi_plus_diagonal,
    pi_plus_matrix_element,
    pi_plus_semiclassical,
    scan_two_gaussian_backflow,
    w12_predicted,
)
from .classical_oracle import (
    ArrivalDensity,
    PhaseSpaceEnsemble,
    StepSizeError,
    arrival_density,
    evolve_ensemble,
    sample_gaussian_ensemble,
)
from .propagator import (
    DEFAULT_UNITS,
    BoundaryLeakageWarning,
    GaussianPacket,
    GridWavefunction,
    MomentumGrid,
    PositionGrid,
    PotentialSpec,
    SimulationUnits,
    auto_position_grid,
    evolve_free,
    evolve_potential,
    free_propagator_kernel,
    project_region,
    region_weights,
    to_momentum,
    to_position,
)
from .specfun import SQRT_I, erfc_complex, faddeeva
from .weak_meas_sim import (
    CouplingConfig,
    DegenerateCouplingError,
    DetectorState,
    JointState,
    PostselectionError,
    WeakMeasurementOutcome,
    apply_interaction,
    detector_coefficient,
    gaussian_detector,
    postselect,
    prepare_joint,
    run_protocol_sweep,
    sample_pointer_readings,
)

__all__ = [name for name in dir() if not name.startswith("_")]
