"""Scattering resonances of one-dimensional high-contrast resonator chains.

Propagation matrices, characteristic determinants and a contour-based root
finder for the resonances; capacitance-matrix asymptotics; periodic gauge
chains and their skin effect.
"""

from .errors import (
    AtResonance,
    ConfigError,
    ContourTooClose,
    ConvergenceFailure,
    MaxDepthExceeded,
    MixedGaugeComplexSpeed,
    NegativeContrast,
    NewtonDiverged,
    NoInBandResonance,
    NonPositiveLength,
    NonPositiveSpacing,
    NotALimitResonance,
    NotAResonance,
    OutOfBand,
    ResonChainError,
    SingularSystem,
    SolverError,
    TrackingLost,
    ZeroContrast,
    ZeroSpeed,
)
from .model import (
    OUTGOING,
    PERFECT_TRANSMISSION,
    LeftAngle,
    OutgoingBoth,
    PerfectTransmission,
    ResonatorArray,
    config_from_dict,
    extremities,
    load_config,
    make_array,
    validate,
)
from .propagation import (
    ModeTrace,
    block_matrix,
    exterior_matrix,
    gauge_block_matrix,
    gauge_interior_matrix,
    green_function,
    interior_matrix,
    propagate_mode,
    symmetrised_block,
    symmetrised_total,
    total_matrix,
    transmission,
)
from .spectra import (
    Resonance,
    SearchRegion,
    char_det,
    classify_exceptional,
    count_zeros,
    delta_zero_spectrum,
    find_resonances,
)
from .capacitance import (
    CapacitanceMatrix,
    capacitance_matrix,
    coefficients,
    eigenvalues,
    gauge_capacitance,
    predict_resonances,
    t_vectors,
    zeta,
)
from .skin import (
    PeriodicCell,
    band_scan,
    cell_matrix,
    damping_diagnostics,
    envelope_report,
    gamma_profile,
    quasimomentum,
    replicate,
)

__version__ = "0.1.0"
