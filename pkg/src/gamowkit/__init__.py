"""Hardy-space resonances, Gamow states and simulated shelving experiments."""

from .errors import (
    CoverageError,
    DomainError,
    FitFailureError,
    GamowkitError,
    IncompatibleGridsError,
    InsufficientDataError,
    InvalidInputError,
    NotAnObservableError,
    NumericalError,
    ParseError,
    PoleEvaluationError,
    RankDeficiencyError,
    SchemaError,
    SemigroupDomainError,
    UndefinedRatioError,
)
from .hardy import (
    Direction,
    EnergyGrid,
    HalfPlane,
    ResidualReport,
    SampledWaveFunction,
    TimeSignal,
    born_probability,
    default_grid,
    evaluate_offaxis,
    fourier_to_energy,
    fourier_to_time,
    hardy_residual,
    inner_product,
    semigroup_check,
    time_translate,
)
from .jumps import (
    DarkPeriod,
    EventLog,
    FluorescenceTrace,
    LevelSystem,
    LifetimeEstimate,
    align_onsets,
    barium_ion,
    bin_counts,
    detect_dark_periods,
    estimate_lifetime,
    simulate,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .resonance import (
    FitResult,
    GamowState,
    ResonancePole,
    bw_amplitude,
    fit_breit_wigner,
    gamow_evolution_factor,
    gamow_pairing,
    gamow_wavefunction,
    lifetime,
    lifetime_quadrature,
    lineshape,
    survival_probability,
)

__version__ = "0.1.0"
