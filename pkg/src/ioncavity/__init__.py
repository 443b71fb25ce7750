"""Simulation and analysis toolkit for a driven two-level emitter in a lossy cavity."""

__version__ = "0.1.0"

from .analytic import (
    BackactionField,
    CavityGeometry,
    EfficiencyChain,
    backaction_ratio,
    bloch_excited_population,
    broadened_width,
    coating_loss_model,
    cooperativity,
    efficiency,
    interference_detunings,
    kappa_from_geometry,
    linearized_minimum,
    peak_cavity_output,
    purcell_factor,
    purcell_linewidth,
)
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .detector import (
    CorrelationCurve,
    DetectorModel,
    convolve_jitter,
    dark_count_floor,
    fiber_output_rate,
    mirror_escape,
)
from .fitting import (
    FitResult,
    fit_exponential_loss,
    fit_lorentzian,
    fit_poly_minimum,
    levenberg_marquardt,
)
from .linalg import (
    HilbertSpec,
    OperatorSet,
    SingularMatrixError,
    build_operators,
    expm,
    solve_linear,
    tensor,
)
from .lindblad import (
    EmissionRates,
    PhysicalityError,
    SystemParams,
    VanishingDenominatorError,
    atom_g2,
    check_density_matrix,
    emission_rates,
    evolve,
    g2_cavity,
    hamiltonian,
    liouvillian,
    steady_observables,
    steady_state,
    truncation_shift,
)
