"""swingbench: power-grid swing dynamics under correlated power fluctuations.

A numpy/scipy workbench for studying how high-voltage grids absorb
exponentially correlated stochastic injections: steady states, weighted
Laplacian spectra, reproducible noise, nonlinear/linear/modal transient
simulation, and the primary-control-effort metric with its closed-form
ensemble averages and asymptotics.
"""

from .errors import (
    ConvergenceError,
    DisconnectedGridError,
    GridFormatError,
    GridValidationError,
    NoiseError,
    ParameterError,
    PowerImbalanceError,
    SimulationError,
    SwingbenchError,
)
from .grid import (
    Bus,
    DynamicParams,
    GridNetwork,
    Line,
    assign_parameters,
    detect_gamma,
    grid_from_dict,
    grid_to_dict,
    load_grid,
    parse_grid,
    save_grid,
    serialize_grid,
)
from .equilibrium import OperatingPoint, check_stability, power_mismatch, solve_steady_state
from .spectral import (
    SpectralData,
    TimeScaleReport,
    WeightedLaplacian,
    analyze,
    build_laplacian,
    decompose,
    normalize_laplacian,
    time_scales,
)
from .noise import (
    NoisePath,
    NoiseSpec,
    default_amplitudes,
    estimate_autocorrelation,
    generate_noise,
)
from .dynamics import (
    ModalTrajectory,
    SimulationConfig,
    Trajectory,
    evaluate_prop1,
    metric_dt,
    modal_reconstruction,
    simulate_linear,
    simulate_modal,
    simulate_nonlinear,
    step_rate_bound,
    suggested_dt,
)
from .metrics import (
    EnsembleStats,
    MetricReport,
    analytic_general,
    analytic_long,
    analytic_short,
    control_effort,
    control_effort_modal,
    default_warmup,
    ensemble_run,
    metric_report,
    rank_nodes,
)
from . import cases

__version__ = "0.1.0"
