"""stmca: simulate one-dimensional general diffusions as grid walks.

A diffusion is specified by its scale function and speed measure (density
plus atoms), covering sticky, skew, reflected and degenerate-coefficient
cases. The walk moves between neighboring grid points with exit-probability
weights and deterministic conditional exit times computed from Green-function
moments; grids can be tuned to the speed measure to keep the optimal rate.
"""
from .analysis import (
    EmpiricalLaw,
    RateFit,
    ReferenceKernel,
    rate_fit,
    reference_kernel,
    wasserstein_1d,
    wasserstein_to_kernel,
)
from .catalog import PRESETS, bessel, bm, cir, ou, skew_bessel, skew_bm, sticky_bm
from .config import RunConfig, build_grid, build_spec, load_config, loads_config, serialize_config
from .errors import (
    ConfigError,
    DegenerateGridError,
    NumericalError,
    RunawaySimulationError,
    StmcaError,
    UnsupportedMethodError,
)
from .estimators import (
    EstimationReport,
    TestFunction,
    estimate_over_paths,
    indicator_band,
    local_time_stat,
    observation_fraction,
    stickiness_estimator,
)
from .grid import (
    Grid,
    GridMetrics,
    atom_cell_grid,
    graded_atom_grid,
    metrics,
    tuned_grid_sde,
    tuned_grid_sticky,
    uniform_grid,
)
from .measure import (
    BoundaryBehavior,
    DiffusionSpec,
    Interval,
    ScaleFunction,
    SpeedMeasure,
    classify_boundary,
    check_nonexplosion,
    from_sde,
    to_natural_scale,
)
from .moments import CellQuantities, cell_quantities, mean_exit_time, v0, vk_quadrature
from .rng import RngSpec, RngStream
from .walk import (
    PathRecord,
    TransitionTable,
    build_table,
    init_state,
    simulate,
    terminal_values,
    value_at,
    values_at,
)

__version__ = "0.1.0"
