"""Convolution-thresholding topology optimization for steady heat conduction.

The package provides a spectral heat-kernel convolution core, a P1 finite
element solver on uniform triangulations, the thresholding/prediction
machinery, and two optimization drivers (classical iteration and the
prediction-correction variant with guaranteed energy decay), plus file
formats and a CLI for running the bundled benchmark cases.
"""

from .fields import (
    GridSpec,
    ScalarField,
    IndicatorField,
    make_grid,
    node_index,
    node_multi_index,
    node_positions,
    field_diff_norm,
    discrete_volume,
)
from .convolution import KernelParams, convolve, perimeter_estimate, blend_materials
from .fem import (
    Triangulation,
    BoundarySpec,
    SolverSettings,
    SolverError,
    PRECONDITIONERS,
    boundary_nodes,
    assemble_stiffness,
    solve_state,
    solve_adjoint,
    gradient_product_field,
)
from .energy import EnergyParams, EnergyBreakdown, evaluate_energy, compute_phi
from .thresholding import (
    ThresholdResult,
    PredictionSets,
    select_smallest,
    volume_threshold,
    prediction_sets,
)
from .optimizer import (
    IctmConfig,
    IterationRecord,
    RunResult,
    CorrectionState,
    CorrectionResult,
    correction_step,
    run_classical,
    run_prediction_correction,
    run,
    VARIANTS,
)
from .cases import (
    ProblemCase,
    make_area_to_point,
    make_area_to_sides,
    make_volume_to_surface,
    initial_guess,
    volume_target,
    CASE_BUILDERS,
)
from .io import (
    ConfigError,
    LOG_HEADER,
    SNAPSHOT_FORMATS,
    IterationLogWriter,
    RunManifest,
    write_iteration_log,
    read_iteration_log,
    write_field_snapshot,
    read_field_snapshot,
    parse_config,
    load_config,
    build_case,
    build_config,
    expand_sweep,
)

__version__ = "0.1.0"
