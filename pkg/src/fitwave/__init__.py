"""fitwave: frequency-domain electromagnetic solver on staggered grids.

A compact field solver built around three interchangeable realizations of
the curl-curl wave operator (assembled sparse, five-stage pointwise/sparse
pipeline, and a pre-scaled two-product form), matrix-free Krylov methods
with deterministic parallel reductions, discrete edge-path ports, and a
frequency-sweep driver with Z/S-parameter extraction.
"""

from .constants import C0, EPS0, MU0
from .grid import AXES, Grid, build_grid
from .krylov import METHODS, JacobiPreconditioner, SolveReport, jacobi_apply, solve
from .materials import (
    MaterialDiagonals,
    MaterialMap,
    WallBC,
    average_permeability,
    average_permittivity,
    build_material_diagonals,
    compute_edge_mask,
    scale_curl,
)
from .operator import (
    VARIANTS,
    AssembledOperator,
    FiveStageOperator,
    OperatorStats,
    TwoStageOperator,
    WaveOperator,
    assemble_sparse_A,
    build_operator,
    jacobi_diagonal,
    op_stats,
)
from .parallel import Engine, SlicePlan, plan_slices
from .ports import (
    Port,
    build_rhs,
    current_vector,
    port_edges,
    probe_voltage,
    s_from_z,
    unit_pattern,
    validate_port,
    z_from_s,
    z_parameters,
)
from .scene import Scene, parse_scene, scene_to_dict, write_scene
from .sweep import FrequencyResult, SweepConfig, SweepResult, find_peaks, run_sweep
from .topology import (
    SparseOperator,
    build_curl,
    build_gradient,
    spmv,
    spmv_transpose,
    write_matrix_market,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # constants
    "C0", "EPS0", "MU0",
    # grid
    "AXES", "Grid", "build_grid",
    # topology
    "SparseOperator", "build_curl", "build_gradient", "spmv",
    "spmv_transpose", "write_matrix_market",
    # materials
    "MaterialMap", "WallBC", "MaterialDiagonals", "average_permittivity",
    "average_permeability", "build_material_diagonals", "compute_edge_mask",
    "scale_curl",
    # operator
    "VARIANTS", "WaveOperator", "AssembledOperator", "FiveStageOperator",
    "TwoStageOperator", "OperatorStats", "build_operator", "assemble_sparse_A",
    "jacobi_diagonal", "op_stats",
    # parallel
    "Engine", "SlicePlan", "plan_slices",
    # krylov
    "METHODS", "SolveReport", "JacobiPreconditioner", "jacobi_apply", "solve",
    # ports
    "Port", "port_edges", "validate_port", "current_vector", "unit_pattern",
    "build_rhs", "probe_voltage", "z_parameters", "s_from_z", "z_from_s",
    # scene
    "Scene", "parse_scene", "write_scene", "scene_to_dict",
    # sweep
    "SweepConfig", "FrequencyResult", "SweepResult", "run_sweep", "find_peaks",
]
