"""Finite-element simulation of heat conduction with water-ice phase change
in heterogeneous ground, with seasonal freezing columns around warm wells.
"""

from .fem import (
    Assembler,
    DirichletSet,
    LinearSystem,
    TemperatureField,
    apply_dirichlet,
    assemble,
    cell_coefficients,
    collect_dirichlet,
    element_lumped_mass,
    element_stiffness,
)
from .linalg import CsrMatrix, SolveReport, cg_solve, spmv
from .mesh import (
    BoxMeshPlan,
    BoxMeshSpec,
    Mesh,
    carve_box,
    generate_box,
    paint_region,
    read_msh,
    tet_volume,
    write_msh,
)
from .physics import (
    ColumnController,
    Material,
    MaterialTable,
    PhaseModel,
    SeasonalForcing,
    air_temperature,
    alpha_of_phi,
    columns_active,
    effective_capacity,
    frozen_thawed_coeffs,
    lambda_of_phi,
    phi_delta,
    phi_delta_prime,
)
from .simulate import Simulation, SimulationConfig, StepRecord, initialize, run, step
from .verify import (
    MmsCase,
    NeumannCase,
    erf,
    mms_source,
    neumann_lambda,
    run_neumann_benchmark,
)

__version__ = "0.1.0"

__all__ = [
    "Assembler",
    "BoxMeshPlan",
    "BoxMeshSpec",
    "ColumnController",
    "CsrMatrix",
    "DirichletSet",
    "LinearSystem",
    "Material",
    "MaterialTable",
    "Mesh",
    "MmsCase",
    "NeumannCase",
    "PhaseModel",
    "SeasonalForcing",
    "Simulation",
    "SimulationConfig",
    "SolveReport",
    "StepRecord",
    "TemperatureField",
    "air_temperature",
    "alpha_of_phi",
    "apply_dirichlet",
    "assemble",
    "carve_box",
    "cell_coefficients",
    "cg_solve",
    "collect_dirichlet",
    "columns_active",
    "effective_capacity",
    "element_lumped_mass",
    "element_stiffness",
    "erf",
    "frozen_thawed_coeffs",
    "generate_box",
    "initialize",
    "lambda_of_phi",
    "mms_source",
    "neumann_lambda",
    "paint_region",
    "phi_delta",
    "phi_delta_prime",
    "read_msh",
    "run",
    "run_neumann_benchmark",
    "spmv",
    "step",
    "tet_volume",
    "write_msh",
]
