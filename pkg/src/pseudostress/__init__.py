"""Mixed finite element eigensolver for linear elasticity in displacement-pseudostress form."""

from .analysis import ConvergenceReport, StudyConfig, fit_order, match_modes, relative_errors, run_study
from .assembly import (
    AssembledSystem,
    MaterialParams,
    assemble_a_deviatoric,
    assemble_a_original,
    assemble_b,
    assemble_mass,
    assemble_system,
    build_lame,
    l2_project,
    rt_interpolate,
    trace_constraint,
)
from .elements import piola_map, reference_pk_basis, reference_rt_basis
from .mesh import DomainKind, DomainSpec, Mesh, MeshError, export_mesh, generate_mesh, import_mesh
from .quadrature import quadrature
from .spectral import EigenSolution, PencilProblem, build_pencil, solve, solve_eigen, solve_limit_eigen, solve_system

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "StudyConfig",
    "fit_order",
    "match_modes",
    "relative_errors",
    "run_study",
    "AssembledSystem",
    "MaterialParams",
    "assemble_a_deviatoric",
    "assemble_a_original",
    "assemble_b",
    "assemble_mass",
    "assemble_system",
    "build_lame",
    "l2_project",
    "rt_interpolate",
    "trace_constraint",
    "piola_map",
    "reference_pk_basis",
    "reference_rt_basis",
    "DomainKind",
    "DomainSpec",
    "Mesh",
    "MeshError",
    "export_mesh",
    "generate_mesh",
    "import_mesh",
    "quadrature",
    "EigenSolution",
    "PencilProblem",
    "build_pencil",
    "solve",
    "solve_eigen",
    "solve_limit_eigen",
    "solve_system",
]
