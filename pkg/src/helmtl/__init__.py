"""Two-level deflated shifted-Laplace preconditioning for P1 Helmholtz systems."""
from .assembly import (HelmholtzOperators, WavenumberField, assemble_boundary_mass,
                       assemble_helmholtz, assemble_mass, assemble_shifted, assemble_stiffness,
                       galerkin_coarse, helmholtz_operators)
from .fov import FovBoundary, FovSummary, fov_boundary, nu_min, weighted_fov
from .krylov import InnerProduct, MassInverseInnerProduct, SolveReport, elman_rate, fgmres, gmres
from .mesh import Mesh, MeshHierarchy, build_hierarchy, build_interval_mesh, build_square_mesh, refine
from .precond import (CslConfig, MultilevelConfig, TwoLevelConfig, build_preconditioner,
                      parse_method, setup_levels)

__version__ = "0.1.0"
