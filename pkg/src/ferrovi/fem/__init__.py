from .bdm import BDM1, bdm1_basis
from .experiment import FemExperiment, FemRun, run_fem, top_fiber_profile
from .mesh import Mesh, cantilever_beam, patch_square, read_mesh, rectangle, write_mesh
from .system import DofMap, FeSystem, build_dofmap, inf_sup_constant
from .vtk import write_fields, write_vtk

__all__ = [
    "BDM1", "bdm1_basis", "FemExperiment", "FemRun", "run_fem", "top_fiber_profile", "Mesh",
    "cantilever_beam", "patch_square", "read_mesh", "rectangle", "write_mesh", "DofMap", "FeSystem",
    "build_dofmap", "inf_sup_constant", "write_fields", "write_vtk",
]
