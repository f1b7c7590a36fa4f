"""Numerical laboratory for the inverse conductivity problem.

Forward boundary operators (current-to-voltage and voltage-to-current
maps), variational misfit functionals, the complete electrode model, and
laminate homogenization experiments on desk-scale finite element meshes.
"""

from .electrodes import (CemSolution, ElectrodeConfig, ResistanceMatrix,
                         cem_stability_probe, equispaced_electrodes,
                         resistance_matrix, solve_cem)
from .errors import (CapacityError, CondlabError, InversionError,
                     ResolutionError, SolverError)
from .fem import (FemSolution, energy_inner_product, solve_dirichlet,
                  solve_neumann)
from .fields import (ConductivityTensorField, DiffeoSpec, LaminateSpec,
                     check_membership, check_scalar_approximation,
                     constant_tensor, dump_field, field_distance,
                     laminate_field, project_to_class, push_forward,
                     radial_twist, scalar_field)
from .functionals import (FunctionalValue, MeasurementSet, eval_j0, eval_j1,
                          eval_j2, measurements_from_operator, minimize_scalar)
from .homogenization import (EffectiveTensor, GSequenceSpec, build_g_sequence,
                             cell_problem_effective, laminate_effective)
from .mesh import (Mesh, boundary_function, boundary_mass_matrix, dump_mesh,
                   generate_disk_mesh, generate_square_mesh, load_mesh)
from .operators import (BoundaryBasis, BoundaryOperator, GapOperator,
                        assemble_gap, dirichlet_to_neumann, fourier_basis,
                        gap_norm_l2, neumann_to_dirichlet, op_distance_l2l2,
                        op_distance_natural, operator_eigenvalues)

__version__ = "0.1.0"
