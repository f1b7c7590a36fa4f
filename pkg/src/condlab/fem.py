"""P1 Galerkin solvers for the conduction Dirichlet and Neumann problems.

Both problems share the stiffness form int_Omega A grad(u) . grad(psi).
The Neumann solve uses the zero-boundary-mean normalization: the
singular system is solved with one pinned degree of freedom and the
result is shifted so the boundary integral of the solution vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .fields import ConductivityTensorField
from .mesh import Mesh, boundary_mass_matrix, triangle_areas

RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class FemSolution:
    """Nodal solution of a conduction boundary value problem.

    energy is the quadratic form int_Omega A grad(u) . grad(u).
    """

    nodal_values: np.ndarray
    problem_kind: str  # "dirichlet" | "neumann"
    energy: float
    field_ref: str
    mesh: Mesh

    def __post_init__(self):
        self.nodal_values.setflags(write=False)

    def boundary_values(self) -> np.ndarray:
        """Trace at boundary vertices, full-length nodal layout."""
        out = np.zeros_like(self.nodal_values)
        bv = self.mesh.boundary_vertices
        out[bv] = self.nodal_values[bv]
        return out


def element_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Constant P1 hat-function gradients per element.

    Returns (grads, areas) with grads[e, :, i] the gradient of the hat
    function of local vertex i on element e.
    """
    p = mesh.vertices[mesh.triangles]
    areas = triangle_areas(mesh)
    grads = np.empty((mesh.num_triangles, 2, 3))
    for i in range(3):
        opp = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        # Rotate the opposite edge by 90 degrees and normalize by 2*area.
        grads[:, 0, i] = -opp[:, 1]
        grads[:, 1, i] = opp[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def assemble_stiffness(mesh: Mesh, field: ConductivityTensorField) -> sp.csr_matrix:
    """Sparse stiffness matrix K[i, j] = int_Omega A grad(phi_j) . grad(phi_i)."""
    if field.num_elements != mesh.num_triangles:
        raise ValueError("field does not match mesh")
    grads, areas = element_gradients(mesh)
    local = np.einsum("e,eci,ecd,edj->eij", areas, grads, field.tensors, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.num_vertices,) * 2)
    return K.tocsr()


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 interior mass matrix."""
    areas = triangle_areas(mesh)
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    vals = areas[:, None, None] * local[None, :, :]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sp.coo_matrix((vals.ravel(), (rows, cols)),
                         shape=(mesh.num_vertices,) * 2).tocsr()


def nodal_gradient(mesh: Mesh, nodal_values: np.ndarray) -> np.ndarray:
    """Per-element constant gradient of a P1 function, shape (nt, 2)."""
    grads, _ = element_gradients(mesh)
    return np.einsum("eci,ei->ec", grads, nodal_values[mesh.triangles])


class DirichletSolver:
    """Factorized solver for Dirichlet problems with a fixed conductivity."""

    def __init__(self, mesh: Mesh, field: ConductivityTensorField):
        self.mesh = mesh
        self.field = field
        self.stiffness = assemble_stiffness(mesh, field)
        bmask = np.zeros(mesh.num_vertices, dtype=bool)
        bmask[mesh.boundary_vertices] = True
        self.interior = np.flatnonzero(~bmask)
        self.boundary = np.flatnonzero(bmask)
        K = self.stiffness
        self._Kii = K[self.interior][:, self.interior].tocsc()
        self._Kib = K[self.interior][:, self.boundary].tocsr()
        try:
            self._lu = spla.splu(self._Kii)
        except RuntimeError as exc:  # pragma: no cover - guarded by ellipticity
            raise SolverError(f"stiffness factorization failed: {exc}") from exc
        self._mass = None

    def solve(self, boundary_values: np.ndarray, source=None) -> FemSolution:
        """Solve with the given boundary trace and optional interior density.

        boundary_values is a full-length nodal vector whose entries at
        boundary vertices provide the Dirichlet datum; source, if given,
        is an L2 density as nodal values or a callable source(x, y).
        """
        u = np.zeros(self.mesh.num_vertices)
        u[self.boundary] = np.asarray(boundary_values)[self.boundary]
        rhs = -self._Kib @ u[self.boundary]
        if source is not None:
            if callable(source):
                f = source(self.mesh.vertices[:, 0], self.mesh.vertices[:, 1])
            else:
                f = np.asarray(source, dtype=float)
            if self._mass is None:
                self._mass = mass_matrix(self.mesh)
            rhs = rhs + (self._mass @ f)[self.interior]
        ui = self._lu.solve(rhs)
        scale = max(float(np.linalg.norm(rhs)), 1e-300)
        residual = float(np.linalg.norm(self._Kii @ ui - rhs)) / scale
        if residual > RESIDUAL_RTOL:
            raise SolverError(f"Dirichlet solve residual {residual:.3g}")
        u[self.interior] = ui
        energy = float(u @ (self.stiffness @ u))
        return FemSolution(u, "dirichlet", energy, self.field.ref, self.mesh)


class NeumannSolver:
    """Factorized solver for Neumann problems with a fixed conductivity."""

    COMPAT_RTOL = 1e-8

    def __init__(self, mesh: Mesh, field: ConductivityTensorField):
        self.mesh = mesh
        self.field = field
        self.stiffness = assemble_stiffness(mesh, field)
        self.boundary_mass = boundary_mass_matrix(mesh)
        self._perimeter = float(self.boundary_mass.sum())
        # Pin the first vertex to remove the constant nullspace.
        self._pin = 0
        keep = np.arange(1, mesh.num_vertices)
        self._keep = keep
        Kred = self.stiffness[keep][:, keep].tocsc()
        try:
            self._lu = spla.splu(Kred)
        except RuntimeError as exc:  # pragma: no cover
            raise SolverError(f"stiffness factorization failed: {exc}") from exc
        self._Kred = Kred

    def flux_load(self, flux_values: np.ndarray) -> np.ndarray:
        """Boundary load vector: trace mass matrix applied to vertex samples."""
        return self.boundary_mass @ np.asarray(flux_values, dtype=float)

    def solve(self, flux_values: np.ndarray) -> FemSolution:
        """Solve with flux datum given as boundary-vertex samples.

        The datum must have (numerically) zero boundary mean; the defect
        is reported otherwise.  The returned solution has exactly zero
        boundary mean.
        """
        g = np.asarray(flux_values, dtype=float)
        load = self.flux_load(g)
        total = float(load.sum())
        gnorm = float(np.sqrt(max(g @ load, 0.0)))
        if abs(total) > self.COMPAT_RTOL * max(gnorm, 1e-300):
            raise ValueError(
                f"flux data violates compatibility: integral {total:.3g} "
                f"exceeds {self.COMPAT_RTOL:g} * ||g||")
        return self.solve_from_load(load)

    def solve_from_load(self, load: np.ndarray) -> FemSolution:
        """Solve with an assembled load functional (already compatible)."""
        # Distribute any residual mean defect so the pinned system is
        # consistent; the correction is below the compatibility tolerance.
        total = float(load.sum())
        load = load - total * (self.boundary_mass @ np.ones(len(load))) / self._perimeter
        rhs = load[self._keep]
        vk = self._lu.solve(rhs)
        scale = max(float(np.linalg.norm(rhs)), 1e-300)
        residual = float(np.linalg.norm(self._Kred @ vk - rhs)) / scale
        if residual > RESIDUAL_RTOL:
            raise SolverError(f"Neumann solve residual {residual:.3g}")
        v = np.zeros(self.mesh.num_vertices)
        v[self._keep] = vk
        boundary_mean = float((self.boundary_mass @ v).sum()) / self._perimeter
        v -= boundary_mean
        energy = float(v @ (self.stiffness @ v))
        return FemSolution(v, "neumann", energy, self.field.ref, self.mesh)


def solve_dirichlet(mesh: Mesh, field: ConductivityTensorField,
                    boundary_values: np.ndarray, source=None) -> FemSolution:
    return DirichletSolver(mesh, field).solve(boundary_values, source)


def solve_neumann(mesh: Mesh, field: ConductivityTensorField,
                  flux_values: np.ndarray) -> FemSolution:
    return NeumannSolver(mesh, field).solve(flux_values)


def energy_inner_product(mesh: Mesh, field: ConductivityTensorField,
                         u_sol: FemSolution, v_sol: FemSolution) -> float:
    """int_Omega A grad(u) . grad(v) by exact P1 quadrature."""
    if u_sol.mesh is not v_sol.mesh or len(u_sol.nodal_values) != mesh.num_vertices:
        raise ValueError("solutions live on different meshes")
    K = assemble_stiffness(mesh, field)
    return float(u_sol.nodal_values @ (K @ v_sol.nodal_values))


def dump_solution(sol: FemSolution) -> str:
    """One line per vertex: 'vertex_index value'."""
    return "\n".join(f"{i} {v:.17g}"
                     for i, v in enumerate(sol.nodal_values)) + "\n"
