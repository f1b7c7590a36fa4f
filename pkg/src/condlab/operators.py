"""Discrete boundary operators in a zero-mean Fourier trace basis.

The current-to-voltage map and its inverse are assembled as dense
matrices acting on basis coordinates.  Operator distances are measured
as generalized singular values weighted by the basis Gram matrix, with
optional Fourier Sobolev weights realizing the half-order trace spaces.
Gap operators collect the interior misfit fields between the
Dirichlet-driven and Neumann-driven solutions for each basis current.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spsla

from .errors import ResolutionError
from .fem import DirichletSolver, NeumannSolver, nodal_gradient
from .fields import ConductivityTensorField
from .mesh import Mesh, boundary_mass_matrix, triangle_areas

SPACES = ("Hminus_half", "L2", "Hplus_half")


@dataclass(frozen=True)
class BoundaryBasis:
    """Zero-mean trigonometric functions of the boundary parameter.

    samples holds the 2K functions [cos(k t), sin(k t)], k = 1..K,
    sampled at boundary vertices (full nodal layout, zero at interior
    vertices) and explicitly mean-subtracted.  gram_l2 is their exact
    L2 Gram matrix on the polygonal boundary.
    """

    max_frequency: int
    samples: np.ndarray  # (2K, nv)
    gram_l2: np.ndarray  # (2K, 2K)
    mesh: Mesh

    def __post_init__(self):
        self.samples.setflags(write=False)
        self.gram_l2.setflags(write=False)

    @property
    def size(self) -> int:
        return 2 * self.max_frequency

    @property
    def frequencies(self) -> np.ndarray:
        """Frequency of each basis coordinate: 1, 1, 2, 2, ..., K, K."""
        return np.repeat(np.arange(1, self.max_frequency + 1), 2)

    def function_values(self, coords: np.ndarray) -> np.ndarray:
        """Nodal samples of the combination with the given coordinates."""
        return coords @ self.samples

    def project(self, nodal_values: np.ndarray,
                boundary_mass=None) -> np.ndarray:
        """L2(boundary) projection of a nodal trace onto the basis."""
        if boundary_mass is None:
            boundary_mass = boundary_mass_matrix(self.mesh)
        rhs = self.samples @ (boundary_mass @ nodal_values)
        return np.linalg.solve(self.gram_l2, rhs)


def fourier_basis(mesh: Mesh, max_frequency: int) -> BoundaryBasis:
    """Build the zero-mean Fourier basis; refuses under-sampled frequencies."""
    nb = len(mesh.boundary_edges)
    if max_frequency < 1:
        raise ValueError("max_frequency must be positive")
    if max_frequency > nb / 8:
        raise ResolutionError(
            f"max_frequency {max_frequency} exceeds the aliasing guard "
            f"{nb}/8 = {nb / 8:.1f} (eight boundary vertices per wavelength)")
    mass = boundary_mass_matrix(mesh)
    perimeter = float(mass.sum())
    ones = np.ones(mesh.num_vertices)
    bv = mesh.boundary_vertices
    theta = mesh.boundary_vertex_params
    rows = []
    for k in range(1, max_frequency + 1):
        for fn in (np.cos, np.sin):
            s = np.zeros(mesh.num_vertices)
            s[bv] = fn(k * theta)
            mean = float(ones @ (mass @ s)) / perimeter
            s[bv] -= mean
            rows.append(s)
    samples = np.array(rows)
    gram = samples @ (mass @ samples.T)
    return BoundaryBasis(max_frequency, samples, gram, mesh)


@dataclass(frozen=True)
class BoundaryOperator:
    """Dense operator in basis coordinates (coordinates in, coordinates out).

    Operators assembled from solves also carry the raw nodal samples of
    each column image (a voltage trace, or a flux density for the
    inverse-direction map), so applying the operator as a data source
    reproduces the exact discrete image rather than its basis
    projection.
    """

    matrix: np.ndarray
    source_space: str
    target_space: str
    basis: BoundaryBasis
    field_ref: str
    traces: np.ndarray = None  # (2K, nv) or None for synthetic operators

    def __post_init__(self):
        self.matrix.setflags(write=False)
        if self.traces is not None:
            self.traces.setflags(write=False)

    def apply_to_coords(self, coords: np.ndarray) -> np.ndarray:
        return self.matrix @ coords

    def boundary_values(self, coords: np.ndarray) -> np.ndarray:
        """Nodal samples of the image of the basis combination `coords`."""
        if self.traces is not None:
            return coords @ self.traces
        return self.basis.function_values(self.matrix @ coords)


def neumann_to_dirichlet(mesh: Mesh, field: ConductivityTensorField,
                         basis: BoundaryBasis,
                         solver: NeumannSolver = None) -> BoundaryOperator:
    """Column j is the basis projection of the voltage trace driven by basis current j."""
    if solver is None:
        solver = NeumannSolver(mesh, field)
    mass = solver.boundary_mass
    bv = mesh.boundary_vertices
    traces = np.zeros((basis.size, mesh.num_vertices))
    for j in range(basis.size):
        traces[j, bv] = solver.solve(basis.samples[j]).nodal_values[bv]
    # Projection of all traces at once: G^-1 S M t_j.
    matrix = np.linalg.solve(basis.gram_l2, basis.samples @ (mass @ traces.T))
    return BoundaryOperator(matrix, "Hminus_half", "Hplus_half", basis,
                            field.ref, traces)


def dirichlet_to_neumann(mesh: Mesh, field: ConductivityTensorField,
                         basis: BoundaryBasis,
                         solver: DirichletSolver = None) -> BoundaryOperator:
    """Current-from-voltage map; the Galerkin flux form in basis coordinates."""
    if solver is None:
        solver = DirichletSolver(mesh, field)
    U = np.empty((mesh.num_vertices, basis.size))
    for j in range(basis.size):
        U[:, j] = solver.solve(basis.samples[j]).nodal_values
    KU = solver.stiffness @ U
    matrix = np.linalg.solve(basis.gram_l2, U.T @ KU)
    # Flux samples: invert the boundary mass on the discrete flux
    # functional K u so feeding a column back into the flux solver
    # reproduces the Dirichlet solution exactly.
    bv = mesh.boundary_vertices
    mass_bb = boundary_mass_matrix(mesh)[bv][:, bv].tocsc()
    traces = np.zeros((basis.size, mesh.num_vertices))
    traces[:, bv] = spsla.splu(mass_bb).solve(KU[bv]).T
    return BoundaryOperator(matrix, "Hplus_half", "Hminus_half", basis,
                            field.ref, traces)


def _check_same_basis(P: BoundaryOperator, Q: BoundaryOperator):
    if P.basis is not Q.basis:
        raise ValueError("operators assembled on different bases")


def _space_weights(basis: BoundaryBasis, space: str) -> np.ndarray:
    if space not in SPACES:
        raise ValueError(f"unknown space tag {space!r}")
    k = basis.frequencies.astype(float)
    if space == "L2":
        return np.ones_like(k)
    exponent = 0.5 if space == "Hplus_half" else -0.5
    return (1.0 + k ** 2) ** exponent


def _gram_weighted_spectral_norm(D: np.ndarray, gram: np.ndarray) -> float:
    """Largest generalized singular value of D between gram-weighted spaces."""
    L = sla.cholesky(gram, lower=True)
    M = L.T @ sla.solve_triangular(L, D.T, lower=True).T
    return float(np.linalg.svd(M, compute_uv=False)[0])


def op_distance_l2l2(P: BoundaryOperator, Q: BoundaryOperator) -> float:
    """Operator distance with plain L2 norms on both sides."""
    _check_same_basis(P, Q)
    return _gram_weighted_spectral_norm(P.matrix - Q.matrix, np.asarray(P.basis.gram_l2))


def op_distance_natural(P: BoundaryOperator, Q: BoundaryOperator,
                        source: str, target: str) -> float:
    """Operator distance with Fourier Sobolev weights on the coordinates.

    Coordinate k carries weight (1 + k^2)^(1/2) for Hplus_half and
    (1 + k^2)^(-1/2) for Hminus_half; the weighted difference is then
    measured exactly like the L2-L2 distance.
    """
    _check_same_basis(P, Q)
    w_src = _space_weights(P.basis, source)
    w_tgt = _space_weights(P.basis, target)
    D = (P.matrix - Q.matrix) * (1.0 / w_src)[None, :] * w_tgt[:, None]
    return _gram_weighted_spectral_norm(D, np.asarray(P.basis.gram_l2))


def operator_eigenvalues(op: BoundaryOperator) -> np.ndarray:
    """Generalized eigenvalues of the gram-symmetrized operator, descending."""
    G = np.asarray(op.basis.gram_l2)
    form = G @ op.matrix
    form = 0.5 * (form + form.T)
    return sla.eigh(form, G, eigvals_only=True)[::-1]


@dataclass(frozen=True)
class GapOperator:
    """Interior misfit fields A^(i/2) (grad u - grad v) per basis function.

    columns[j] is the per-element vector field for basis function j;
    gram_interior holds their pairwise L2(Omega) inner products.
    """

    index: int
    side: str  # "neumann" | "dirichlet"
    columns: np.ndarray  # (2K, nt, 2)
    gram_interior: np.ndarray
    basis: BoundaryBasis
    field_ref: str

    def __post_init__(self):
        self.columns.setflags(write=False)
        self.gram_interior.setflags(write=False)


def _matrix_sqrt_psd(tensors: np.ndarray) -> np.ndarray:
    """Principal square root of each symmetric PSD 2x2 matrix."""
    w, v = np.linalg.eigh(tensors)
    if np.any(w < -1e-12):
        raise ValueError("tensor has a negative eigenvalue; square root undefined")
    w = np.sqrt(np.clip(w, 0.0, None))
    return np.einsum("nik,nk,njk->nij", v, w, v)


def assemble_gap(mesh: Mesh, field: ConductivityTensorField,
                 reference_op: BoundaryOperator, index: int,
                 side: str = "neumann") -> GapOperator:
    """Misfit operator between the two interior extensions of each basis datum.

    On the neumann side the basis functions are currents: v solves the
    flux problem, u the voltage problem with datum reference_op(g).  On
    the dirichlet side the roles are swapped.  index 1 applies the
    tensor square root (symmetric fields only); index 2 the tensor.
    """
    if index not in (1, 2):
        raise ValueError("index must be 1 or 2")
    if side not in ("neumann", "dirichlet"):
        raise ValueError("side must be 'neumann' or 'dirichlet'")
    if index == 1 and field.kind == "general":
        raise ValueError("index 1 requires a symmetric conductivity tensor")

    basis = reference_op.basis
    weight = (_matrix_sqrt_psd(field.tensors) if index == 1
              else np.asarray(field.tensors))
    neumann = NeumannSolver(mesh, field)
    dirichlet = DirichletSolver(mesh, field)
    eye = np.eye(basis.size)
    columns = np.empty((basis.size, mesh.num_triangles, 2))
    for j in range(basis.size):
        datum = basis.samples[j]
        mapped = reference_op.boundary_values(eye[j])
        if side == "neumann":
            v = neumann.solve(datum)
            u = dirichlet.solve(mapped)
        else:
            u = dirichlet.solve(datum)
            v = neumann.solve(mapped)
        diff = (nodal_gradient(mesh, u.nodal_values)
                - nodal_gradient(mesh, v.nodal_values))
        columns[j] = np.einsum("eij,ej->ei", weight, diff)
    areas = triangle_areas(mesh)
    flat = columns.reshape(basis.size, -1)
    weighted = (columns * areas[None, :, None]).reshape(basis.size, -1)
    gram_interior = flat @ weighted.T
    gram_interior = 0.5 * (gram_interior + gram_interior.T)
    return GapOperator(index, side, columns, gram_interior, basis, field.ref)


def gap_norm_l2(gap: GapOperator, basis: BoundaryBasis = None) -> float:
    """Operator norm from the L2 boundary space to the interior L2 fields."""
    if basis is None:
        basis = gap.basis
    w = sla.eigh(np.asarray(gap.gram_interior), np.asarray(basis.gram_l2),
                 eigvals_only=True)
    return float(np.sqrt(max(w[-1], 0.0)))


def dump_operator(op: BoundaryOperator, path: str) -> None:
    """CSV dump 'i,j,value' plus the Gram matrix in a '.gram' sidecar."""
    def write(matrix, fname):
        with open(fname, "w", newline="\n") as fh:
            fh.write("i,j,value\n")
            for i in range(matrix.shape[0]):
                for j in range(matrix.shape[1]):
                    fh.write(f"{i},{j},{matrix[i, j]:.17g}\n")

    write(op.matrix, path)
    write(np.asarray(op.basis.gram_l2), path + ".gram")
