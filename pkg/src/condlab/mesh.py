"""Triangular meshes of the unit disk and unit square.

Meshes are conforming P1 triangulations with an explicitly ordered,
counterclockwise boundary cycle.  The boundary carries an arc-length
parameter normalized to [0, 2*pi): the polar angle for the disk, scaled
perimeter position for the square.  Meshes are immutable after
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError

MAX_DISK_LEVEL = 9


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with an ordered boundary cycle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex indices, counterclockwise.
    boundary_edges : (nb, 2) int array
        Consecutive vertex pairs of the boundary cycle, counterclockwise.
    boundary_params : (nb, 2) float array
        Arc-length parameter interval [s0, s1] of each boundary edge,
        normalized to [0, 2*pi]; the last edge closes at 2*pi.
    domain_tag : str
        Either "disk" or "square".
    h : float
        Maximum triangle diameter.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_params: np.ndarray
    domain_tag: str
    h: float = field(default=0.0)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles,
                    self.boundary_edges, self.boundary_params):
            arr.setflags(write=False)
        if self.h == 0.0:
            object.__setattr__(self, "h", _max_diameter(self.vertices, self.triangles))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def boundary_vertices(self) -> np.ndarray:
        """Boundary vertex indices in cycle order (start of each edge)."""
        return self.boundary_edges[:, 0]

    @property
    def boundary_vertex_params(self) -> np.ndarray:
        """Arc-length parameter of each boundary vertex, cycle order."""
        return self.boundary_params[:, 0]


def _max_diameter(vertices, triangles):
    p = vertices[triangles]
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    return float(np.sqrt((e ** 2).sum(axis=2)).max())


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for CCW orientation)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangle_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.triangles].mean(axis=1)


def min_interior_angle(mesh: Mesh) -> float:
    """Smallest interior angle over all triangles, in degrees."""
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = (a * b).sum(axis=1) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return float(np.min(angles))


def _refine(vertices, triangles, boundary_edges, boundary_params, project):
    """One uniform refinement step: split every triangle into four.

    New boundary midpoints are placed by `project`, which maps a chord
    midpoint to the true boundary (identity for polygonal boundaries).
    """
    vertices = list(map(tuple, vertices))
    midpoint = {}
    boundary_pairs = {tuple(sorted(e)) for e in boundary_edges}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            p = 0.5 * (np.asarray(vertices[i]) + np.asarray(vertices[j]))
            if key in boundary_pairs:
                p = project(p)
            midpoint[key] = len(vertices)
            vertices.append(tuple(p))
        return midpoint[key]

    new_tris = []
    for a, b, c in triangles:
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        new_tris.extend([(a, mab, mca), (b, mbc, mab), (c, mca, mbc),
                         (mab, mbc, mca)])

    new_edges = []
    new_params = []
    for (i, j), (s0, s1) in zip(boundary_edges, boundary_params):
        m = mid(i, j)
        sm = 0.5 * (s0 + s1)
        new_edges.extend([(i, m), (m, j)])
        new_params.extend([(s0, sm), (sm, s1)])

    return (np.array(vertices, dtype=float),
            np.array(new_tris, dtype=np.int64),
            np.array(new_edges, dtype=np.int64),
            np.array(new_params, dtype=float))


def generate_disk_mesh(refinement_level: int) -> Mesh:
    """Mesh of the unit disk from a coarse fan, uniformly refined.

    Level 0 is a fan of 8 triangles about the origin.  Each refinement
    level splits every triangle in four and projects new boundary
    midpoints radially onto the unit circle, so the boundary vertex
    count doubles per level.

    Parameters
    ----------
    refinement_level : int
        Number of uniform refinements, at most ``MAX_DISK_LEVEL``.
    """
    if refinement_level < 0:
        raise ValueError("refinement_level must be nonnegative")
    if refinement_level > MAX_DISK_LEVEL:
        raise CapacityError(
            f"refinement_level {refinement_level} exceeds guard {MAX_DISK_LEVEL}")

    nb0 = 8
    ang = 2.0 * np.pi * np.arange(nb0) / nb0
    vertices = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    triangles = np.array([(0, 1 + k, 1 + (k + 1) % nb0) for k in range(nb0)],
                         dtype=np.int64)
    boundary_edges = np.array([(1 + k, 1 + (k + 1) % nb0) for k in range(nb0)],
                              dtype=np.int64)
    step = 2.0 * np.pi / nb0
    boundary_params = np.column_stack([step * np.arange(nb0),
                                       step * (np.arange(nb0) + 1)])

    def project(p):
        return p / np.linalg.norm(p)

    for _ in range(refinement_level):
        vertices, triangles, boundary_edges, boundary_params = _refine(
            vertices, triangles, boundary_edges, boundary_params, project)

    return Mesh(vertices, triangles, boundary_edges, boundary_params, "disk")


def generate_square_mesh(n: int) -> Mesh:
    """Structured mesh of the unit square with 2*n*n triangles.

    Each grid cell is split along its lower-left to upper-right diagonal,
    so h = sqrt(2)/n.  The boundary parameter runs counterclockwise from
    the origin, scaled so the full perimeter maps to [0, 2*pi].
    """
    if n < 2:
        raise ValueError("n must be at least 2")

    idx = lambda i, j: i * (n + 1) + j
    xs = np.arange(n + 1) / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    vertices = np.column_stack([xs[ii.ravel()], xs[jj.ravel()]])

    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    # Perimeter walk: bottom, right, top, left.
    cycle = ([idx(i, 0) for i in range(n)]
             + [idx(n, j) for j in range(n)]
             + [idx(n - i, n) for i in range(n)]
             + [idx(0, n - j) for j in range(n)])
    boundary_edges = np.array(
        [(cycle[k], cycle[(k + 1) % len(cycle)]) for k in range(len(cycle))],
        dtype=np.int64)
    step = 2.0 * np.pi / len(cycle)
    boundary_params = np.column_stack([step * np.arange(len(cycle)),
                                       step * (np.arange(len(cycle)) + 1)])

    return Mesh(vertices, triangles, boundary_edges, boundary_params, "square")


def refine(mesh: Mesh) -> Mesh:
    """One uniform refinement of an existing mesh."""
    if mesh.domain_tag == "disk":
        project = lambda p: p / np.linalg.norm(p)
    else:
        project = lambda p: p
    vertices, triangles, boundary_edges, boundary_params = _refine(
        mesh.vertices, mesh.triangles, mesh.boundary_edges,
        mesh.boundary_params, project)
    return Mesh(vertices, triangles, boundary_edges, boundary_params,
                mesh.domain_tag)


def boundary_edge_lengths(mesh: Mesh) -> np.ndarray:
    d = mesh.vertices[mesh.boundary_edges[:, 1]] - mesh.vertices[mesh.boundary_edges[:, 0]]
    return np.sqrt((d ** 2).sum(axis=1))


def boundary_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """P1 trace mass matrix on the polygonal boundary.

    Entry (i, j) is the integral over the boundary of the product of the
    hat-function traces at vertices i and j.  Supported on boundary
    vertices only; symmetric positive semidefinite.
    """
    nv = mesh.num_vertices
    le = boundary_edge_lengths(mesh)
    i0 = mesh.boundary_edges[:, 0]
    i1 = mesh.boundary_edges[:, 1]
    rows = np.concatenate([i0, i1, i0, i1])
    cols = np.concatenate([i0, i1, i1, i0])
    vals = np.concatenate([le / 3.0, le / 3.0, le / 6.0, le / 6.0])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nv, nv)).tocsr()


def boundary_integral(mesh: Mesh, values: np.ndarray,
                      mass: sp.spmatrix | None = None) -> float:
    """Integral over the boundary of the P1 trace with the given nodal values."""
    if mass is None:
        mass = boundary_mass_matrix(mesh)
    return float(np.ones(mesh.num_vertices) @ (mass @ values))


def boundary_length(mesh: Mesh) -> float:
    return float(boundary_edge_lengths(mesh).sum())


def boundary_function(mesh: Mesh, f) -> np.ndarray:
    """Sample a function of the boundary parameter at boundary vertices.

    Returns a full-length nodal vector, zero at interior vertices.
    """
    values = np.zeros(mesh.num_vertices)
    values[mesh.boundary_vertices] = f(mesh.boundary_vertex_params)
    return values


def dump_mesh(mesh: Mesh) -> str:
    """Plain-text dump: counts line, vertex lines, triangle lines, boundary lines."""
    lines = [f"{mesh.num_vertices} {mesh.num_triangles} {len(mesh.boundary_edges)}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    for (i, j), (s0, s1) in zip(mesh.boundary_edges, mesh.boundary_params):
        lines.append(f"{i} {j} {s0:.17g} {s1:.17g}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str, domain_tag: str = "disk") -> Mesh:
    """Parse a dump produced by :func:`dump_mesh`. Round-trips bit-exactly."""
    lines = text.strip().split("\n")
    nv, nt, nb = map(int, lines[0].split())
    vertices = np.array([[float(t) for t in line.split()]
                         for line in lines[1:1 + nv]])
    triangles = np.array([[int(t) for t in line.split()]
                          for line in lines[1 + nv:1 + nv + nt]], dtype=np.int64)
    edges = []
    params = []
    for line in lines[1 + nv + nt:1 + nv + nt + nb]:
        t = line.split()
        edges.append((int(t[0]), int(t[1])))
        params.append((float(t[2]), float(t[3])))
    return Mesh(vertices, triangles, np.array(edges, dtype=np.int64),
                np.array(params), domain_tag)
