"""Laminate sequences, their effective tensors, and a periodic-cell oracle.

A rank-one laminate of two scalar phases has a closed-form effective
tensor: harmonic mean across the layers, arithmetic mean along them.
The cell-problem solver computes the same tensor independently by
solving the two periodic corrector problems on the unit cell, and is
the oracle for every homogenization-limit experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ResolutionError
from .fields import ConductivityTensorField, LaminateSpec, laminate_field
from .mesh import Mesh
from .thresholds import G_SEQUENCE_RESOLUTION_SLACK


@dataclass(frozen=True)
class GSequenceSpec:
    """Laminate family converging to the diagonal target diag(a, b).

    At volume fraction 1/2 the phase pair (b - sqrt(b(b-a)),
    b + sqrt(b(b-a))) has harmonic mean a and arithmetic mean b, so the
    sequence of laminates with normal e1 and increasing period count
    converges to diag(a, b) in the homogenization sense.
    """

    a: float
    b: float
    periods: tuple
    phase_low: float = 0.0
    phase_high: float = 0.0
    fraction: float = 0.5
    direction: np.ndarray = None

    def __post_init__(self):
        if self.direction is None:
            object.__setattr__(self, "direction", np.array([1.0, 0.0]))
        if not (0.0 < self.a <= self.b):
            raise ValueError("target must satisfy 0 < a <= b")
        if self.phase_low == 0.0 and self.phase_high == 0.0:
            root = np.sqrt(self.b * (self.b - self.a))
            object.__setattr__(self, "phase_low", self.b - root)
            object.__setattr__(self, "phase_high", self.b + root)
        hm = 1.0 / (self.fraction / self.phase_low
                    + (1.0 - self.fraction) / self.phase_high)
        am = (self.fraction * self.phase_low
              + (1.0 - self.fraction) * self.phase_high)
        if abs(hm - self.a) > 1e-12 * self.a or abs(am - self.b) > 1e-12 * self.b:
            raise ValueError("phase pair does not reproduce the target means")

    def laminate(self, n: int) -> LaminateSpec:
        return LaminateSpec(self.phase_low, self.phase_high, self.fraction,
                            n, self.direction)

    def target_tensor(self) -> np.ndarray:
        return np.diag([self.a, self.b])


@dataclass(frozen=True)
class EffectiveTensor:
    tensor: np.ndarray
    method: str  # "analytic_laminate" | "cell_problem"

    def __post_init__(self):
        self.tensor.setflags(write=False)


def rank_one_effective(value_low: float, value_high: float, fraction: float,
                       direction) -> np.ndarray:
    """Closed-form effective tensor of a rank-one scalar laminate.

    fraction is the volume fraction of value_low; direction is the
    laminate normal.  In the laminate frame the tensor is
    diag(harmonic mean, arithmetic mean).
    """
    hm = 1.0 / (fraction / value_low + (1.0 - fraction) / value_high)
    am = fraction * value_low + (1.0 - fraction) * value_high
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    R = np.array([[d[0], -d[1]], [d[1], d[0]]])
    return R @ np.diag([hm, am]) @ R.T


def laminate_effective(spec) -> EffectiveTensor:
    """Effective tensor of a laminate family or a single laminate spec."""
    if isinstance(spec, GSequenceSpec):
        t = rank_one_effective(spec.phase_low, spec.phase_high, spec.fraction,
                               spec.direction)
    elif isinstance(spec, LaminateSpec):
        t = rank_one_effective(spec.value_low, spec.value_high,
                               spec.volume_fraction, spec.direction)
    else:
        raise TypeError("expected GSequenceSpec or LaminateSpec")
    return EffectiveTensor(t, "analytic_laminate")


def _periodic_cell_grid(resolution: int):
    """Structured triangulation of the unit cell with periodic vertex identification.

    Returns (triangles, centroids, dof_map, num_dofs): triangles index
    the (resolution+1)^2 grid vertices, dof_map folds the right and top
    edges onto the left and bottom ones.
    """
    n = resolution
    idx = lambda i, j: i * (n + 1) + j
    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    dof_map = np.empty((n + 1) * (n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            dof_map[idx(i, j)] = (i % n) * n + (j % n)
    xs = np.arange(n + 1) / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    vertices = np.column_stack([xs[ii.ravel()], xs[jj.ravel()]])
    centroids = vertices[triangles].mean(axis=1)
    grads = _p1_gradients(vertices, triangles)
    areas = np.full(len(triangles), 0.5 / (n * n))
    return triangles, centroids, dof_map, n * n, grads, areas


def _p1_gradients(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    grads = np.empty((len(triangles), 2, 3))
    for i in range(3):
        opp = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, 0, i] = -opp[:, 1]
        grads[:, 1, i] = opp[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads


def cell_problem_effective(phase, resolution: int = 128) -> EffectiveTensor:
    """Effective tensor of a periodic scalar field by corrector solves.

    phase is a callable sigma(x, y) on the unit cell, sampled at element
    centroids; resolution is the number of grid cells per side.
    """
    if resolution < 4:
        raise ResolutionError("cell resolution must be at least 4")
    triangles, centroids, dof_map, ndof, grads, areas = _periodic_cell_grid(resolution)
    sigma = np.asarray(phase(centroids[:, 0], centroids[:, 1]), dtype=float)
    if sigma.shape != (len(triangles),):
        raise ValueError("phase must return one value per evaluation point")
    if np.any(sigma <= 0):
        raise ValueError("phase values must be positive")

    tdof = dof_map[triangles]
    local = np.einsum("e,e,eci,ecj->eij", areas, sigma, grads, grads)
    rows = np.repeat(tdof, 3, axis=1).ravel()
    cols = np.tile(tdof, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()

    keep = np.arange(1, ndof)
    lu = spla.splu(K[keep][:, keep].tocsc())

    correctors = np.zeros((2, ndof))
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = 1.0
        # RHS: -int sigma e . grad(psi)
        load_local = -np.einsum("e,e,eci,c->ei", areas, sigma, grads, e)
        load = np.zeros(ndof)
        np.add.at(load, tdof.ravel(), load_local.ravel())
        correctors[axis, keep] = lu.solve(load[keep])

    eff = np.empty((2, 2))
    fields = []
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = 1.0
        gw = np.einsum("eci,ei->ec", grads, correctors[axis][tdof])
        fields.append(gw + e[None, :])
    for i in range(2):
        for j in range(2):
            eff[i, j] = np.sum(areas * sigma * np.sum(fields[i] * fields[j], axis=1))
    eff = 0.5 * (eff + eff.T)
    return EffectiveTensor(eff, "cell_problem")


def direction_extent(mesh: Mesh, direction) -> float:
    """Largest element extent along a direction; controls stripe aliasing."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    s = mesh.vertices[mesh.triangles] @ d
    return float((s.max(axis=1) - s.min(axis=1)).max())


def build_g_sequence(mesh: Mesh, spec: GSequenceSpec) -> list[ConductivityTensorField]:
    """One laminate field per period count, finest period guarded by the mesh.

    A period must span at least four elements measured along the
    laminate normal (up to the calibrated slack), otherwise the sampled
    field aliases and the sequence stops converging.
    """
    ext = direction_extent(mesh, spec.direction)
    out = []
    for n in spec.periods:
        if 4.0 * n * ext > G_SEQUENCE_RESOLUTION_SLACK:
            raise ResolutionError(
                f"period count {n} unresolvable: 4*n*extent = "
                f"{4 * n * ext:.3f} exceeds {G_SEQUENCE_RESOLUTION_SLACK}")
        out.append(laminate_field(mesh, spec.laminate(n)))
    return out
