"""Complete electrode model: coupled solves and the resistance matrix.

Electrodes are boundary arcs with surface impedances.  The coupled
bilinear form adds to the conduction stiffness a contact term
sum_l (1/z_l) int_{e_l} (u - U_l)(w - W_l) coupling the interior trace
to one constant potential per electrode.  Electrode integrals are
assembled edge by edge; edges partially covered by an arc are split at
the arc endpoint so electrode lengths are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ResolutionError, SolverError
from .fem import assemble_stiffness
from .fields import ConductivityTensorField
from .mesh import Mesh, boundary_edge_lengths
from .operators import BoundaryBasis, neumann_to_dirichlet, op_distance_l2l2


@dataclass(frozen=True)
class ElectrodeConfig:
    """Disjoint electrode arcs with per-electrode surface impedances."""

    arcs: np.ndarray        # (L, 2) parameter intervals in [0, 2*pi)
    impedances: np.ndarray  # (L,)
    z_low: float = 0.0
    z_high: float = 0.0

    def __post_init__(self):
        arcs = np.atleast_2d(np.asarray(self.arcs, dtype=float))
        z = np.atleast_1d(np.asarray(self.impedances, dtype=float))
        if len(arcs) != len(z):
            raise ValueError("one impedance per electrode required")
        if len(arcs) < 2:
            raise ValueError("at least two electrodes required")
        if np.any(z <= 0):
            raise ValueError("impedances must be positive")
        widths = arcs[:, 1] - arcs[:, 0]
        if np.any(widths <= 0):
            raise ValueError("arcs must have positive width")
        if np.any(arcs[:, 0] < 0) or np.any(arcs[:, 1] > 2 * np.pi):
            raise ValueError("arcs must lie within [0, 2*pi]")
        # Pairwise-disjoint closures, checked on the circle.
        order = np.argsort(arcs[:, 0])
        s = arcs[order]
        for i in range(len(s)):
            nxt = s[(i + 1) % len(s), 0] + (2 * np.pi if i + 1 == len(s) else 0.0)
            if s[i, 1] >= nxt:
                raise ValueError("electrode arc closures overlap")
        arcs.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "impedances", z)
        if self.z_low == 0.0:
            object.__setattr__(self, "z_low", float(z.min()))
        if self.z_high == 0.0:
            object.__setattr__(self, "z_high", float(z.max()))

    @property
    def count(self) -> int:
        return len(self.impedances)


def equispaced_electrodes(L: int, coverage: float = 0.5,
                          impedance=1.0) -> ElectrodeConfig:
    """L identical arcs evenly spaced around the boundary.

    coverage is the covered fraction of the boundary; equal arc lengths
    make the mapped resistance matrix exactly symmetric under the
    length-weighted voltage convention.
    """
    if not (0.0 < coverage < 1.0):
        raise ValueError("coverage must lie in (0, 1)")
    width = 2.0 * np.pi * coverage / L
    starts = 2.0 * np.pi * np.arange(L) / L
    arcs = np.column_stack([starts, starts + width])
    z = np.broadcast_to(np.asarray(impedance, dtype=float), (L,)).copy()
    return ElectrodeConfig(arcs, z)


@dataclass(frozen=True)
class CemSolution:
    """Interior potential, electrode potentials, and both boundary patterns.

    voltage_pattern holds V_l = |e_l| * U_l - z_l * I_l, normalized so
    the components sum to zero.
    """

    interior: np.ndarray
    electrode_potentials: np.ndarray
    current_pattern: np.ndarray
    voltage_pattern: np.ndarray

    def __post_init__(self):
        for arr in (self.interior, self.electrode_potentials,
                    self.current_pattern, self.voltage_pattern):
            arr.setflags(write=False)


@dataclass(frozen=True)
class ResistanceMatrix:
    """L x L map from zero-sum current patterns to zero-sum voltage patterns."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)

    def apply(self, current_pattern: np.ndarray) -> np.ndarray:
        return self.entries @ current_pattern

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def _electrode_edge_pieces(mesh: Mesh, arcs: np.ndarray):
    """Per electrode: list of (edge index, local sub-interval [t0, t1]).

    The local coordinate t runs linearly along the edge parameter
    interval; partially covered edges are clipped at the arc endpoints.
    """
    params = mesh.boundary_params
    pieces = [[] for _ in arcs]
    for eidx, (s0, s1) in enumerate(params):
        for l, (a, b) in enumerate(arcs):
            lo, hi = max(s0, a), min(s1, b)
            if hi > lo + 1e-15:
                t0 = (lo - s0) / (s1 - s0)
                t1 = (hi - s0) / (s1 - s0)
                pieces[l].append((eidx, t0, t1))
    return pieces


def _piece_quadrature(t0: float, t1: float):
    """Exact integrals of hat-function products on an edge sub-interval.

    Returns (m, w) with m the 2x2 matrix of int psi_i psi_j dt and w the
    pair int psi_i dt over [t0, t1], for psi_0 = 1 - t, psi_1 = t.
    """
    def ip(p, q):  # int t^p (1-t)^q over [t0, t1] for p+q <= 2
        F = {
            (0, 0): lambda t: t,
            (1, 0): lambda t: t ** 2 / 2,
            (0, 1): lambda t: t - t ** 2 / 2,
            (2, 0): lambda t: t ** 3 / 3,
            (0, 2): lambda t: t - t ** 2 + t ** 3 / 3,
            (1, 1): lambda t: t ** 2 / 2 - t ** 3 / 3,
        }[(p, q)]
        return F(t1) - F(t0)

    m = np.array([[ip(0, 2), ip(1, 1)], [ip(1, 1), ip(2, 0)]])
    w = np.array([ip(0, 1), ip(1, 0)])
    return m, w


class CemSystem:
    """Assembled and factorized electrode system for one conductivity field."""

    def __init__(self, mesh: Mesh, field: ConductivityTensorField,
                 electrodes: ElectrodeConfig):
        self.mesh = mesh
        self.field = field
        self.electrodes = electrodes
        nv = mesh.num_vertices
        L = electrodes.count
        edge_len = boundary_edge_lengths(mesh)
        pieces = _electrode_edge_pieces(mesh, electrodes.arcs)

        counts = []
        for l in range(L):
            inside = 0
            a, b = electrodes.arcs[l]
            theta = mesh.boundary_vertex_params
            inside = int(np.count_nonzero((theta > a) & (theta < b)))
            counts.append(inside)
        if min(counts) < 2:
            raise ResolutionError(
                f"an electrode arc covers only {min(counts)} boundary "
                "vertices; refine the mesh or widen the arc")

        K = assemble_stiffness(mesh, field)
        lengths = np.zeros(L)
        moments = np.zeros((L, nv))
        contact = sp.lil_matrix((nv, nv))
        for l, plist in enumerate(pieces):
            z = electrodes.impedances[l]
            for eidx, t0, t1 in plist:
                le = edge_len[eidx]
                i, j = mesh.boundary_edges[eidx]
                m, w = _piece_quadrature(t0, t1)
                lengths[l] += le * (t1 - t0)
                moments[l, i] += le * w[0]
                moments[l, j] += le * w[1]
                contact[i, i] += le * m[0, 0] / z
                contact[i, j] += le * m[0, 1] / z
                contact[j, i] += le * m[1, 0] / z
                contact[j, j] += le * m[1, 1] / z
        self.lengths = lengths
        self.moments = moments

        zinv = 1.0 / electrodes.impedances
        top = K + contact.tocsr()
        coupling = sp.csr_matrix(-(moments * zinv[:, None]).T)
        diag = sp.diags(lengths * zinv)
        system = sp.bmat([[top, coupling], [coupling.T, diag]], format="csr")

        # Ground the last electrode potential to remove the constant nullspace.
        self._ground = nv + L - 1
        keep = np.arange(nv + L - 1)
        self._keep = keep
        reduced = system[keep][:, keep].tocsc()
        try:
            self._lu = spla.splu(reduced)
        except RuntimeError as exc:  # pragma: no cover
            raise SolverError(f"electrode system factorization failed: {exc}") from exc
        self._reduced = reduced
        self._size = nv + L

    def solve(self, current_pattern) -> CemSolution:
        """Solve for one zero-sum current pattern."""
        I = np.asarray(current_pattern, dtype=float)
        L = self.electrodes.count
        nv = self.mesh.num_vertices
        if I.shape != (L,):
            raise ValueError("current pattern length does not match electrodes")
        total = float(I.sum())
        if abs(total) > 1e-12 * max(float(np.linalg.norm(I)), 1e-300):
            raise ValueError(
                f"current pattern must sum to zero (defect {total:.3g})")
        rhs = np.zeros(self._size)
        rhs[nv:] = I
        sol = np.zeros(self._size)
        sol[self._keep] = self._lu.solve(rhs[self._keep])
        scale = max(float(np.linalg.norm(rhs[self._keep])), 1e-300)
        res = float(np.linalg.norm(self._reduced @ sol[self._keep]
                                   - rhs[self._keep])) / scale
        if res > 1e-9:
            raise SolverError(f"electrode solve residual {res:.3g}")
        u = sol[:nv]
        U = sol[nv:]
        # Shift (u, U) jointly so the voltage pattern sums to zero.
        z = self.electrodes.impedances
        c = (float(z @ I) - float(self.lengths @ U)) / float(self.lengths.sum())
        u = u + c
        U = U + c
        V = self.lengths * U - z * I
        return CemSolution(u, U, I, V)


def solve_cem(mesh: Mesh, field: ConductivityTensorField,
              electrodes: ElectrodeConfig, current_pattern) -> CemSolution:
    return CemSystem(mesh, field, electrodes).solve(current_pattern)


def resistance_matrix(mesh: Mesh, field: ConductivityTensorField,
                      electrodes: ElectrodeConfig) -> ResistanceMatrix:
    """Assemble the current-to-voltage matrix column by column.

    The L-1 basis patterns e_l - e_L fix the action on the zero-sum
    subspace; the matrix is completed by linearity with R applied to the
    all-ones vector equal to zero.
    """
    system = CemSystem(mesh, field, electrodes)
    L = electrodes.count
    T = np.zeros((L, L - 1))
    for l in range(L - 1):
        I = np.zeros(L)
        I[l], I[L - 1] = 1.0, -1.0
        T[:, l] = system.solve(I).voltage_pattern
    last_col = -T.sum(axis=1) / L
    entries = np.column_stack([T + last_col[:, None], last_col])
    return ResistanceMatrix(entries)


def dump_resistance(R: ResistanceMatrix, path: str) -> None:
    """CSV dump 'l,m,value' of the resistance matrix."""
    E = np.asarray(R.entries)
    with open(path, "w", newline="\n") as fh:
        fh.write("l,m,value\n")
        for l in range(E.shape[0]):
            for m in range(E.shape[1]):
                fh.write(f"{l},{m},{E[l, m]:.17g}\n")


def cem_stability_probe(mesh: Mesh, field1: ConductivityTensorField,
                        field2: ConductivityTensorField,
                        electrodes: ElectrodeConfig,
                        basis: BoundaryBasis) -> tuple[float, float]:
    """Pair (resistance-matrix distance, boundary-operator distance).

    The experiment layer asserts that the first is controlled by the
    second over a perturbation family.
    """
    R1 = resistance_matrix(mesh, field1, electrodes)
    R2 = resistance_matrix(mesh, field2, electrodes)
    dR = float(np.linalg.norm(R1.entries - R2.entries, 2))
    nd1 = neumann_to_dirichlet(mesh, field1, basis)
    nd2 = neumann_to_dirichlet(mesh, field2, basis)
    return dR, op_distance_l2l2(nd1, nd2)
