"""Piecewise-constant conductivity tensor fields.

A field assigns one 2x2 matrix per mesh triangle, with declared
ellipticity metadata: a coercivity bound alpha, an upper bound beta on
the operator norm, and the inverse-coercivity bound beta_tilde.  Scalar
fields, constant anisotropic tensors, two-phase laminates and
checkerboards, and push-forwards under boundary-fixing coordinate
changes are all built here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InversionError, ResolutionError
from .mesh import Mesh, triangle_areas, triangle_centroids

# Fixed probe directions for the quadratic-form membership checks of
# general (possibly nonsymmetric) tensors.
_PROBE_ANGLES = np.pi * np.arange(16) / 16.0
PROBE_DIRECTIONS = np.column_stack([np.cos(_PROBE_ANGLES), np.sin(_PROBE_ANGLES)])


@dataclass(frozen=True)
class ConductivityTensorField:
    """One 2x2 tensor per triangle plus declared ellipticity bounds.

    kind is "scalar" (sigma * identity), "symmetric", or "general".
    """

    tensors: np.ndarray  # (nt, 2, 2)
    alpha: float
    beta: float
    beta_tilde: float
    kind: str

    def __post_init__(self):
        self.tensors.setflags(write=False)

    @property
    def ref(self) -> str:
        """Short content hash identifying the field."""
        digest = hashlib.sha1(self.tensors.tobytes()).hexdigest()[:12]
        return f"{self.kind}-{digest}"

    @property
    def num_elements(self) -> int:
        return self.tensors.shape[0]


@dataclass(frozen=True)
class LaminateSpec:
    """Two-phase layered scalar conductivity.

    Stripes are orthogonal to ``direction`` (the laminate normal); each
    period of width 1/period_count splits into a value_low stripe of
    width volume_fraction/period_count and a value_high stripe of the
    complementary width.
    """

    value_low: float
    value_high: float
    volume_fraction: float
    period_count: int
    direction: np.ndarray = None

    def __post_init__(self):
        if self.direction is None:
            object.__setattr__(self, "direction", np.array([1.0, 0.0]))
        d = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "direction", d / np.linalg.norm(d))
        if not (0.0 < self.value_low <= self.value_high):
            raise ValueError("phase values must satisfy 0 < value_low <= value_high")
        if not (0.0 < self.volume_fraction < 1.0):
            raise ValueError("volume_fraction must lie in (0, 1)")
        if self.period_count < 1:
            raise ValueError("period_count must be positive")


@dataclass(frozen=True)
class DiffeoSpec:
    """Smooth boundary-fixing map of the closed domain onto itself.

    forward_map and jacobian act on (n, 2) point arrays and return
    (n, 2) images and (n, 2, 2) Jacobians respectively.
    """

    forward_map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]


def identity_diffeo() -> DiffeoSpec:
    return DiffeoSpec(
        forward_map=lambda x: np.array(x, dtype=float, copy=True),
        jacobian=lambda x: np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy(),
    )


def radial_twist(strength: float) -> DiffeoSpec:
    """Rotate each radius-r circle by strength*(1-r); fixes the unit circle.

    In polar coordinates the map is (r, t) -> (r, t + strength*(1-r)).
    """

    def forward(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=1)
        w = strength * (1.0 - r)
        c, s = np.cos(w), np.sin(w)
        return np.column_stack([c * x[:, 0] - s * x[:, 1],
                                s * x[:, 0] + c * x[:, 1]])

    def jac(x):
        x = np.asarray(x, dtype=float)
        n = len(x)
        r = np.linalg.norm(x, axis=1)
        w = strength * (1.0 - r)
        c, s = np.cos(w), np.sin(w)
        rot = np.empty((n, 2, 2))
        rot[:, 0, 0], rot[:, 0, 1] = c, -s
        rot[:, 1, 0], rot[:, 1, 1] = s, c
        # d/dx of the rotation angle: grad w = -strength * x / r.
        rsafe = np.where(r > 1e-300, r, 1.0)
        gw = -strength * x / rsafe[:, None]
        drot_x = np.column_stack([-s * x[:, 0] - c * x[:, 1],
                                  c * x[:, 0] - s * x[:, 1]])
        return rot + drot_x[:, :, None] * gw[:, None, :]

    return DiffeoSpec(forward_map=forward, jacobian=jac)


def validate_diffeo(diffeo: DiffeoSpec, samples: int = 33) -> None:
    """Check positive Jacobian on a grid and boundary fixity to 1e-12."""
    g = np.linspace(-1.0, 1.0, samples)
    xx, yy = np.meshgrid(g, g)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    pts = pts[np.linalg.norm(pts, axis=1) < 0.999]
    J = diffeo.jacobian(pts)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if not np.all(det > 0):
        raise ValueError("Jacobian determinant must be positive on the domain")
    t = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    ring = np.column_stack([np.cos(t), np.sin(t)])
    if np.abs(diffeo.forward_map(ring) - ring).max() > 1e-12:
        raise ValueError("map must fix the boundary to 1e-12")


def constant_tensor(mesh: Mesh, a: float, b: float) -> ConductivityTensorField:
    """Constant diagonal tensor diag(a, b) on every element."""
    if a <= 0 or b <= 0:
        raise ValueError("diagonal entries must be positive")
    tensors = np.zeros((mesh.num_triangles, 2, 2))
    tensors[:, 0, 0] = a
    tensors[:, 1, 1] = b
    kind = "scalar" if a == b else "symmetric"
    alpha, beta = min(a, b), max(a, b)
    return ConductivityTensorField(tensors, alpha, beta, beta, kind)


def scalar_field(mesh: Mesh, sigma, alpha: float = None,
                 beta: float = None) -> ConductivityTensorField:
    """Scalar field sigma(x) * identity, sigma per element or callable on centroids."""
    if callable(sigma):
        c = triangle_centroids(mesh)
        values = np.asarray(sigma(c[:, 0], c[:, 1]), dtype=float)
    else:
        values = np.broadcast_to(np.asarray(sigma, dtype=float),
                                 (mesh.num_triangles,)).copy()
    if np.any(values <= 0):
        raise ValueError("scalar conductivity must be positive")
    tensors = np.zeros((mesh.num_triangles, 2, 2))
    tensors[:, 0, 0] = values
    tensors[:, 1, 1] = values
    alpha = float(values.min()) if alpha is None else alpha
    beta = float(values.max()) if beta is None else beta
    return ConductivityTensorField(tensors, alpha, beta, beta, "scalar")


def laminate_phase(points: np.ndarray, spec: LaminateSpec) -> np.ndarray:
    """Scalar laminate value at each point, assigned by stripe position."""
    s = points @ spec.direction
    local = np.mod(s * spec.period_count, 1.0)
    return np.where(local < spec.volume_fraction, spec.value_low, spec.value_high)


def laminate_field(mesh: Mesh, spec: LaminateSpec) -> ConductivityTensorField:
    """Two-phase laminate sampled at element centroids.

    Refuses configurations whose period is finer than two element
    diameters, which the mesh cannot resolve.
    """
    if 1.0 / spec.period_count < 2.0 * mesh.h:
        raise ResolutionError(
            f"laminate period 1/{spec.period_count} finer than 2h = {2 * mesh.h:.4g}")
    values = laminate_phase(triangle_centroids(mesh), spec)
    return scalar_field(mesh, values, alpha=spec.value_low, beta=spec.value_high)


def checkerboard_field(mesh: Mesh, value_a: float, value_b: float,
                       cells: int = 2) -> ConductivityTensorField:
    """Equal-fraction checkerboard of two scalar phases on the unit square."""
    c = triangle_centroids(mesh)
    parity = (np.floor(c[:, 0] * cells) + np.floor(c[:, 1] * cells)) % 2
    values = np.where(parity == 0, value_a, value_b)
    return scalar_field(mesh, values)


def check_scalar_approximation(eigenvalues, alpha: float, beta: float,
                               eps: float) -> bool:
    """Feasibility of approximating a symmetric tensor by a two-value scalar laminate.

    With phase values eps and 1/eps and mixing parameter 1/3, evaluates
    the planar (N = 2) sufficient-condition rows relating the tensor
    eigenvalues to the arithmetic and harmonic phase mixtures.  Returns
    True iff every inequality holds.
    """
    lam_min, lam_max = eigenvalues
    if not (0.0 < alpha <= lam_min <= lam_max <= beta):
        raise ValueError("need 0 < alpha <= lam_min <= lam_max <= beta")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")

    n = 2
    theta = 1.0 / 3.0
    a1, b1 = eps, 1.0 / eps
    lam_plus = theta * a1 + (1.0 - theta) * b1
    lam_minus = 1.0 / (theta / a1 + (1.0 - theta) / b1)
    lams = (lam_min, lam_max)

    # All denominators below must be positive for the chains to make sense.
    if min(alpha - a1, lam_minus - a1, lam_plus - a1, b1 - beta,
           b1 - lam_plus, b1 - lam_minus) <= 0:
        return False
    if min(lam - a1 for lam in lams) <= 0 or min(b1 - lam for lam in lams) <= 0:
        return False

    row1 = lam_minus <= alpha and beta <= lam_plus
    s_low = sum(1.0 / (lam - a1) for lam in lams)
    row2 = (s_low <= n / (alpha - a1)
            and n / (alpha - a1) <= 1.0 / (lam_minus - a1)
            and 1.0 / (lam_minus - a1)
            <= 1.0 / (lam_minus - a1) + (n - 1) / (lam_plus - a1))
    s_high = sum(1.0 / (b1 - lam) for lam in lams)
    row3 = (s_high <= n / (b1 - beta)
            and n / (b1 - beta) <= (n - 1) / (b1 - lam_plus)
            and (n - 1) / (b1 - lam_plus)
            <= 1.0 / (b1 - lam_minus) + (n - 1) / (b1 - lam_plus))
    return bool(row1 and row2 and row3)


def _invert_map(diffeo: DiffeoSpec, targets: np.ndarray,
                max_iter: int = 50) -> np.ndarray:
    """Solve forward_map(x) = y for each row y by damped Newton iteration."""
    x = np.array(targets, dtype=float, copy=True)
    res = diffeo.forward_map(x) - targets
    norm = np.linalg.norm(res, axis=1)
    for _ in range(max_iter):
        active = norm > 1e-13
        if not active.any():
            return x
        J = diffeo.jacobian(x[active])
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0], inv[:, 0, 1] = J[:, 1, 1], -J[:, 0, 1]
        inv[:, 1, 0], inv[:, 1, 1] = -J[:, 1, 0], J[:, 0, 0]
        inv /= det[:, None, None]
        step = np.einsum("nij,nj->ni", inv, res[active])
        # Damped update: halve until the residual does not grow.
        damp = np.ones(len(step))
        for _ in range(20):
            trial = x[active] - damp[:, None] * step
            new_res = diffeo.forward_map(trial) - targets[active]
            new_norm = np.linalg.norm(new_res, axis=1)
            bad = new_norm > norm[active]
            if not bad.any():
                break
            damp[bad] *= 0.5
        x[active] = trial
        res[active] = new_res
        norm[active] = new_norm
    if norm.max() > 1e-10:
        raise InversionError(
            f"Newton inversion stalled at residual {norm.max():.3g}")
    return x


def _locate_elements(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Index of the triangle containing each point (nearest centroid as fallback)."""
    from matplotlib.tri import Triangulation

    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1],
                        triangles=mesh.triangles)
    idx = tri.get_trifinder()(points[:, 0], points[:, 1])
    missing = idx < 0
    if missing.any():
        from scipy.spatial import cKDTree

        tree = cKDTree(triangle_centroids(mesh))
        _, nearest = tree.query(points[missing])
        idx = np.array(idx)
        idx[missing] = nearest
    return idx


def push_forward(field: ConductivityTensorField, diffeo: DiffeoSpec,
                 target_mesh: Mesh, source_mesh: Mesh = None) -> ConductivityTensorField:
    """Transform a field by a boundary-fixing coordinate change.

    The new tensor at a target centroid y is J A Jt / |det J| evaluated
    at x with forward_map(x) = y, where J is the Jacobian at x.  The
    source element for A(x) is located on source_mesh (target_mesh when
    omitted).
    """
    if source_mesh is None:
        source_mesh = target_mesh
    if field.num_elements != source_mesh.num_triangles:
        raise ValueError("field does not match source_mesh")

    y = triangle_centroids(target_mesh)
    x = _invert_map(diffeo, y)
    elements = _locate_elements(source_mesh, x)
    A = field.tensors[elements]
    J = diffeo.jacobian(x)
    det = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
    out = np.einsum("nij,njk,nlk->nil", J, A, J) / det[:, None, None]
    kind = "symmetric" if field.kind in ("scalar", "symmetric") else "general"
    return ConductivityTensorField(out, field.alpha, field.beta,
                                   field.beta_tilde, kind)


def spectral_norms(matrices: np.ndarray) -> np.ndarray:
    """Operator (spectral) norm of each 2x2 matrix in a stack."""
    M = np.asarray(matrices)
    G = np.einsum("nki,nkj->nij", M, M)
    half_tr = 0.5 * (G[:, 0, 0] + G[:, 1, 1])
    half_diff = 0.5 * (G[:, 0, 0] - G[:, 1, 1])
    root = np.sqrt(np.maximum(half_diff ** 2 + G[:, 0, 1] ** 2, 0.0))
    return np.sqrt(np.maximum(half_tr + root, 0.0))


def field_distance(f1: ConductivityTensorField, f2: ConductivityTensorField,
                   mesh: Mesh, norm: str = "l1") -> float:
    """L1 or Linf distance between fields, elementwise in the operator norm."""
    if f1.num_elements != f2.num_elements:
        raise ValueError("field sizes differ")
    norms = spectral_norms(f1.tensors - f2.tensors)
    if norm == "l1":
        return float(triangle_areas(mesh) @ norms)
    if norm == "linf":
        return float(norms.max())
    raise ValueError(f"unknown norm {norm!r}")


def check_membership(field: ConductivityTensorField) -> bool:
    """Does every element tensor satisfy the declared class constraints?

    Scalar: sigma * identity with alpha <= sigma <= beta.  Symmetric:
    symmetric with eigenvalues in [alpha, beta].  General: the two
    quadratic-form bounds (direct with alpha, inverse with beta_tilde)
    on the fixed 16-direction probe set.
    """
    A = field.tensors
    tol = 1e-12 * max(field.beta, 1.0)
    if field.kind == "scalar":
        is_diag = (np.abs(A[:, 0, 1]) <= tol) & (np.abs(A[:, 1, 0]) <= tol)
        equal = np.abs(A[:, 0, 0] - A[:, 1, 1]) <= tol
        sigma = A[:, 0, 0]
        inside = (sigma >= field.alpha - tol) & (sigma <= field.beta + tol)
        return bool(np.all(is_diag & equal & inside))
    if field.kind == "symmetric":
        sym = np.abs(A[:, 0, 1] - A[:, 1, 0]) <= tol
        eigs = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, 1, 2)))
        inside = (eigs[:, 0] >= field.alpha - tol) & (eigs[:, 1] <= field.beta + tol)
        return bool(np.all(sym & inside))
    if field.kind == "general":
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
        if np.any(np.abs(det) < 1e-300):
            return False
        Ainv = np.empty_like(A)
        Ainv[:, 0, 0], Ainv[:, 0, 1] = A[:, 1, 1], -A[:, 0, 1]
        Ainv[:, 1, 0], Ainv[:, 1, 1] = -A[:, 1, 0], A[:, 0, 0]
        Ainv /= det[:, None, None]
        for xi in PROBE_DIRECTIONS:
            direct = np.einsum("i,nij,j->n", xi, A, xi)
            inverse = np.einsum("i,nij,j->n", xi, Ainv, xi)
            if np.any(direct < field.alpha - tol):
                return False
            if np.any(inverse < 1.0 / field.beta_tilde - tol):
                return False
        return True
    raise ValueError(f"unknown kind {field.kind!r}")


def project_to_class(field: ConductivityTensorField) -> ConductivityTensorField:
    """Project each element tensor onto the declared class.

    Scalar matrices are replaced by the clipped isotropic part; symmetric
    (and, conservatively, general) matrices by the symmetric part with
    eigenvalues clipped to [alpha, beta].  Idempotent, and the result
    passes :func:`check_membership`.
    """
    A = field.tensors
    if field.kind == "scalar":
        sigma = np.clip(0.5 * (A[:, 0, 0] + A[:, 1, 1]), field.alpha, field.beta)
        out = np.zeros_like(A)
        out[:, 0, 0] = sigma
        out[:, 1, 1] = sigma
    else:
        sym = 0.5 * (A + np.swapaxes(A, 1, 2))
        w, v = np.linalg.eigh(sym)
        hi = field.beta if field.kind == "symmetric" else min(field.beta,
                                                              field.beta_tilde)
        w = np.clip(w, field.alpha, hi)
        out = np.einsum("nik,nk,njk->nij", v, w, v)
    return ConductivityTensorField(out, field.alpha, field.beta,
                                   field.beta_tilde, field.kind)


def dump_field(field: ConductivityTensorField) -> str:
    """One line per element: 'a11 a12 a21 a22' with 17 significant digits."""
    rows = field.tensors.reshape(-1, 4)
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows) + "\n"
