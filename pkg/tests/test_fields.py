import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab.errors import ResolutionError
from condlab.fields import (ConductivityTensorField, LaminateSpec,
                            check_membership, check_scalar_approximation,
                            constant_tensor, dump_field, field_distance,
                            identity_diffeo, laminate_field, project_to_class,
                            push_forward, radial_twist, scalar_field,
                            spectral_norms, validate_diffeo)
from condlab.mesh import triangle_areas


def test_constant_tensor_basic(disk3):
    f = constant_tensor(disk3, 1.0, 2.0)
    assert f.kind == "symmetric"
    assert (f.alpha, f.beta) == (1.0, 2.0)
    assert np.all(f.tensors[:, 0, 0] == 1.0)
    assert np.all(f.tensors[:, 1, 1] == 2.0)
    assert np.all(f.tensors[:, 0, 1] == 0.0)


def test_constant_tensor_isotropic_is_scalar(disk3):
    f = constant_tensor(disk3, 1.7, 1.7)
    assert f.kind == "scalar"
    assert check_membership(f)


def test_constant_tensor_swap_symmetry(disk3):
    f12 = constant_tensor(disk3, 1.0, 2.0)
    f21 = constant_tensor(disk3, 2.0, 1.0)
    assert (f12.alpha, f12.beta) == (f21.alpha, f21.beta)
    assert np.all(f12.tensors[:, 0, 0] == f21.tensors[:, 1, 1])


def test_constant_tensor_rejects_nonpositive(disk3):
    with pytest.raises(ValueError):
        constant_tensor(disk3, -1.0, 2.0)
    with pytest.raises(ValueError):
        constant_tensor(disk3, 1.0, 0.0)


def test_laminate_two_values(disk4):
    spec = LaminateSpec(2 - np.sqrt(2), 2 + np.sqrt(2), 0.5, 2)
    f = laminate_field(disk4, spec)
    assert f.kind == "scalar"
    values = np.unique(f.tensors[:, 0, 0])
    assert len(values) == 2
    assert values == pytest.approx([2 - np.sqrt(2), 2 + np.sqrt(2)])


def test_laminate_degenerate_equal_phases(disk4):
    spec = LaminateSpec(1.3, 1.3, 0.5, 3)
    f = laminate_field(disk4, spec)
    assert np.unique(f.tensors[:, 0, 0]) == pytest.approx([1.3])


def test_laminate_volume_fraction_stable(disk4):
    areas = triangle_areas(disk4)
    fracs = []
    for n in (2, 4):
        f = laminate_field(disk4, LaminateSpec(0.5, 3.0, 0.5, n))
        high = f.tensors[:, 0, 0] > 1.0
        fracs.append(areas[high].sum() / areas.sum())
    assert abs(fracs[0] - fracs[1]) <= disk4.h ** 2 * 50  # one element area


def test_laminate_resolution_guard(disk3):
    with pytest.raises(ResolutionError):
        laminate_field(disk3, LaminateSpec(1.0, 2.0, 0.5, 64))


def test_scalar_approximation_examples():
    assert check_scalar_approximation((1.0, 2.0), 1.0, 2.0, 0.01)
    assert not check_scalar_approximation((1.0, 2.0), 1.0, 2.0, 0.99)


def test_scalar_approximation_isotropic_monotone():
    # isotropic tensor: feasible for all sufficiently small eps
    results = [check_scalar_approximation((1.5, 1.5), 1.5, 1.5, eps)
               for eps in (0.001, 0.01, 0.1, 0.5, 0.9)]
    assert results[0] and results[1]
    # once it flips to infeasible it stays infeasible
    first_false = results.index(False) if False in results else len(results)
    assert all(not r for r in results[first_false:])


def test_scalar_approximation_validates_input():
    with pytest.raises(ValueError):
        check_scalar_approximation((2.0, 1.0), 1.0, 2.0, 0.1)
    with pytest.raises(ValueError):
        check_scalar_approximation((1.0, 2.0), 1.0, 2.0, 1.5)


def test_push_forward_identity(disk4):
    f = constant_tensor(disk4, 1.0, 2.0)
    out = push_forward(f, identity_diffeo(), disk4)
    assert np.abs(out.tensors - f.tensors).max() <= 1e-14


def test_push_forward_determinant_invariance(disk4):
    f = constant_tensor(disk4, 1.0, 2.0)
    out = push_forward(f, radial_twist(0.3), disk4)
    det = (out.tensors[:, 0, 0] * out.tensors[:, 1, 1]
           - out.tensors[:, 0, 1] * out.tensors[:, 1, 0])
    assert np.abs(det - 2.0).max() <= 1e-8


def test_push_forward_preserves_symmetry_kind(disk4):
    f = constant_tensor(disk4, 1.0, 2.0)
    out = push_forward(f, radial_twist(0.3), disk4)
    assert out.kind == "symmetric"
    assert np.abs(out.tensors - np.swapaxes(out.tensors, 1, 2)).max() <= 1e-12


def test_scalar_push_forward_never_reaches_anisotropic_target(disk4):
    # no boundary-fixing twist maps sqrt(2)*I onto diag(1, 2)
    target = np.diag([1.0, 2.0])
    f = scalar_field(disk4, np.sqrt(2.0))
    for s in (0.1, 0.3, 0.6, 1.0):
        out = push_forward(f, radial_twist(s), disk4)
        fro = np.sqrt(((out.tensors - target) ** 2).sum(axis=(1, 2)))
        assert fro.min() > 0.02


def test_validate_diffeo_rejects_boundary_motion():
    bad = identity_diffeo()
    shifted = lambda x: np.asarray(x) + np.array([0.01, 0.0])
    from condlab.fields import DiffeoSpec

    with pytest.raises(ValueError):
        validate_diffeo(DiffeoSpec(shifted, bad.jacobian))


def test_push_forward_newton_failure(disk3):
    # wrong-sign jacobian turns every Newton step uphill, so the
    # inversion stalls and reports failure
    from condlab.errors import InversionError
    from condlab.fields import DiffeoSpec

    tw = radial_twist(0.5)
    broken = DiffeoSpec(
        tw.forward_map,
        lambda x: np.broadcast_to(-np.eye(2), (len(x), 2, 2)).copy())
    f = constant_tensor(disk3, 1.0, 1.0)
    with pytest.raises(InversionError):
        push_forward(f, broken, disk3)


def test_twist_jacobian_consistency():
    tw = radial_twist(0.4)
    rng = np.random.default_rng(3)
    x = rng.uniform(-0.6, 0.6, size=(50, 2))
    J = tw.jacobian(x)
    eps = 1e-6
    for axis in range(2):
        dx = np.zeros(2)
        dx[axis] = eps
        fd = (tw.forward_map(x + dx) - tw.forward_map(x - dx)) / (2 * eps)
        assert np.abs(J[:, :, axis] - fd).max() < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=4, max_size=4))
def test_projection_idempotent_symmetric(entries):
    tensors = np.array(entries).reshape(1, 2, 2)
    f = ConductivityTensorField(tensors, 0.5, 2.0, 2.0, "symmetric")
    p1 = project_to_class(f)
    assert check_membership(p1)
    p2 = project_to_class(p1)
    assert np.abs(p2.tensors - p1.tensors).max() <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_projection_idempotent_scalar(a, d):
    tensors = np.array([[[a, 0.1], [-0.3, d]]])
    f = ConductivityTensorField(tensors, 0.5, 2.0, 2.0, "scalar")
    p1 = project_to_class(f)
    assert check_membership(p1)
    p2 = project_to_class(p1)
    assert np.abs(p2.tensors - p1.tensors).max() == 0.0


def test_membership_general_probe(disk3):
    # rotation-like nonsymmetric tensor satisfying both quadratic bounds
    A = np.array([[1.5, 0.4], [-0.4, 1.5]])
    tensors = np.broadcast_to(A, (disk3.num_triangles, 2, 2)).copy()
    f = ConductivityTensorField(tensors, 1.0, 2.0, 2.0, "general")
    assert check_membership(f)
    bad = ConductivityTensorField(tensors, 1.6, 2.0, 2.0, "general")
    assert not check_membership(bad)


def test_field_distance_triangle_inequality(disk3, rng):
    def random_field():
        base = rng.uniform(0.5, 2.0, size=(disk3.num_triangles, 2, 2))
        sym = 0.5 * (base + np.swapaxes(base, 1, 2))
        return ConductivityTensorField(sym + 2.0 * np.eye(2), 0.5, 5.0, 5.0,
                                       "symmetric")

    for _ in range(10):
        f1, f2, f3 = random_field(), random_field(), random_field()
        d13 = field_distance(f1, f3, disk3)
        d12 = field_distance(f1, f2, disk3)
        d23 = field_distance(f2, f3, disk3)
        assert d13 <= d12 + d23 + 1e-12


def test_spectral_norm_closed_form():
    M = np.array([[[3.0, 1.0], [0.0, 2.0]]])
    expected = np.linalg.norm(M[0], 2)
    assert spectral_norms(M)[0] == pytest.approx(expected)


def test_dump_field_format(disk3):
    f = constant_tensor(disk3, 1.0, 2.0)
    text = dump_field(f)
    lines = text.strip().split("\n")
    assert len(lines) == disk3.num_triangles
    assert lines[0].split() == ["1", "0", "0", "2"]
