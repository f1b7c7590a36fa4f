import numpy as np
import pytest

from condlab.errors import CapacityError
from condlab.mesh import (boundary_length, boundary_mass_matrix, dump_mesh,
                          generate_disk_mesh, generate_square_mesh, load_mesh,
                          min_interior_angle, refine, triangle_areas)


def test_disk_level0_counts():
    m = generate_disk_mesh(0)
    assert len(m.boundary_edges) >= 8
    assert np.all(triangle_areas(m) > 0)


@pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
def test_disk_boundary_count_doubles(level):
    m0 = generate_disk_mesh(level)
    m1 = generate_disk_mesh(level + 1)
    assert len(m1.boundary_edges) == 2 * len(m0.boundary_edges)


def test_disk_h_halving_ratio():
    h2 = generate_disk_mesh(2).h
    h3 = generate_disk_mesh(3).h
    assert 0.45 <= h3 / h2 <= 0.60


def test_disk_refinement_guard():
    with pytest.raises(CapacityError):
        generate_disk_mesh(10)
    with pytest.raises(ValueError):
        generate_disk_mesh(-1)


def test_disk_boundary_vertices_on_circle(disk4):
    r = np.linalg.norm(disk4.vertices[disk4.boundary_vertices], axis=1)
    assert np.abs(r - 1.0).max() <= 1e-12


def test_positive_areas_all_levels():
    for level in range(5):
        assert np.all(triangle_areas(generate_disk_mesh(level)) > 0)


def test_boundary_cycle_closed_and_ccw(disk3):
    edges = disk3.boundary_edges
    # consecutive edges chain into a single closed cycle
    assert np.all(edges[1:, 0] == edges[:-1, 1])
    assert edges[0, 0] == edges[-1, 1]
    params = disk3.boundary_params
    assert np.all(params[:, 1] > params[:, 0])
    assert params[0, 0] == 0.0
    assert params[-1, 1] == pytest.approx(2 * np.pi)


def test_no_hanging_nodes(disk3):
    from collections import Counter

    count = Counter()
    for tri in disk3.triangles:
        for i in range(3):
            e = tuple(sorted((tri[i], tri[(i + 1) % 3])))
            count[e] += 1
    boundary = {tuple(sorted(e)) for e in disk3.boundary_edges}
    for e, c in count.items():
        assert c == (1 if e in boundary else 2)


def test_interior_angles_bounded():
    for level in range(5):
        assert min_interior_angle(generate_disk_mesh(level)) >= 20.0


def test_refine_preserves_tag_and_cycle(disk3):
    m = refine(disk3)
    assert m.domain_tag == "disk"
    assert np.all(m.boundary_edges[1:, 0] == m.boundary_edges[:-1, 1])


def test_mesh_immutable(disk3):
    with pytest.raises(ValueError):
        disk3.vertices[0, 0] = 5.0


@pytest.mark.parametrize("n,tris,verts", [(2, 8, 9), (4, 32, 25)])
def test_square_counts(n, tris, verts):
    m = generate_square_mesh(n)
    assert m.num_triangles == tris
    assert m.num_vertices == verts


def test_square_area_partition():
    for n in (2, 3, 7):
        total = triangle_areas(generate_square_mesh(n)).sum()
        assert abs(total - 1.0) <= 1e-12


def test_square_h():
    m = generate_square_mesh(5)
    assert m.h == pytest.approx(np.sqrt(2) / 5)


def test_square_rejects_small_n():
    with pytest.raises(ValueError):
        generate_square_mesh(1)


def test_boundary_mass_total_square():
    m = generate_square_mesh(2)
    total = boundary_mass_matrix(m).sum()
    assert total == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("level", [3, 4, 5])
def test_boundary_mass_total_disk(level):
    m = generate_disk_mesh(level)
    total = boundary_mass_matrix(m).sum()
    assert abs(total - 2 * np.pi) / (2 * np.pi) <= 0.005
    # matches the inscribed-polygon perimeter exactly
    assert total == pytest.approx(boundary_length(m))
    nb = len(m.boundary_edges)
    assert boundary_length(m) == pytest.approx(2 * nb * np.sin(np.pi / nb))


def test_boundary_mass_psd(disk3, rng):
    M = boundary_mass_matrix(disk3)
    for _ in range(100):
        x = rng.standard_normal(disk3.num_vertices)
        assert x @ (M @ x) >= -1e-14


def test_dump_roundtrip_bit_exact(disk3, square8):
    for m in (disk3, square8):
        text = dump_mesh(m)
        again = dump_mesh(load_mesh(text, m.domain_tag))
        assert again == text
