import numpy as np
import pytest

from condlab.electrodes import (CemSystem, ElectrodeConfig, cem_stability_probe,
                                equispaced_electrodes, resistance_matrix,
                                solve_cem)
from condlab.errors import ResolutionError
from condlab.fields import constant_tensor, scalar_field
from condlab.operators import fourier_basis


@pytest.fixture(scope="module")
def cem4(disk5, identity5):
    return CemSystem(disk5, identity5, equispaced_electrodes(4, 0.5, 1.0))


def test_electrode_config_validation():
    with pytest.raises(ValueError):
        equispaced_electrodes(4, coverage=1.2)
    with pytest.raises(ValueError):
        ElectrodeConfig(np.array([[0.0, 1.0]]), np.array([1.0]))  # one arc
    with pytest.raises(ValueError):
        ElectrodeConfig(np.array([[0.0, 1.5], [1.0, 2.0]]), np.ones(2))
    with pytest.raises(ValueError):
        ElectrodeConfig(np.array([[0.0, 1.0], [2.0, 3.0]]),
                        np.array([1.0, -1.0]))


def test_zero_current_gives_constants(cem4):
    sol = cem4.solve(np.zeros(4))
    assert sol.interior.max() - sol.interior.min() <= 1e-12
    assert np.abs(sol.voltage_pattern).max() <= 1e-12


def test_current_pattern_checked(cem4):
    with pytest.raises(ValueError, match="sum to zero"):
        cem4.solve(np.array([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        cem4.solve(np.array([1.0, -1.0]))


def test_fourfold_symmetry(cem4):
    sol = cem4.solve(np.array([1.0, -1.0, 1.0, -1.0]))
    V = sol.voltage_pattern
    assert abs(V[0] - V[2]) <= 1e-6 * abs(V[0])
    assert abs(V[1] - V[3]) <= 1e-6 * abs(V[1])
    assert abs(V[0] + V[1]) <= 1e-6 * abs(V[0])


def test_voltage_identity_and_normalization(cem4):
    sol = cem4.solve(np.array([2.0, -0.5, -0.5, -1.0]))
    z = cem4.electrodes.impedances
    expected = cem4.lengths * sol.electrode_potentials - z * sol.current_pattern
    assert np.abs(sol.voltage_pattern - expected).max() <= 1e-10 * np.abs(
        expected).max()
    assert abs(sol.voltage_pattern.sum()) <= 1e-10 * np.abs(
        sol.voltage_pattern).max()


def test_voltage_matches_trace_integral(cem4):
    # the electrode equation forces int_e u = |e| U - z I exactly
    sol = cem4.solve(np.array([1.0, -1.0, 1.0, -1.0]))
    integrals = cem4.moments @ sol.interior
    assert np.abs(integrals - sol.voltage_pattern).max() <= 1e-6


def test_resistance_symmetry_and_null(disk5, identity5):
    R = resistance_matrix(disk5, identity5, equispaced_electrodes(6, 0.5, 0.8))
    E = np.asarray(R.entries)
    scale = np.linalg.norm(E, 2)
    assert np.linalg.norm(E - E.T, 2) <= 1e-8 * scale
    assert np.linalg.norm(E @ np.ones(6)) <= 1e-8 * scale


def test_reciprocity_and_passivity(disk5, identity5, rng):
    R = resistance_matrix(disk5, identity5, equispaced_electrodes(4, 0.5, 1.0))
    for _ in range(100):
        I1 = rng.standard_normal(4)
        I1 -= I1.mean()
        I2 = rng.standard_normal(4)
        I2 -= I2.mean()
        assert I1 @ R.apply(I2) == pytest.approx(I2 @ R.apply(I1), abs=1e-10)
        assert I1 @ R.apply(I1) >= -1e-12


def test_two_electrode_power_monotone_in_impedance(disk4):
    f = constant_tensor(disk4, 1.0, 1.0)
    I = np.array([1.0, -1.0])
    powers = []
    for z in (1e-3, 0.1, 1.0, 10.0):
        R = resistance_matrix(disk4, f, equispaced_electrodes(2, 0.4, z))
        powers.append(I @ R.apply(I))
    assert all(p > 0 for p in powers)
    assert all(b >= a - 1e-12 for a, b in zip(powers, powers[1:]))


def test_resistance_scaling_law(disk4):
    # R(sigma*I; z) = (1/sigma) R(I; sigma*z) from substituting u -> u/sigma
    sigma = 2.5
    Ra = resistance_matrix(disk4, constant_tensor(disk4, sigma, sigma),
                           equispaced_electrodes(4, 0.5, 1.0))
    Rb = resistance_matrix(disk4, constant_tensor(disk4, 1.0, 1.0),
                           equispaced_electrodes(4, 0.5, sigma))
    assert np.abs(Ra.entries - Rb.entries / sigma).max() <= 1e-10
    # and the small-impedance limit matches plain conductivity scaling
    Rc = resistance_matrix(disk4, constant_tensor(disk4, sigma, sigma),
                           equispaced_electrodes(4, 0.5, 1e-4))
    Rd = resistance_matrix(disk4, constant_tensor(disk4, 1.0, 1.0),
                           equispaced_electrodes(4, 0.5, 1e-4))
    assert np.abs(Rc.entries - Rd.entries / sigma).max() <= 1e-3 * np.abs(
        Rd.entries).max()


def test_arc_resolution_guard(disk3):
    f = constant_tensor(disk3, 1.0, 1.0)
    narrow = ElectrodeConfig(np.array([[0.0, 0.01], [1.0, 2.0]]),
                             np.array([1.0, 1.0]))
    with pytest.raises(ResolutionError):
        solve_cem(disk3, f, narrow, np.array([1.0, -1.0]))


def test_stability_probe(disk4, rng):
    basis = fourier_basis(disk4, 8)
    cfg = equispaced_electrodes(4, 0.5, 1.0)
    f1 = constant_tensor(disk4, 1.0, 1.0)
    dR, dND = cem_stability_probe(disk4, f1, f1, cfg, basis)
    assert dR <= 1e-10 and dND <= 1e-10

    values = np.ones(disk4.num_triangles)
    values[37] = 2.0  # one interior element perturbed
    f2 = scalar_field(disk4, values)
    dR, dND = cem_stability_probe(disk4, f1, f2, cfg, basis)
    assert dR > 0 and dND > 0
    assert np.isfinite(dR / dND)


def test_dump_resistance(tmp_path, disk4):
    from condlab.electrodes import dump_resistance

    f = constant_tensor(disk4, 1.0, 1.0)
    R = resistance_matrix(disk4, f, equispaced_electrodes(3, 0.5, 1.0))
    path = tmp_path / "r.csv"
    dump_resistance(R, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "l,m,value"
    assert len(lines) == 10
    l, m, v = lines[1].split(",")
    assert (int(l), int(m)) == (0, 0)
    assert float(v) == R.entries[0, 0]


def test_stability_family_ratio_stable(disk4):
    basis = fourier_basis(disk4, 8)
    cfg = equispaced_electrodes(4, 0.5, 1.0)
    base = constant_tensor(disk4, 1.0, 1.0)
    ratios = []
    for t in (0.01, 0.02, 0.04):
        dR, dND = cem_stability_probe(disk4, base,
                                      constant_tensor(disk4, 1 + t, 1 + t),
                                      cfg, basis)
        ratios.append(dR / dND)
    assert max(ratios) / min(ratios) <= 2.0
