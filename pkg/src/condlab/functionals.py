"""Finite-measurement misfit functionals and a scalar descent baseline.

Measurements are pairs of boundary currents and voltages in basis
coordinates.  j0 is the boundary-voltage misfit (squared L2 distance of
the simulated trace from the measured one); j1 and j2 are interior
energy misfits between the voltage-driven and current-driven solutions,
weighted by the square root of the tensor and the tensor itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import DirichletSolver, NeumannSolver, nodal_gradient
from .fields import ConductivityTensorField, scalar_field
from .mesh import Mesh, triangle_areas
from .operators import BoundaryBasis, BoundaryOperator, _matrix_sqrt_psd


@dataclass(frozen=True)
class MeasurementSet:
    """Paired boundary currents and voltages in basis coordinates.

    Synthetic data generated from an assembled operator also carries the
    exact nodal voltage samples, so consistency checks reproduce the
    forward pipeline bit for bit instead of through the basis projection.
    """

    currents: np.ndarray  # (n, 2K)
    voltages: np.ndarray  # (n, 2K)
    basis: BoundaryBasis
    voltage_samples: np.ndarray = None  # (n, nv) or None

    def __post_init__(self):
        currents = np.atleast_2d(np.asarray(self.currents, dtype=float))
        voltages = np.atleast_2d(np.asarray(self.voltages, dtype=float))
        if currents.shape != voltages.shape:
            raise ValueError("currents and voltages must pair up")
        if currents.shape[1] != self.basis.size:
            raise ValueError("coordinate length does not match the basis")
        if np.any(np.all(currents == 0.0, axis=1)):
            raise ValueError("zero current density in measurement set")
        currents.setflags(write=False)
        voltages.setflags(write=False)
        object.__setattr__(self, "currents", currents)
        object.__setattr__(self, "voltages", voltages)
        if self.voltage_samples is not None:
            samples = np.atleast_2d(np.asarray(self.voltage_samples, dtype=float))
            samples.setflags(write=False)
            object.__setattr__(self, "voltage_samples", samples)

    @property
    def count(self) -> int:
        return self.currents.shape[0]

    def voltage_values(self, i: int) -> np.ndarray:
        """Nodal samples of voltage i (exact when available)."""
        if self.voltage_samples is not None:
            return self.voltage_samples[i]
        return self.basis.function_values(self.voltages[i])


@dataclass(frozen=True)
class FunctionalValue:
    kind: str  # "J0" | "J1" | "J2"
    value: float
    per_measurement: np.ndarray

    def __post_init__(self):
        self.per_measurement.setflags(write=False)


def measurements_from_operator(op: BoundaryOperator,
                               currents) -> MeasurementSet:
    """Synthetic data: voltages are the operator images of the currents."""
    currents = np.atleast_2d(np.asarray(currents, dtype=float))
    voltages = currents @ op.matrix.T
    samples = currents @ op.traces if op.traces is not None else None
    return MeasurementSet(currents, voltages, op.basis, samples)


def _bundle(kind, terms) -> FunctionalValue:
    terms = np.asarray(terms, dtype=float)
    return FunctionalValue(kind, float(terms.sum()), terms)


def eval_j0(mesh: Mesh, field: ConductivityTensorField,
            data: MeasurementSet) -> FunctionalValue:
    """Boundary-voltage misfit: squared L2 trace residual per measurement."""
    basis = data.basis
    G = np.asarray(basis.gram_l2)
    solver = NeumannSolver(mesh, field)
    mass = solver.boundary_mass
    terms = []
    for g, phi in zip(data.currents, data.voltages):
        v = solver.solve(basis.function_values(g))
        r = basis.project(v.nodal_values, mass) - phi
        terms.append(r @ (G @ r))
    return _bundle("J0", terms)


def _eval_energy_misfit(mesh, field, data, index) -> FunctionalValue:
    if index == 1 and field.kind == "general":
        raise ValueError("J1 requires a symmetric conductivity tensor")
    basis = data.basis
    weight = (_matrix_sqrt_psd(field.tensors) if index == 1
              else np.asarray(field.tensors))
    neumann = NeumannSolver(mesh, field)
    dirichlet = DirichletSolver(mesh, field)
    areas = triangle_areas(mesh)
    terms = []
    for i, g in enumerate(data.currents):
        v = neumann.solve(basis.function_values(g))
        u = dirichlet.solve(data.voltage_values(i))
        diff = (nodal_gradient(mesh, u.nodal_values)
                - nodal_gradient(mesh, v.nodal_values))
        w = np.einsum("eij,ej->ei", weight, diff)
        terms.append(float(areas @ (w * w).sum(axis=1)))
    return _bundle(f"J{index}", terms)


def eval_j1(mesh: Mesh, field: ConductivityTensorField,
            data: MeasurementSet) -> FunctionalValue:
    """Interior misfit with the tensor square-root weight (symmetric fields)."""
    return _eval_energy_misfit(mesh, field, data, 1)


def eval_j2(mesh: Mesh, field: ConductivityTensorField,
            data: MeasurementSet) -> FunctionalValue:
    """Interior misfit with the full tensor weight."""
    return _eval_energy_misfit(mesh, field, data, 2)


_EVALUATORS = {"J0": eval_j0, "J1": eval_j1, "J2": eval_j2}


def minimize_scalar(mesh: Mesh, data: MeasurementSet, kind: str,
                    init, bounds, steps: int):
    """Projected coordinate descent over per-element scalar conductivities.

    One step sweeps every element once: the misfit is probed at
    sigma_e +/- delta, a parabola is fitted, and the clipped minimizer
    is accepted only if it lowers the misfit, so the returned trace is
    nonincreasing.  Returns the final per-element values and the trace
    of misfit values (initial value first).
    """
    if kind not in _EVALUATORS:
        raise ValueError(f"unknown functional kind {kind!r}")
    lo, hi = bounds
    sigma = np.broadcast_to(np.asarray(init, dtype=float),
                            (mesh.num_triangles,)).astype(float)
    if np.any(sigma < lo) or np.any(sigma > hi):
        raise ValueError("initial values must lie within bounds")
    evaluate = _EVALUATORS[kind]

    def misfit(values):
        return evaluate(mesh, scalar_field(mesh, values, alpha=lo, beta=hi),
                        data).value

    current = misfit(sigma)
    trace = [current]
    for _ in range(steps):
        for e in range(mesh.num_triangles):
            base = sigma[e]
            delta = max(0.05 * (hi - lo) / 10.0, 1e-3)
            lo_e, hi_e = max(lo, base - delta), min(hi, base + delta)
            probes = np.array([lo_e, base, hi_e])
            vals = []
            for s in probes:
                if s == base:
                    vals.append(current)
                    continue
                sigma[e] = s
                vals.append(misfit(sigma))
            sigma[e] = base
            # Parabolic fit through the three probes (when distinct).
            x0, x1, x2 = probes
            f0, f1, f2 = vals
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            candidates = [probes[int(np.argmin(vals))]]
            if denom != 0.0:
                a = (x2 * (f1 - f0) + x1 * (f0 - f2) + x0 * (f2 - f1)) / denom
                b = (x2 ** 2 * (f0 - f1) + x1 ** 2 * (f2 - f0)
                     + x0 ** 2 * (f1 - f2)) / denom
                if a > 0:
                    candidates.append(np.clip(-b / (2 * a), lo, hi))
            best_s, best_f = base, current
            for s in candidates:
                if s == base:
                    continue
                sigma[e] = s
                f = misfit(sigma)
                if f < best_f:
                    best_s, best_f = s, f
            sigma[e] = best_s
            current = best_f
        trace.append(current)
    return sigma, np.asarray(trace)
