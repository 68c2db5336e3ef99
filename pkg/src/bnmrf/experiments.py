"""The four benchmark problems, set up once and solved for many bases.

A :class:`Problem2D` / :class:`SphereProblem` holds geometry, boundary data,
reference field, evaluation points and the (basis independent) quadrature
operators, so repeats and sweeps only redo the cheap basis-dependent part.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import assembly, bem, geometry, kernels, reference, solver
from .features import FeatureBasis, SamplerConfig, sample_basis
from .geometry import BC, Boundary2D, TriMesh
from .kernels import KernelKind

EXPERIMENTS = ("interior-helmholtz", "laplace-flower", "exterior-helmholtz", "scatter-sphere")


@dataclass
class RunResult:
    method: str
    rel_l2: float
    field: solver.FieldSolution
    timings: dict = field(default_factory=dict)
    report: solver.SolveReport | None = None


class _Timer:
    def __init__(self, timings, key):
        self.timings, self.key = timings, key

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.key] = self.timings.get(self.key, 0.0) + 1e3 * (time.perf_counter() - self.t0)


@dataclass
class Problem2D:
    name: str
    boundary: Boundary2D
    kind: KernelKind
    ref: reference.ReferenceField
    n_gauss: int
    grid: int
    uses_g: bool
    uses_q: bool

    @property
    def g(self):
        return self.ref.value if self.uses_g else None

    @property
    def q(self):
        return self.ref.normal_derivative if self.uses_q else None

    @cached_property
    def collocation_ops(self):
        return assembly.collocation_operators(self.boundary, self.kind, self.n_gauss)

    @cached_property
    def eval_points(self):
        kind = "interior" if self.boundary.orientation == geometry.Orientation.INTERIOR else "exterior"
        return solver.evaluation_grid(self.boundary, kind, self.grid)

    @cached_property
    def eval_ops(self):
        return assembly.panel_operators(self.boundary, self.kind, self.n_gauss, self.eval_points)

    def assemble(self, basis):
        if self.boundary.orientation == geometry.Orientation.INTERIOR:
            return assembly.assemble_interior_mixed(self.boundary, basis, self.kind, self.n_gauss,
                                                    g=self.g, q=self.q, operators=self.collocation_ops)
        return assembly.assemble_exterior_dirichlet(self.boundary, basis, self.kind, self.n_gauss,
                                                    g=self.g, operators=self.collocation_ops)

    def reconstruct(self, basis, coefficients):
        return solver.reconstruct_field(self.boundary, basis, coefficients, self.kind, self.n_gauss,
                                        self.eval_points, g=self.g, q=self.q, operators=self.eval_ops,
                                        reference=self.ref.value)

    def solve_bnm(self, basis: FeatureBasis) -> RunResult:
        timings = {}
        with _Timer(timings, "assembly"):
            system = self.assemble(basis)
        with _Timer(timings, "solve"):
            report = solver.solve_least_squares(system)
        with _Timer(timings, "reconstruction"):
            sol = self.reconstruct(basis, report.coefficients)
        return RunResult("bnm", sol.relative_l2(), sol, timings, report)

    def solve_bem(self) -> RunResult:
        timings = {}
        with _Timer(timings, "assembly"):
            basis = assembly.PanelConstantBasis(self.boundary.tags)
            system = self.assemble(basis)
        with _Timer(timings, "solve"):
            values = bem.lu_solve(system.A, system.b)
        with _Timer(timings, "reconstruction"):
            sol = self.reconstruct(basis, values)
        return RunResult("bem", sol.relative_l2(), sol, timings)


@dataclass
class SphereProblem:
    mesh: TriMesh
    kind: KernelKind
    radius: float
    grid: int
    amplitude: float = 1.0
    direction: tuple = (0.0, 0.0, 1.0)
    name: str = "scatter-sphere"

    @cached_property
    def collocation_ops(self):
        return assembly.burton_miller_operators(self.mesh, self.kind)

    @cached_property
    def eval_points(self):
        return solver.evaluation_grid(None, "sphere", self.grid, radius=self.radius)

    @cached_property
    def eval_ops(self):
        return assembly.mesh_operators(self.mesh, self.kind, self.eval_points)

    @cached_property
    def reference_values(self):
        return self.amplitude * reference.sphere_total(self.kind.k, self.radius, self.eval_points)

    def _finish(self, method, basis, coefficients, timings, report=None):
        with _Timer(timings, "reconstruction"):
            sol = solver.reconstruct_total(self.mesh, basis, coefficients, self.kind, self.eval_points,
                                           self.amplitude, self.direction, operators=self.eval_ops)
        sol = solver.FieldSolution(sol.points, sol.predicted, self.reference_values)
        return RunResult(method, sol.relative_l2(), sol, timings, report)

    def solve_bnm(self, basis: FeatureBasis) -> RunResult:
        timings = {}
        with _Timer(timings, "assembly"):
            system = assembly.assemble_burton_miller(self.mesh, basis, self.kind, self.amplitude,
                                                     self.direction, operators=self.collocation_ops)
        with _Timer(timings, "solve"):
            report = solver.solve_least_squares(system)
        return self._finish("bnm", basis, report.coefficients, timings, report)

    def solve_bem(self) -> RunResult:
        timings = {}
        basis = assembly.PanelConstantBasis(tuple([BC.NEUMANN] * len(self.mesh)))
        with _Timer(timings, "assembly"):
            system = assembly.assemble_burton_miller(self.mesh, basis, self.kind, self.amplitude,
                                                     self.direction, operators=self.collocation_ops)
        with _Timer(timings, "solve"):
            values = bem.lu_solve(system.A, system.b)
        return self._finish("bem", basis, values, timings)


def interior_helmholtz(k: float = 9.0, n_collocation: int = 60, n_gauss: int = 10, grid: int = 41) -> Problem2D:
    """Unit square, Neumann data of the plane wave exp(i k (cos pi/7, sin pi/7).x)."""
    boundary = geometry.unit_square(n_collocation, BC.NEUMANN)
    return Problem2D("interior-helmholtz", boundary, kernels.helmholtz(2, k),
                     reference.make_reference("interior_plane_wave", k), n_gauss, grid, False, True)


def laplace_flower(n_collocation: int = 100, n_gauss: int = 10, grid: int = 61) -> Problem2D:
    boundary = geometry.flower(n_collocation, BC.DIRICHLET)
    return Problem2D("laplace-flower", boundary, kernels.laplace(2),
                     reference.make_reference("laplace_harmonic"), n_gauss, grid, True, False)


def exterior_helmholtz(k: float = 2.0, n_collocation: int = 100, n_gauss: int = 10, grid: int = 61) -> Problem2D:
    boundary = geometry.star(n_collocation, BC.DIRICHLET).with_orientation(geometry.Orientation.EXTERIOR)
    return Problem2D("exterior-helmholtz", boundary, kernels.helmholtz(2, k),
                     reference.make_reference("exterior_hankel", k), n_gauss, grid, True, False)


def scatter_sphere(k: float = 4.0, mesh: TriMesh | None = None, grid: int = 41, radius: float = 1.0) -> SphereProblem:
    mesh = geometry.uv_sphere(radius) if mesh is None else mesh
    return SphereProblem(mesh, kernels.helmholtz(3, k), radius, grid)


def make_problem(experiment: str, k: float | None = None, n_collocation: int | None = None,
                 n_gauss: int | None = None, grid: int | None = None, mesh: TriMesh | None = None):
    kw = {key: val for key, val in (("n_collocation", n_collocation), ("n_gauss", n_gauss), ("grid", grid))
          if val is not None}
    if experiment == "interior-helmholtz":
        return interior_helmholtz(k if k is not None else 9.0, **kw)
    if experiment == "laplace-flower":
        return laplace_flower(**kw)
    if experiment == "exterior-helmholtz":
        return exterior_helmholtz(k if k is not None else 2.0, **kw)
    if experiment == "scatter-sphere":
        return scatter_sphere(k if k is not None else 4.0, mesh, **({"grid": grid} if grid else {}))
    raise ValueError(f"unknown experiment {experiment!r}")


def run_bnm(problem, sampler: SamplerConfig, M: int) -> RunResult:
    dim = 3 if isinstance(problem, SphereProblem) else 2
    return problem.solve_bnm(sample_basis(sampler, M, dim))


def mean_error(problem, law: str, scale: float, M: int, seed: int = 0, repeats: int = 4):
    """Mean relative L2 error over seeds seed..seed+repeats-1."""
    errs = [run_bnm(problem, SamplerConfig(law, scale, s), M).rel_l2 for s in range(seed, seed + repeats)]
    return float(np.mean(errs)), errs
