"""Least-squares solve, field reconstruction and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly
from .assembly import BIESystem, PanelOperators, panel_operators
from .errors import EmptyPointSet, InvalidResolution, NumericalBreakdown, PointOnBoundary, ZeroReference
from .geometry import BC, Boundary2D, Orientation, TriMesh
from .kernels import KernelKind

DEFAULT_RCOND = 1e-12
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class SolveReport:
    coefficients: np.ndarray
    residual_norm: float
    effective_rank: int
    sigma_max: float
    sigma_min_retained: float


@dataclass(frozen=True)
class FieldSolution:
    points: np.ndarray
    predicted: np.ndarray
    reference: np.ndarray | None = None

    def __post_init__(self):
        if len(self.points) != len(self.predicted):
            raise ValueError("points and predictions differ in length")
        if self.reference is not None and len(self.reference) != len(self.points):
            raise ValueError("points and reference differ in length")

    @property
    def abs_error(self):
        if self.reference is None:
            return None
        return np.abs(self.predicted - self.reference)

    def relative_l2(self) -> float:
        return relative_l2_error(self.predicted, self.reference)


def _real_embedding(A, b):
    if np.iscomplexobj(A) or np.iscomplexobj(b):
        A = np.asarray(A, dtype=complex)
        b = np.asarray(b, dtype=complex)
        top = np.hstack([A.real, -A.imag])
        bottom = np.hstack([A.imag, A.real])
        return np.vstack([top, bottom]), np.concatenate([b.real, b.imag]), True
    return np.asarray(A, dtype=float), np.asarray(b, dtype=float), False


def lstsq_min_norm(A, b, rcond: float = DEFAULT_RCOND) -> SolveReport:
    """Minimum-norm least-squares solution by truncated SVD of the real embedding.

    A complex system A beta = b is solved as [[Re A, -Im A], [Im A, Re A]]
    [Re beta; Im beta] = [Re b; Im b], which has the same minimizers.
    """
    A = np.atleast_2d(A)
    b = np.asarray(b)
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("system must have at least one row and one column")
    if A.shape[0] != b.shape[0]:
        raise ValueError("row count of A and length of b differ")
    Ar, br, is_complex = _real_embedding(A, b)
    try:
        U, s, Vt = np.linalg.svd(Ar, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"SVD did not converge: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise NumericalBreakdown("non-finite singular values")
    smax = float(s[0]) if s.size else 0.0
    keep = s > rcond * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    rank = int(np.count_nonzero(keep))
    x = Vt[keep].T @ ((U[:, keep].T @ br) / s[keep])
    residual = float(np.linalg.norm(Ar @ x - br))
    m = A.shape[1]
    beta = x[:m] + 1j * x[m:] if is_complex else x
    return SolveReport(beta, residual, rank, smax, float(s[keep][-1]) if rank else 0.0)


def solve_least_squares(system: BIESystem, rcond: float = DEFAULT_RCOND) -> SolveReport:
    return lstsq_min_norm(system.A, system.b, rcond)


def relative_l2_error(predicted, reference) -> float:
    predicted = np.asarray(predicted)
    reference = np.asarray(reference)
    if predicted.shape != reference.shape or predicted.size == 0:
        raise ValueError("need equal, nonzero lengths")
    denom = np.linalg.norm(reference)
    if denom == 0:
        raise ZeroReference("reference has zero norm")
    return float(np.linalg.norm(predicted - reference) / denom)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


class _CoefficientTrace:
    """Density u_M = sum beta_j phi_j seen through a trace basis."""

    def __init__(self, basis, coefficients):
        self.basis = basis
        self.beta = np.asarray(coefficients)

    def value(self, points, normals, element):
        return self.basis.trace(points, normals, element)[0] @ self.beta

    def normal_derivative(self, points, normals, element):
        return self.basis.trace(points, normals, element)[1] @ self.beta


def reconstruct_field(boundary: Boundary2D, basis, coefficients, kind: KernelKind, n_gauss: int,
                      points, g=None, q=None, operators: PanelOperators | None = None,
                      reference=None) -> FieldSolution:
    """Field at off-boundary points from the solved trace and the known data.

    interior:  u = SL_D[q_D] + SL_N[q] - DL_D[g] - DL_N[g_N]
    exterior:  u = DL[g] - SL[q_D]
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise EmptyPointSet("no evaluation points")
    if np.any(boundary.distance(points) < BOUNDARY_TOL):
        raise PointOnBoundary("evaluation point lies on the boundary")
    ops = operators or panel_operators(boundary, kind, n_gauss, points)
    density = _CoefficientTrace(basis, coefficients)
    is_d = np.array([t == BC.DIRICHLET for t in boundary.tags])

    def unknown_value(p, n, e):
        return np.where(is_d[e], 0.0, density.value(p, n, e))

    def unknown_dn(p, n, e):
        return np.where(is_d[e], density.normal_derivative(p, n, e), 0.0)

    sl_u, dl_u = ops.density_terms(unknown_value, unknown_dn)
    dl_g, sl_q = ops.data_terms(g, q)
    if boundary.orientation == Orientation.INTERIOR:
        u = sl_u + sl_q - dl_g - dl_u
    else:
        u = dl_g - sl_u
    ref = None if reference is None else np.asarray(reference(points))
    return FieldSolution(points, np.asarray(u), ref)


def reconstruct_scattered(mesh: TriMesh, basis, coefficients, kind: KernelKind, points,
                          operators: assembly.MeshOperators | None = None):
    """Scattered field int dG/dn_y phi dS of the solved surface potential."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ops = operators or assembly.mesh_operators(mesh, kind, points)
    density = _CoefficientTrace(basis, coefficients)
    zeros = np.zeros(3)
    return ops.apply_density(lambda p, e: density.value(p, np.broadcast_to(zeros, p.shape), e))


def reconstruct_total(mesh: TriMesh, basis, coefficients, kind: KernelKind, points, amplitude=1.0,
                      direction=(0.0, 0.0, 1.0), operators=None, reference=None) -> FieldSolution:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inc, _ = assembly.plane_wave(amplitude, kind.k, direction, points)
    u = inc + reconstruct_scattered(mesh, basis, coefficients, kind, points, operators)
    ref = None if reference is None else np.asarray(reference(points))
    return FieldSolution(points, u, ref)


# ---------------------------------------------------------------------------
# evaluation grids
# ---------------------------------------------------------------------------


def default_standoff(boundary: Boundary2D) -> float:
    return 0.02 * boundary.diameter()


def evaluation_grid(boundary: Boundary2D | None, kind: str, resolution: int, standoff: float | None = None,
                    outer: float = 3.0, radius: float = 1.0):
    """Evaluation points.

    ``interior``: uniform grid over the bounding box, kept if inside and at
    least ``standoff`` away from the boundary. ``exterior``: grid over the
    bounding box scaled by ``outer`` about its centre, kept if outside with
    the same standoff. ``sphere``: the three coordinate planes through the
    origin on [-outer a, outer a]^2, kept if |x| >= a + standoff (a =
    ``radius``; ``boundary`` is ignored).
    """
    if resolution < 2:
        raise InvalidResolution("resolution must be at least 2")
    if kind == "sphere":
        standoff = 0.04 * radius if standoff is None else standoff
        s = np.linspace(-outer * radius, outer * radius, resolution)
        u, v = np.meshgrid(s, s, indexing="ij")
        u, v = u.ravel(), v.ravel()
        z = np.zeros_like(u)
        planes = [np.stack(c, axis=-1) for c in ((z, u, v), (u, z, v), (u, v, z))]
        pts = np.concatenate(planes)
        pts = np.unique(pts, axis=0)
        return pts[np.linalg.norm(pts, axis=1) >= radius + standoff]
    standoff = default_standoff(boundary) if standoff is None else standoff
    lo, hi = boundary.bounding_box()
    if kind == "exterior":
        centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lo, hi = centre - outer * half, centre + outer * half
    elif kind != "interior":
        raise ValueError(f"unknown grid kind {kind!r}")
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    inside = boundary.contains(pts)
    keep = inside if kind == "interior" else ~inside
    pts = pts[keep]
    return pts[boundary.distance(pts) >= standoff]
