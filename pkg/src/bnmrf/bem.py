"""Constant-element collocation BEM on the same integral equations.

The unknown is piecewise constant per panel (2D) or per triangle (3D) and
collocated at midpoints / centroids, so the square system is solved by LU.
Assembly, reconstruction and error code are shared with the random-feature
path; only the trace basis differs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import assembly
from .assembly import PanelConstantBasis
from .errors import SingularSystem
from .geometry import BC, Boundary2D, Orientation, TriMesh
from .kernels import KernelKind

PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class PanelDensities:
    """One value per element: du/dn on Dirichlet panels, u elsewhere."""

    values: np.ndarray
    basis: PanelConstantBasis

    def __post_init__(self):
        if len(self.values) != self.basis.M:
            raise ValueError("one value per element required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("densities must be finite")


def lu_solve(A, b):
    """Dense LU with partial pivoting; tiny pivots (relative to max |A|) are an error."""
    A = np.asarray(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("LU needs a square system")
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if pivots.min() < PIVOT_TOL * scale:
        raise SingularSystem(f"pivot {pivots.min():.3e} below tolerance")
    return scipy.linalg.lu_solve((lu, piv), b)


def bem_solve_2d(boundary: Boundary2D, kind: KernelKind, g=None, q=None, n_gauss: int = 10,
                 operators=None) -> PanelDensities:
    basis = PanelConstantBasis(boundary.tags)
    if boundary.orientation == Orientation.INTERIOR:
        system = assembly.assemble_interior_mixed(boundary, basis, kind, n_gauss, g=g, q=q, operators=operators)
    else:
        system = assembly.assemble_exterior_dirichlet(boundary, basis, kind, n_gauss, g=g, operators=operators)
    return PanelDensities(lu_solve(system.A, system.b), basis)


def bem_solve_3d_burton_miller(mesh: TriMesh, kind: KernelKind, amplitude: float = 1.0,
                               direction=(0.0, 0.0, 1.0), mu=None, operators=None) -> PanelDensities:
    basis = PanelConstantBasis(tuple([BC.NEUMANN] * len(mesh)))
    system = assembly.assemble_burton_miller(mesh, basis, kind, amplitude, direction, mu, operators)
    return PanelDensities(lu_solve(system.A, system.b), basis)
