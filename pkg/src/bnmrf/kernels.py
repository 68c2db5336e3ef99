"""Fundamental solutions of -Lap and -Lap - k^2 in 2D and 3D.

Convention: L_y Phi(x, y) = delta(x - y) with L = -Lap (Laplace) or
-Lap - k^2 (Helmholtz), i.e.

    Laplace 2D     -ln|x - y| / (2 pi)
    Laplace 3D     1 / (4 pi |x - y|)
    Helmholtz 2D   (i/4) H_0^(1)(k |x - y|)
    Helmholtz 3D   exp(ik|x - y|) / (4 pi |x - y|)

All functions broadcast over leading axes; points have the dimension as
their last axis. Laplace kernels come back real, Helmholtz complex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import CoincidentPoints, InvalidConfig

COINCIDENCE_TOL = 1e-14


@dataclass(frozen=True)
class KernelKind:
    operator: str  # "laplace" or "helmholtz"
    dim: int
    k: float | None = None

    def __post_init__(self):
        if self.operator not in ("laplace", "helmholtz"):
            raise InvalidConfig(f"unknown operator {self.operator!r}")
        if self.dim not in (2, 3):
            raise InvalidConfig("dimension must be 2 or 3")
        if self.operator == "helmholtz":
            if self.k is None or not self.k > 0:
                raise InvalidConfig("Helmholtz kernels need a wavenumber k > 0")
        elif self.k is not None:
            raise InvalidConfig("Laplace kernels take no wavenumber")

    @property
    def is_complex(self) -> bool:
        return self.operator == "helmholtz"

    @property
    def dtype(self):
        return complex if self.is_complex else float

    def static(self) -> "KernelKind":
        """The Laplace kernel of the same dimension."""
        return KernelKind("laplace", self.dim)


def laplace(dim: int) -> KernelKind:
    return KernelKind("laplace", dim)


def helmholtz(dim: int, k: float) -> KernelKind:
    return KernelKind("helmholtz", dim, float(k))


def _distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = x - y
    r = np.sqrt(np.sum(R * R, axis=-1))
    if np.any(r < COINCIDENCE_TOL):
        raise CoincidentPoints("kernel evaluated at coincident points")
    return R, r


def radial(kind: KernelKind, r, derivatives: int = 0):
    """G(r) and, on request, G'(r) and G''(r) for the radial profile of Phi."""
    r = np.asarray(r, dtype=float)
    pi = np.pi
    if kind.operator == "laplace":
        if kind.dim == 2:
            out = [-np.log(r) / (2 * pi), -1.0 / (2 * pi * r), 1.0 / (2 * pi * r * r)]
        else:
            out = [1.0 / (4 * pi * r), -1.0 / (4 * pi * r * r), 2.0 / (4 * pi * r**3)]
        return out[: derivatives + 1] if derivatives else out[0]
    k = kind.k
    kr = k * r
    if kind.dim == 2:
        h0 = specfun.hankel1(0, kr)
        if not derivatives:
            return 0.25j * h0
        h1 = specfun.hankel1(1, kr)
        out = [0.25j * h0, -0.25j * k * h1, -0.25j * k * k * (h0 - h1 / kr)]
    else:
        e = np.exp(1j * kr)
        if not derivatives:
            return e / (4 * pi * r)
        out = [e / (4 * pi * r), e * (1j * kr - 1.0) / (4 * pi * r * r),
               e * (2.0 - 2j * kr - kr * kr) / (4 * pi * r**3)]
    return out[: derivatives + 1]


def fundamental(kind: KernelKind, x, y):
    """Phi(x, y)."""
    _, r = _distance(x, y)
    return radial(kind, r)


def normal_derivative_y(kind: KernelKind, x, y, n_y):
    """n_y . grad_y Phi(x, y)."""
    R, r = _distance(x, y)
    _, g1 = radial(kind, r, 1)
    return -g1 * np.sum(R * np.asarray(n_y, dtype=float), axis=-1) / r


def gradient_x(kind: KernelKind, x, y):
    """grad_x Phi(x, y), shape (..., dim)."""
    R, r = _distance(x, y)
    _, g1 = radial(kind, r, 1)
    return (g1 / r)[..., None] * R


def normal_derivative_x(kind: KernelKind, x, y, n_x):
    """n_x . grad_x Phi(x, y)."""
    R, r = _distance(x, y)
    _, g1 = radial(kind, r, 1)
    return g1 * np.sum(R * np.asarray(n_x, dtype=float), axis=-1) / r


def hypersingular(kind: KernelKind, x, y, n_x, n_y):
    """d^2 Phi / (dn_x dn_y), pointwise (off the diagonal only)."""
    R, r = _distance(x, y)
    _, g1, g2 = radial(kind, r, 2)
    n_x = np.asarray(n_x, dtype=float)
    n_y = np.asarray(n_y, dtype=float)
    rx = np.sum(R * n_x, axis=-1)
    ry = np.sum(R * n_y, axis=-1)
    nn = np.sum(n_x * n_y, axis=-1)
    return -((g2 - g1 / r) * rx * ry / (r * r) + g1 * nn / r)


def log_coefficient(kind: KernelKind, r):
    """c(r) such that Phi - c(r) ln r is smooth in 2D."""
    if kind.dim != 2:
        raise ValueError("logarithmic splitting only applies in 2D")
    if kind.operator == "laplace":
        return np.full(np.shape(r), -1.0 / (2 * np.pi))
    return -specfun.bessel_j(0, kind.k * np.asarray(r, dtype=float)) / (2 * np.pi)


def fundamental_log_remainder(kind: KernelKind, r):
    """Phi - c(r) ln r, evaluated without cancellation; finite at r = 0."""
    r = np.asarray(r, dtype=float)
    if kind.operator == "laplace":
        return np.zeros(r.shape)
    kr = kind.k * r
    return 0.25j * specfun.hankel1_log_remainder(kr) - specfun.bessel_j(0, kr) * np.log(kind.k) / (2 * np.pi)
