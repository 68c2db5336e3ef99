"""Closed-form fields used as boundary data and as error references."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import specfun
from .errors import InsideSphere, InvalidConfig, OriginEvaluation

PLANE_WAVE_ANGLE = math.pi / 7
MIE_MAX_TERMS = 80


def _points(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# 2D fields
# ---------------------------------------------------------------------------


def _wavevector(k):
    if not k > 0:
        raise InvalidConfig("wavenumber must be positive")
    return k * np.array([math.cos(PLANE_WAVE_ANGLE), math.sin(PLANE_WAVE_ANGLE)])


def interior_plane_wave(k: float, x):
    """exp(i (k1 x1 + k2 x2)) with (k1, k2) = k (cos pi/7, sin pi/7)."""
    return np.exp(1j * (_points(x) @ _wavevector(k)))


def interior_plane_wave_gradient(k: float, x):
    kv = _wavevector(k)
    return 1j * interior_plane_wave(k, x)[..., None] * kv


def laplace_harmonic(x):
    """sin x1 sinh x2 + cos x1 cosh x2."""
    x = _points(x)
    x1, x2 = x[..., 0], x[..., 1]
    return np.sin(x1) * np.sinh(x2) + np.cos(x1) * np.cosh(x2)


def laplace_harmonic_gradient(x):
    x = _points(x)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([np.cos(x1) * np.sinh(x2) - np.sin(x1) * np.cosh(x2),
                     np.sin(x1) * np.cosh(x2) + np.cos(x1) * np.sinh(x2)], axis=-1)


def _radius(x):
    r = np.linalg.norm(_points(x), axis=-1)
    if np.any(r == 0.0):
        raise OriginEvaluation("the outgoing field is singular at the origin")
    return r


def exterior_hankel(k: float, x):
    """H_0^(1)(k |x|), an outgoing solution outside any region holding the origin."""
    if not k > 0:
        raise InvalidConfig("wavenumber must be positive")
    return specfun.hankel1(0, k * _radius(x))


def exterior_hankel_gradient(k: float, x):
    r = _radius(x)
    return (-k * specfun.hankel1(1, k * r) / r)[..., None] * _points(x)


# ---------------------------------------------------------------------------
# sound-hard sphere
# ---------------------------------------------------------------------------


def mie_terms(k: float, a: float) -> int:
    """Number of retained orders: ceil(ka) + 20, capped."""
    return min(math.ceil(k * a) + 20, MIE_MAX_TERMS)


def _mie_coefficients(k, a, n_terms):
    n = np.arange(n_terms + 1)
    ka = np.array([k * a])
    dj = np.array([specfun.spherical_deriv("j", m, ka)[0] for m in n])
    dh = np.array([specfun.spherical_deriv("h", m, ka)[0] for m in n])
    return -(1j**n) * (2 * n + 1) * dj / dh


def sphere_scattered(k: float, a: float, r, theta, n_terms: int | None = None):
    """Field scattered by a sound-hard sphere of radius a from exp(i k z).

    Sum over n = 0..N of -i^n (2n+1) j_n'(ka) / h_n'(ka) P_n(cos theta) h_n(kr).
    """
    if not (k > 0 and a > 0):
        raise InvalidConfig("k and a must be positive")
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r < a * (1.0 - 1e-12)):
        raise InsideSphere("the scattered series is only valid for r >= a")
    n_terms = mie_terms(k, a) if n_terms is None else int(n_terms)
    if n_terms < 0:
        raise InvalidConfig("number of terms must be non-negative")
    coef = _mie_coefficients(k, a, n_terms)
    r_b, th_b = np.broadcast_arrays(r, theta)
    _, h = specfun.spherical_tables(n_terms, k * r_b)
    p = specfun.legendre_table(n_terms, np.clip(np.cos(th_b), -1.0, 1.0))
    return np.tensordot(coef, p * h, axes=(0, 0))


def _spherical_coordinates(x):
    x = _points(x)
    r = np.linalg.norm(x, axis=-1)
    cos_t = np.divide(x[..., 2], r, out=np.ones_like(r), where=r > 0)
    return r, np.arccos(np.clip(cos_t, -1.0, 1.0))


def sphere_scattered_at(k: float, a: float, x, n_terms: int | None = None):
    """Scattered field at Cartesian points, incidence along +z."""
    r, theta = _spherical_coordinates(x)
    return sphere_scattered(k, a, r, theta, n_terms)


def sphere_total(k: float, a: float, x, n_terms: int | None = None, amplitude: float = 1.0):
    """Incident exp(i k z) plus the scattered field (amplitude scales both)."""
    x = _points(x)
    incident = np.exp(1j * k * x[..., 2])
    return amplitude * (incident + sphere_scattered_at(k, a, x, n_terms))


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceField:
    """A reference solution with the operator it satisfies."""

    name: str
    value: Callable
    gradient: Callable | None
    operator: str
    k: float | None = None

    def normal_derivative(self, points, normals):
        return np.sum(self.gradient(points) * np.asarray(normals), axis=-1)


def make_reference(name: str, k: float | None = None, a: float = 1.0) -> ReferenceField:
    if name == "interior_plane_wave":
        return ReferenceField(name, lambda x: interior_plane_wave(k, x),
                              lambda x: interior_plane_wave_gradient(k, x), "helmholtz", k)
    if name == "laplace_harmonic":
        return ReferenceField(name, laplace_harmonic, laplace_harmonic_gradient, "laplace")
    if name == "exterior_hankel":
        return ReferenceField(name, lambda x: exterior_hankel(k, x),
                              lambda x: exterior_hankel_gradient(k, x), "helmholtz", k)
    if name == "sphere_scatter":
        return ReferenceField(name, lambda x: sphere_total(k, a, x), None, "helmholtz", k)
    raise InvalidConfig(f"unknown reference field {name!r}")
