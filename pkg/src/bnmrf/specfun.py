"""Bessel, Hankel, spherical Bessel functions and Legendre polynomials.

Only what the Helmholtz kernels and the rigid-sphere series need: integer
orders 0 and 1 for the cylinder functions, arbitrary non-negative integer
order for the spherical ones. All routines accept scalars or numpy arrays
and are vectorized.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NonPositiveArgument

EULER_GAMMA = 0.57721566490153286061

#: seam between the power series and the Hankel asymptotic expansion
SERIES_CUTOFF = 12.0

_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 30


def _as_array(x):
    return np.asarray(x, dtype=float)


def _check_order(order):
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order}")


def _check_positive(x):
    if np.any(~(x > 0)):
        raise NonPositiveArgument("argument must be strictly positive")


def _series_j(order, x):
    # sum (-1)^m (x/2)^(2m+order) / (m! (m+order)!)
    h = 0.5 * x
    q = -h * h
    term = np.ones_like(x) if order == 0 else h.copy()
    total = term.copy()
    for m in range(1, _SERIES_TERMS):
        term = term * q / (m * (m + order))
        total = total + term
    return total


def _series_y(order, x, j):
    h = 0.5 * x
    q = -h * h
    log_part = np.log(h) + EULER_GAMMA
    if order == 0:
        term = np.ones_like(x)
        harmonic = 0.0
        acc = np.zeros_like(x)
        for m in range(1, _SERIES_TERMS):
            term = term * q / (m * m)
            harmonic += 1.0 / m
            acc = acc - harmonic * term
        return (2.0 / np.pi) * (log_part * j + acc)
    # order 1: digamma(m+1) + digamma(m+2) = 2 H_m + 1/(m+1) - 2 gamma
    term = h.copy()
    harmonic = 0.0
    acc = term * (1.0 - 2.0 * EULER_GAMMA)
    for m in range(1, _SERIES_TERMS):
        term = term * q / (m * (m + 1))
        harmonic += 1.0 / m
        acc = acc + term * (2.0 * harmonic + 1.0 / (m + 1) - 2.0 * EULER_GAMMA)
    return (2.0 / np.pi) * np.log(h) * j - 2.0 / (np.pi * x) - acc / np.pi


def _asymptotic_hankel(order, x):
    """Large-argument expansion of H_order^(1)(x), truncated at the smallest term."""
    mu = 4.0 * order * order
    total = np.ones_like(x, dtype=complex)
    term = np.ones_like(x, dtype=complex)
    active = np.ones(x.shape, dtype=bool)
    last = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * 1j * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        size = np.abs(term)
        active &= size < last
        total = total + np.where(active, term, 0.0)
        last = np.where(active, size, last)
    phase = x - (0.5 * order + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * phase) * total


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x), order 0 or 1."""
    _check_order(order)
    x = _as_array(x)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < SERIES_CUTOFF
    if np.any(small):
        out[small] = _series_j(order, ax[small])
    if np.any(~small):
        out[~small] = _asymptotic_hankel(order, ax[~small]).real
    if order == 1:
        out = np.where(x < 0, -out, out)
    return out[()] if out.ndim == 0 else out


def bessel_y(order, x):
    """Bessel function of the second kind Y_order(x) for x > 0."""
    _check_order(order)
    x = _as_array(x)
    _check_positive(x)
    out = np.empty_like(x)
    small = x < SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        out[small] = _series_y(order, xs, _series_j(order, xs))
    if np.any(~small):
        out[~small] = _asymptotic_hankel(order, x[~small]).imag
    return out[()] if out.ndim == 0 else out


def hankel1(order, x):
    """Hankel function of the first kind H_order^(1)(x) = J + iY, x > 0."""
    _check_order(order)
    x = _as_array(x)
    _check_positive(x)
    out = np.empty(x.shape, dtype=complex)
    small = x < SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        j = _series_j(order, xs)
        out[small] = j + 1j * _series_y(order, xs, j)
    if np.any(~small):
        out[~small] = _asymptotic_hankel(order, x[~small])
    return out[()] if out.ndim == 0 else out


def hankel1_log_remainder(x):
    """Smooth part of H_0^(1): ``H_0^(1)(x) - (2i/pi) ln(x) J_0(x)``.

    Used by the singular single-layer quadrature, which integrates the
    ``ln`` factor with a product rule and needs the rest without the
    cancellation that a plain subtraction would incur for tiny ``x``.
    """
    x = _as_array(x)
    out = np.empty(x.shape, dtype=complex)
    small = x < SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        j = _series_j(0, xs)
        # Y0 with the ln(x) J0 piece removed
        h = 0.5 * xs
        q = -h * h
        term = np.ones_like(xs)
        harmonic = 0.0
        acc = np.zeros_like(xs)
        for m in range(1, _SERIES_TERMS):
            term = term * q / (m * m)
            harmonic += 1.0 / m
            acc = acc - harmonic * term
        y_rest = (2.0 / np.pi) * ((EULER_GAMMA - np.log(2.0)) * j + acc)
        out[small] = j + 1j * y_rest
    if np.any(~small):
        xl = x[~small]
        out[~small] = _asymptotic_hankel(0, xl) - (2j / np.pi) * np.log(xl) * bessel_j(0, xl)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# spherical functions
# ---------------------------------------------------------------------------


def _spherical_j_table(nmax, x):
    """j_0..j_nmax at x (> 0) by downward recurrence normalized to j_0 or j_1."""
    x = _as_array(x)
    start = int(max(nmax, np.max(x, initial=0.0))) + 30 + int(np.sqrt(40.0 * (nmax + 1)))
    table = np.zeros((nmax + 1,) + x.shape)
    f_next = np.zeros_like(x)
    f_cur = np.full_like(x, 1e-300)
    for n in range(start, 0, -1):
        f_prev = (2 * n + 1) / x * f_cur - f_next
        f_next, f_cur = f_cur, f_prev
        # f_cur now holds the unnormalized j_{n-1}
        big = np.abs(f_cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            f_cur = f_cur * scale
            f_next = f_next * scale
            table *= scale
        if n - 1 <= nmax:
            table[n - 1] = f_cur
    # after the loop f_cur ~ j_0 and f_next ~ j_1
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    use_j0 = np.abs(j0) >= np.abs(j1)
    scale = np.where(use_j0, j0 / np.where(use_j0, f_cur, 1.0), j1 / np.where(use_j0, 1.0, f_next))
    return table * scale


def _spherical_y_table(nmax, x):
    x = _as_array(x)
    table = np.empty((nmax + 1,) + x.shape)
    table[0] = -np.cos(x) / x
    if nmax >= 1:
        table[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for n in range(1, nmax):
        table[n + 1] = (2 * n + 1) / x * table[n] - table[n - 1]
    return table


def spherical_bessel_j(n, x):
    """Spherical Bessel function j_n(x) for integer n >= 0."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = _as_array(x)
    ax = np.abs(x)
    zero = ax == 0.0
    safe = np.where(zero, 1.0, ax)
    out = _spherical_j_table(n, safe)[n]
    out = np.where(zero, 1.0 if n == 0 else 0.0, out)
    if n % 2 == 1:
        out = np.where(x < 0, -out, out)
    return out[()] if np.ndim(out) == 0 else out


def spherical_hankel1(n, x):
    """Spherical Hankel function h_n^(1)(x) = j_n + i y_n for x > 0."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = _as_array(x)
    _check_positive(x)
    out = _spherical_j_table(n, x)[n] + 1j * _spherical_y_table(n, x)[n]
    return out[()] if np.ndim(out) == 0 else out


def spherical_tables(nmax, x):
    """Return (j, h) arrays of shape (nmax + 1, *x.shape) for orders 0..nmax."""
    x = _as_array(x)
    _check_positive(x)
    j = _spherical_j_table(nmax, x)
    return j, j + 1j * _spherical_y_table(nmax, x)


def spherical_deriv(kind, n, x):
    """Derivative of j_n (kind='j') or h_n^(1) (kind='h') with respect to x.

    Uses f_n' = f_{n-1} - (n+1)/x f_n, with f_0' = -f_1.
    """
    x = _as_array(x)
    _check_positive(x)
    if kind == "j":
        table = _spherical_j_table(n + 1, x)
    elif kind == "h":
        table = _spherical_j_table(n + 1, x) + 1j * _spherical_y_table(n + 1, x)
    else:
        raise ValueError("kind must be 'j' or 'h'")
    if n == 0:
        out = -table[1]
    else:
        out = table[n - 1] - (n + 1) / x * table[n]
    return out[()] if np.ndim(out) == 0 else out


def legendre_p(n, x):
    """Legendre polynomial P_n(x) on [-1, 1] via Bonnet's recurrence."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _as_array(x)
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise DomainError("Legendre argument must lie in [-1, 1]")
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev[()] if p_prev.ndim == 0 else p_prev
    p = x.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * x * p - m * p_prev) / (m + 1)
    return p[()] if p.ndim == 0 else p


def legendre_table(nmax, x):
    """P_0..P_nmax at x, shape (nmax + 1, *x.shape)."""
    x = _as_array(x)
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise DomainError("Legendre argument must lie in [-1, 1]")
    table = np.empty((nmax + 1,) + x.shape)
    table[0] = 1.0
    if nmax >= 1:
        table[1] = x
    for m in range(1, nmax):
        table[m + 1] = ((2 * m + 1) * x * table[m] - m * table[m - 1]) / (m + 1)
    return table
