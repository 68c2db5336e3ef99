"""Quadrature rules: Gauss-Legendre, Gauss-log, triangle rules and singular schemes.

The panel routines here take one panel and one integrand; the assembly
module works on flattened node arrays built from the same rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DegenerateTriangle, InvalidOrder, TargetNotOnPanel
from .geometry import Panel2D
from .kernels import KernelKind


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    reference: str  # "segment", "unit_triangle" or "log_segment"

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def _gauss_legendre_cached(n: int):
    # Newton iteration on P_n from the Chebyshev-like initial guess
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p_prev = np.ones_like(x)
        p = x.copy()
        for m in range(1, n):
            p_prev, p = p, ((2 * m + 1) * x * p - m * p_prev) / (m + 1)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p_prev = np.ones_like(x)
    p = x.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * x * p - m * p_prev) / (m + 1)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if not isinstance(n, (int, np.integer)) or n < 1 or n > 64:
        raise InvalidOrder(f"Gauss-Legendre order must be in 1..64, got {n}")
    if n == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]), "segment")
    x, w = _gauss_legendre_cached(int(n))
    return QuadratureRule(x.copy(), w.copy(), "segment")


@lru_cache(maxsize=None)
def _gauss_log_cached(n: int):
    gl = gauss_legendre(n)
    s = 0.5 * (gl.nodes + 1.0)
    w = 0.5 * gl.weights
    # shifted Legendre values at the nodes
    x = 2.0 * s - 1.0
    table = np.empty((n, n))
    table[0] = 1.0
    if n > 1:
        table[1] = x
    for m in range(1, n - 1):
        table[m + 1] = ((2 * m + 1) * x * table[m] - m * table[m - 1]) / (m + 1)
    # int_0^1 P~_m(s) ln s ds
    m = np.arange(n)
    moments = np.where(m == 0, -1.0, (-1.0) ** (m + 1) / np.maximum(m * (m + 1), 1))
    weights = w * ((2 * m + 1)[:, None] * moments[:, None] * table).sum(axis=0)
    return s, weights


def gauss_log(n: int) -> QuadratureRule:
    """Product rule for int_0^1 f(s) ln(s) ds, exact for polynomials of degree < n.

    Interpolatory on the Gauss-Legendre nodes mapped to [0, 1].
    """
    if n < 1 or n > 64:
        raise InvalidOrder(f"order must be in 1..64, got {n}")
    s, w = _gauss_log_cached(int(n))
    return QuadratureRule(s.copy(), w.copy(), "log_segment")


def integrate_panel(panel: Panel2D, integrand, rule: QuadratureRule):
    """Sum of w_q |J(t_q)| f(y(t_q)) over the panel; ``integrand`` maps (n, 2) points to values."""
    y = panel.point(rule.nodes)
    vals = np.asarray(integrand(y))
    return np.sum(rule.weights * panel.jacobian(rule.nodes) * vals, axis=-1)


def _split_at(t0: float, n: int):
    """Gauss nodes on both sides of t0: parameters, distance scale and weights.

    On each side t = t0 -/+ half * s, s in (0, 1). The Gauss-log nodes are the
    Gauss-Legendre nodes on [0, 1], so one node set carries both the regular
    weights and the ``ln s`` product weights.
    """
    gl = gauss_legendre(n)
    glog = gauss_log(n)
    s = glog.nodes
    w_reg = 0.5 * gl.weights
    parts = []
    for sign, half in ((-1.0, t0 + 1.0), (1.0, 1.0 - t0)):
        if half > 0.0:
            parts.append((t0 + sign * half * s, half, w_reg * half, glog.weights * half))
    return parts


def integrate_panel_singular(panel: Panel2D, target, smooth_factor, kind: KernelKind,
                             part: str = "single_layer", n: int = 16):
    """Integral over a panel of a kernel that is singular at ``target`` on the panel.

    single_layer: int Phi(target, y) f(y) dS. Phi = c(r) ln r + R(r) with
    c = -J0(k r) / 2pi (Laplace: -1 / 2pi) and R smooth. On each side of the
    target ln r = ln(r / |t - t0|) + ln(half) + ln(s); the ``ln s`` part goes
    to the Gauss-log product rule, everything else to plain Gauss.
    double_layer: int dPhi/dn_y f dS, bounded on a smooth panel, by Gauss on
    both sides of the target.
    """
    target = np.asarray(target, dtype=float)
    t0 = panel.closest_parameter(target)
    if np.linalg.norm(panel.point(t0) - target) > 1e-10 * max(1.0, panel.length):
        raise TargetNotOnPanel("target does not lie on the panel")
    if part not in ("single_layer", "double_layer"):
        raise ValueError("part must be 'single_layer' or 'double_layer'")
    total = 0.0
    for t, half, w_reg, w_log in _split_at(t0, n):
        y = panel.point(t)
        f = smooth_factor(y) * panel.jacobian(t)
        if part == "double_layer":
            total = total + np.sum(w_reg * f * kernels.normal_derivative_y(kind, target, y, panel.normal(t)))
            continue
        r = np.linalg.norm(y - target, axis=-1)
        c = kernels.log_coefficient(kind, r)
        rest = kernels.fundamental_log_remainder(kind, r)
        smooth = rest + c * (np.log(r / np.abs(t - t0)) + math.log(half))
        total = total + np.sum(w_reg * f * smooth) + np.sum(w_log * f * c)
    return total


# ---------------------------------------------------------------------------
# triangles
# ---------------------------------------------------------------------------


def triangle_rule_7() -> QuadratureRule:
    """Symmetric 7-point rule on the unit triangle, exact for degree 5."""
    r15 = math.sqrt(15.0)
    a1 = (6.0 - r15) / 21.0
    a2 = (6.0 + r15) / 21.0
    w1 = (155.0 - r15) / 2400.0
    w2 = (155.0 + r15) / 2400.0
    nodes = np.array([
        [1.0 / 3.0, 1.0 / 3.0],
        [a1, a1], [1.0 - 2.0 * a1, a1], [a1, 1.0 - 2.0 * a1],
        [a2, a2], [1.0 - 2.0 * a2, a2], [a2, 1.0 - 2.0 * a2],
    ])
    weights = np.array([9.0 / 80.0, w1, w1, w1, w2, w2, w2])
    return QuadratureRule(nodes, weights, "unit_triangle")


@lru_cache(maxsize=None)
def subdivided_triangle_rule(levels: int):
    """7-point rule on each of the 4**levels congruent children of the unit triangle."""
    base = triangle_rule_7()
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
    for _ in range(levels):
        nxt = []
        for t in tris:
            m01, m12, m20 = 0.5 * (t[0] + t[1]), 0.5 * (t[1] + t[2]), 0.5 * (t[2] + t[0])
            nxt += [np.array([t[0], m01, m20]), np.array([m01, t[1], m12]),
                    np.array([m20, m12, t[2]]), np.array([m12, m20, m01])]
        tris = nxt
    nodes, weights = [], []
    for t in tris:
        e1, e2 = t[1] - t[0], t[2] - t[0]
        nodes.append(t[0] + base.nodes[:, :1] * e1 + base.nodes[:, 1:] * e2)
        weights.append(base.weights * abs(e1[0] * e2[1] - e1[1] * e2[0]))
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights), "unit_triangle")


def map_triangle(corners, rule: QuadratureRule):
    """Physical nodes and weights of a reference-triangle rule on ``corners`` (3, 3)."""
    corners = np.asarray(corners, dtype=float)
    e1 = corners[1] - corners[0]
    e2 = corners[2] - corners[0]
    area = 0.5 * np.linalg.norm(np.cross(e1, e2)) if corners.shape[-1] == 3 else 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    if area < 1e-14:
        raise DegenerateTriangle("triangle area below 1e-14")
    pts = corners[0] + rule.nodes[:, :1] * e1 + rule.nodes[:, 1:] * e2
    return pts, rule.weights * 2.0 * area


def integrate_triangle(corners, integrand, rule: QuadratureRule | None = None):
    rule = rule or triangle_rule_7()
    pts, w = map_triangle(corners, rule)
    return np.sum(w * np.asarray(integrand(pts)), axis=-1)


def duffy_centroid_rule(corners, n: int = 24):
    """Nodes/weights for a 1/r-singular integrand at the centroid.

    The triangle is split at its centroid into three sub-triangles; each is
    mapped from the unit square with the singular vertex collapsed, so the
    Jacobian carries a factor that cancels 1/r. Tensor Gauss-Legendre with
    ``n`` points per direction on each piece.
    """
    corners = np.asarray(corners, dtype=float)
    c = corners.mean(axis=0)
    gl = gauss_legendre(n)
    u = 0.5 * (gl.nodes + 1.0)
    wu = 0.5 * gl.weights
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu)
    pts, wts = [], []
    for i in range(3):
        a, b = corners[i], corners[(i + 1) % 3]
        # x = c + U * ((a - c) + V * (b - a)), Jacobian U * 2 * area(sub)
        sub_area = 0.5 * np.linalg.norm(np.cross(a - c, b - c))
        if sub_area < 1e-16:
            raise DegenerateTriangle("triangle area below 1e-14")
        x = c + U[..., None] * ((a - c) + V[..., None] * (b - a))
        pts.append(x.reshape(-1, corners.shape[1]))
        wts.append((W * U * 2.0 * sub_area).ravel())
    return np.concatenate(pts), np.concatenate(wts)


def integrate_triangle_singular(corners, kind: KernelKind, smooth_factor=None, n: int = 24):
    """int_T Phi(c, y) f(y) dS with c the centroid, for the 3D kernels."""
    corners = np.asarray(corners, dtype=float)
    c = corners.mean(axis=0)
    pts, w = duffy_centroid_rule(corners, n)
    vals = kernels.fundamental(kind, c, pts)
    if smooth_factor is not None:
        vals = vals * smooth_factor(pts)
    out = np.sum(w * vals)
    return out if kind.is_complex else out.real


def triangle_centroid_potential(corners) -> float:
    """Closed form of int_T dS / (4 pi |c - y|) at the centroid of a flat triangle.

    In polar coordinates about c the integral is (1/4pi) * sum over edges of
    int R(theta) dtheta with R = h / cos(psi); each edge gives
    h * [asinh(tan psi)] between its end angles.
    """
    return sum(_edge_polar_integrals(corners)[0]) / (4.0 * np.pi)


def triangle_centroid_inverse_radius(corners) -> float:
    """Closed form of the angular integral of 1 / R(theta) around the centroid."""
    return sum(_edge_polar_integrals(corners)[1])


def _edge_polar_integrals(corners):
    corners = np.asarray(corners, dtype=float)
    c = corners.mean(axis=0)
    out_r, out_inv = [], []
    for i in range(3):
        a, b = corners[i], corners[(i + 1) % 3]
        d = b - a
        s = np.dot(c - a, d) / np.dot(d, d)
        foot = a + s * d
        h = np.linalg.norm(c - foot)
        L = np.linalg.norm(d)
        # signed tangential coordinates of the ends relative to the foot
        ta = -s * L
        tb = (1.0 - s) * L
        psi_a, psi_b = math.atan2(ta, h), math.atan2(tb, h)
        out_r.append(h * (math.asinh(math.tan(psi_b)) - math.asinh(math.tan(psi_a))))
        out_inv.append((math.sin(psi_b) - math.sin(psi_a)) / h)
    return out_r, out_inv
