"""Collocation systems A beta = b for the boundary integral equations.

Sign convention. With the kernels of :mod:`bnmrf.kernels` (L_y Phi = delta,
outward normal n of the bounded region) Green's representation reads

    interior   u(x) = SL[du/dn](x) - DL[u](x)
    exterior   u(x) = DL[u](x) - SL[du/dn](x)      (radiating u)

with SL[f](x) = int Phi(x, y) f(y) dS and DL[f](x) = int dPhi/dn_y f dS.
On the boundary DL jumps by -f/2 (inside) and +f/2 (outside). The rows below
keep the layout of the mixed Dirichlet/Neumann collocation scheme: the
unknown trace q_D = du_M/dn on Dirichlet panels and g_N = u_M on Neumann
panels, known data g and q moved to the right-hand side.

A *trace basis* is anything with ``trace(points, normals, element)``
returning (values, normal derivatives), each of shape (n, columns): the
random-feature basis, the piecewise-constant BEM basis, or a single
analytic trace used by the consistency checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from . import kernels
from .errors import (
    NonDirichletPanel,
    UntaggedPanel,
    WrongOrientation,
    ZeroCouplingParameter,
)
from .geometry import BC, Boundary2D, Orientation, TriMesh
from .kernels import KernelKind
from .quadrature import _split_at, gauss_legendre, subdivided_triangle_rule, triangle_rule_7

#: targets closer to a panel than this many panel lengths get graded quadrature
NEAR_FACTOR = 1.0


# ---------------------------------------------------------------------------
# small trace bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionTrace:
    """One-column basis holding the exact traces of a known field."""

    value: object
    gradient: object

    def trace(self, points, normals, element=None):
        v = np.asarray(self.value(points))[..., None]
        g = np.asarray(self.gradient(points))
        return v, np.sum(g * normals, axis=-1)[..., None]

    def surface_gradient(self, points, element=None):
        return np.asarray(self.gradient(points))[..., None, :]


@dataclass(frozen=True)
class PanelConstantBasis:
    """Indicator functions of the boundary elements (constant-element BEM).

    In 2D column p carries the unknown of panel p: du/dn on a Dirichlet
    panel, u on a Neumann panel. In 3D (``tags`` all Neumann) it is the
    potential on triangle p.
    """

    tags: tuple

    @property
    def M(self) -> int:
        return len(self.tags)

    def trace(self, points, normals, element):
        element = np.asarray(element)
        n = len(self.tags)
        onehot = np.zeros(element.shape + (n,))
        np.put_along_axis(onehot, element[..., None], 1.0, axis=-1)
        neumann = np.array([t == BC.NEUMANN for t in self.tags])
        return onehot * neumann, onehot * ~neumann

    def surface_gradient(self, points, element):
        element = np.asarray(element)
        return np.zeros(element.shape + (len(self.tags), 3))

    def sparse_trace(self, element):
        """The two trace matrices of :meth:`trace` in sparse form, shape (n, M)."""
        element = np.asarray(element).ravel()
        neumann = np.array([t == BC.NEUMANN for t in self.tags])[element]
        rows = np.arange(len(element))
        shape = (len(element), len(self.tags))

        def build(mask):
            return sparse.csr_matrix((np.ones(mask.sum()), (rows[mask], element[mask])), shape=shape)

        return build(neumann), build(~neumann)


def _weighted_traces(W, basis, points, normals, element):
    """(W @ values, W @ normal derivatives) without densifying indicator bases."""
    if isinstance(basis, PanelConstantBasis):
        v, d = basis.sparse_trace(element)
        if sparse.issparse(W):
            return (W @ v).toarray(), (W @ d).toarray()
        return np.asarray((v.T @ W.T).T), np.asarray((d.T @ W.T).T)
    v, d = basis.trace(points, normals, element)
    return W @ v, W @ d


# ---------------------------------------------------------------------------
# 2D layer operators
# ---------------------------------------------------------------------------


@dataclass
class PanelOperators:
    """Quadrature weights of SL and DL for a fixed set of targets.

    Dense part: ``S[i, q]`` and ``D[i, q]`` over the regular Gauss nodes, with
    the entries of self and near panels removed. Extra part: per-target nodes
    (self-panel log rule, graded near-panel subdivision) stored as sparse
    weight matrices ``S_extra``/``D_extra`` of shape (targets, extra nodes).
    """

    boundary: Boundary2D
    kind: KernelKind
    targets: np.ndarray
    nodes: object
    S: np.ndarray
    D: np.ndarray
    extra_points: np.ndarray
    extra_normals: np.ndarray
    extra_panel: np.ndarray
    S_extra: sparse.csr_matrix
    D_extra: sparse.csr_matrix

    def node_mask(self, tag: BC):
        tags = np.array([t == tag for t in self.boundary.tags])
        return tags[self.nodes.panel], tags[self.extra_panel]

    def apply(self, which: str, node_vals, extra_vals, tag: BC | None = None):
        """SL or DL of a density given at the nodes, restricted to panels tagged ``tag``."""
        W = self.S if which == "S" else self.D
        E = self.S_extra if which == "S" else self.D_extra
        node_vals = np.asarray(node_vals)
        extra_vals = np.asarray(extra_vals)
        if tag is not None:
            m_nodes, m_extra = self.node_mask(tag)
            shape_n = (-1,) + (1,) * (node_vals.ndim - 1)
            shape_e = (-1,) + (1,) * (extra_vals.ndim - 1)
            node_vals = node_vals * m_nodes.reshape(shape_n)
            extra_vals = extra_vals * m_extra.reshape(shape_e)
        out = W @ node_vals
        if E.nnz:
            out = out + E @ extra_vals
        return out

    def basis_columns(self, basis):
        """(SL_D[dn], DL_N[value]) for every column of a trace basis."""
        nv, nd = basis.trace(self.nodes.points, self.nodes.normals, self.nodes.panel)
        if len(self.extra_panel):
            ev, ed = basis.trace(self.extra_points, self.extra_normals, self.extra_panel)
        else:
            ev = np.zeros((0,) + nv.shape[1:])
            ed = ev
        sl = self.apply("S", nd, ed, BC.DIRICHLET)
        dl = self.apply("D", nv, ev, BC.NEUMANN)
        return sl, dl

    def data_terms(self, g, q):
        """(DL_D[g], SL_N[q]) for Dirichlet data g(points) and Neumann data q(points, normals)."""
        n_tgt = len(self.targets)
        dtype = self.S.dtype
        dl = np.zeros(n_tgt, dtype=dtype)
        sl = np.zeros(n_tgt, dtype=dtype)
        has_d = BC.DIRICHLET in self.boundary.tags
        has_n = BC.NEUMANN in self.boundary.tags
        ep = self.extra_points
        if has_d and g is not None:
            gn = np.asarray(g(self.nodes.points))
            ge = np.asarray(g(ep)) if len(ep) else np.zeros(0)
            dl = self.apply("D", gn, ge, BC.DIRICHLET)
        if has_n and q is not None:
            qn = np.asarray(q(self.nodes.points, self.nodes.normals))
            qe = np.asarray(q(ep, self.extra_normals)) if len(ep) else np.zeros(0)
            sl = self.apply("S", qn, qe, BC.NEUMANN)
        return dl, sl

    def density_terms(self, value_fn, dn_fn):
        """SL[dn] and DL[value] over the whole boundary for callables of (points, normals, panel)."""
        nodes = self.nodes
        dn = dn_fn(nodes.points, nodes.normals, nodes.panel)
        val = value_fn(nodes.points, nodes.normals, nodes.panel)
        if len(self.extra_panel):
            dne = dn_fn(self.extra_points, self.extra_normals, self.extra_panel)
            vale = value_fn(self.extra_points, self.extra_normals, self.extra_panel)
        else:
            dne = vale = np.zeros(0)
        return self.apply("S", dn, dne), self.apply("D", val, vale)


def _graded_pieces(t_star: float, phys_len: float, dist: float):
    """Sub-intervals of [-1, 1] graded geometrically toward t_star.

    Pieces shrink by half toward t_star until the innermost one is no longer
    than ``dist`` in physical length; at least 8 pieces in total.
    """
    scale = 0.5 * phys_len  # physical length per unit parameter
    pieces = []
    for sign, span in ((-1.0, t_star + 1.0), (1.0, 1.0 - t_star)):
        if span <= 1e-15:
            continue
        levels = max(3, int(math.ceil(math.log2(max(span * scale / max(dist, 1e-300), 1.0)))) + 1)
        levels = min(levels, 60)
        edges = [span * 0.5**j for j in range(levels)] + [0.0]
        for j in range(levels):
            a, b = t_star + sign * edges[j + 1], t_star + sign * edges[j]
            pieces.append((min(a, b), max(a, b)))
    return pieces


def panel_operators(boundary: Boundary2D, kind: KernelKind, n_gauss: int, targets,
                    owners=None, owner_params=None) -> PanelOperators:
    """Quadrature weights for SL/DL at ``targets``.

    ``owners[i]`` is the panel on which target i lies (-1 for targets off the
    boundary) and ``owner_params[i]`` its parameter there (default 0, the
    midpoint). The owner panel is integrated with the Gauss-log split rule,
    panels closer than NEAR_FACTOR panel lengths with graded subdivision,
    everything else with plain Gauss.
    """
    if kind.dim != 2:
        raise ValueError("panel operators are two-dimensional")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n_tgt = len(targets)
    owners = np.full(n_tgt, -1) if owners is None else np.asarray(owners)
    owner_params = np.zeros(n_tgt) if owner_params is None else np.asarray(owner_params, dtype=float)
    rule = gauss_legendre(n_gauss)
    nodes = boundary.nodes(rule.nodes, rule.weights)
    n_pan = len(boundary)

    R = targets[:, None, :] - nodes.points[None, :, :]
    r = np.sqrt(np.sum(R * R, axis=-1))

    # pairs needing special treatment
    mids = boundary.midpoints
    lengths = boundary.lengths
    dmid = np.linalg.norm(targets[:, None, :] - mids[None, :, :], axis=-1)
    candidate = dmid < (NEAR_FACTOR + 0.5 * np.pi) * lengths[None, :]
    special = np.zeros((n_tgt, n_pan), dtype=bool)
    special[np.arange(n_tgt)[owners >= 0], owners[owners >= 0]] = True
    near_info = {}
    for i, p in zip(*np.nonzero(candidate)):
        if owners[i] == p:
            continue
        panel = boundary.panels[p]
        t_star = panel.closest_parameter(targets[i])
        d = float(np.linalg.norm(panel.point(t_star) - targets[i]))
        if d < NEAR_FACTOR * lengths[p]:
            special[i, p] = True
            near_info[(i, p)] = (t_star, d)

    mask = special[:, nodes.panel]
    r_safe = np.where(mask, 1.0, r)
    if np.any(r_safe < kernels.COINCIDENCE_TOL):
        raise kernels.CoincidentPoints("target coincides with a quadrature node")
    g0, g1 = kernels.radial(kind, r_safe, 1)
    S = g0 * nodes.weights
    D = -g1 * np.sum(R * nodes.normals[None, :, :], axis=-1) / r_safe * nodes.weights
    S[mask] = 0.0
    D[mask] = 0.0

    ex_pts, ex_nrm, ex_pan, rows, ws, wd = [], [], [], [], [], []
    n_sing = max(n_gauss, 10)
    for i, p in zip(*np.nonzero(special)):
        panel = boundary.panels[p]
        x = targets[i]
        if owners[i] == p:
            t0 = float(owner_params[i])
            for t, half, w_reg, w_log in _split_at(t0, n_sing):
                y = panel.point(t)
                nrm = panel.normal(t)
                jac = panel.jacobian(t)
                rr = np.linalg.norm(y - x, axis=-1)
                c = kernels.log_coefficient(kind, rr)
                rest = kernels.fundamental_log_remainder(kind, rr)
                smooth = rest + c * (np.log(rr / np.abs(t - t0)) + math.log(half))
                ws.append((w_reg * smooth + w_log * c) * jac)
                wd.append(w_reg * jac * kernels.normal_derivative_y(kind, x, y, nrm))
                ex_pts.append(y)
                ex_nrm.append(nrm)
                ex_pan.append(np.full(len(t), p))
                rows.append(np.full(len(t), i))
        else:
            t_star, d = near_info[(i, p)]
            ts, wts = [], []
            for a, b in _graded_pieces(t_star, lengths[p], d):
                ts.append(0.5 * (a + b) + 0.5 * (b - a) * rule.nodes)
                wts.append(0.5 * (b - a) * rule.weights)
            t = np.concatenate(ts)
            w = np.concatenate(wts) * panel.jacobian(t)
            y = panel.point(t)
            nrm = panel.normal(t)
            ws.append(w * kernels.fundamental(kind, x, y))
            wd.append(w * kernels.normal_derivative_y(kind, x, y, nrm))
            ex_pts.append(y)
            ex_nrm.append(nrm)
            ex_pan.append(np.full(len(t), p))
            rows.append(np.full(len(t), i))

    if rows:
        rows = np.concatenate(rows)
        cols = np.arange(len(rows))
        shape = (n_tgt, len(rows))
        S_extra = sparse.csr_matrix((np.concatenate(ws).astype(S.dtype), (rows, cols)), shape=shape)
        D_extra = sparse.csr_matrix((np.concatenate(wd).astype(D.dtype), (rows, cols)), shape=shape)
        ex_pts, ex_nrm, ex_pan = np.concatenate(ex_pts), np.concatenate(ex_nrm), np.concatenate(ex_pan)
    else:
        S_extra = sparse.csr_matrix((n_tgt, 0), dtype=S.dtype)
        D_extra = sparse.csr_matrix((n_tgt, 0), dtype=D.dtype)
        ex_pts, ex_nrm, ex_pan = np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
    return PanelOperators(boundary, kind, targets, nodes, S, D, ex_pts, ex_nrm, ex_pan, S_extra, D_extra)


def collocation_operators(boundary: Boundary2D, kind: KernelKind, n_gauss: int) -> PanelOperators:
    """Operators at the panel midpoints, each midpoint owned by its panel."""
    return panel_operators(boundary, kind, n_gauss, boundary.midpoints, owners=np.arange(len(boundary)))


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass
class BIESystem:
    A: np.ndarray
    b: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    tags: tuple
    problem: str
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.A.shape

    def residual(self, coefficients):
        return self.A @ coefficients - self.b

    def dump(self, path) -> None:
        """Write A and b as coordinate lists ('i j re im'), matrix-market style."""
        A = np.asarray(self.A, dtype=complex)
        lines = ["%%MatrixMarket matrix coordinate complex general",
                 f"{A.shape[0]} {A.shape[1] + 1} {A.size + len(self.b)}"]
        for i in range(A.shape[0]):
            for j in range(A.shape[1]):
                lines.append(f"{i + 1} {j + 1} {float(A[i, j].real)!r} {float(A[i, j].imag)!r}")
            bi = complex(self.b[i])
            lines.append(f"{i + 1} {A.shape[1] + 1} {float(bi.real)!r} {float(bi.imag)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _check_tags(boundary: Boundary2D):
    for t in boundary.tags:
        if t not in (BC.DIRICHLET, BC.NEUMANN):
            raise UntaggedPanel(f"panel tag {t!r} is neither Dirichlet nor Neumann")


def assemble_interior_mixed(boundary: Boundary2D, basis, kind: KernelKind, n_gauss: int = 10,
                            g=None, q=None, operators: PanelOperators | None = None) -> BIESystem:
    """Rows of the mixed interior problem at the panel midpoints.

    Dirichlet row:  SL_D[q_D] - DL_N[g_N]           = g/2 + DL_D[g] - SL_N[q]
    Neumann row:    SL_D[q_D] - DL_N[g_N] - g_N / 2 = DL_D[g] - SL_N[q]
    """
    if boundary.orientation != Orientation.INTERIOR:
        raise WrongOrientation("interior assembly needs an interior_domain boundary")
    _check_tags(boundary)
    ops = operators or collocation_operators(boundary, kind, n_gauss)
    pts, nrm = boundary.midpoints, boundary.mid_normals
    owners = np.arange(len(boundary))
    is_d = np.array([t == BC.DIRICHLET for t in boundary.tags])

    sl, dl = ops.basis_columns(basis)
    values, _ = basis.trace(pts, nrm, owners)
    A = sl - dl - 0.5 * values * (~is_d)[:, None]

    dl_g, sl_q = ops.data_terms(g, q)
    b = dl_g - sl_q
    if np.any(is_d):
        gd = np.zeros(len(pts), dtype=np.result_type(b, float))
        gd[is_d] = np.asarray(g(pts[is_d]))
        b = b + 0.5 * gd * is_d
    return BIESystem(np.asarray(A), np.asarray(b), pts, nrm, boundary.tags, "interior_mixed")


def assemble_exterior_dirichlet(boundary: Boundary2D, basis, kind: KernelKind, n_gauss: int = 10,
                                g=None, operators: PanelOperators | None = None) -> BIESystem:
    """Exterior Dirichlet rows: SL[q_D](x_i) = DL[g](x_i) - g(x_i)/2.

    The outside limit of the radiating representation u = DL[u] - SL[du/dn].
    """
    if boundary.orientation != Orientation.EXTERIOR:
        raise WrongOrientation("exterior assembly needs an exterior_domain boundary")
    if any(t != BC.DIRICHLET for t in boundary.tags):
        raise NonDirichletPanel("exterior problems here are pure Dirichlet")
    ops = operators or collocation_operators(boundary, kind, n_gauss)
    pts, nrm = boundary.midpoints, boundary.mid_normals
    sl, _ = ops.basis_columns(basis)
    dl_g, _ = ops.data_terms(g, None)
    b = dl_g - 0.5 * np.asarray(g(pts))
    return BIESystem(np.asarray(sl), np.asarray(b), pts, nrm, boundary.tags, "exterior_dirichlet")


# ---------------------------------------------------------------------------
# plane wave and 3D Burton-Miller
# ---------------------------------------------------------------------------


def plane_wave(amplitude: float, k: float, direction, x):
    """A exp(i k d.x) and its gradient i k d A exp(i k d.x)."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("propagation direction must be a unit vector")
    x = np.asarray(x, dtype=float)
    val = amplitude * np.exp(1j * k * (x @ d))
    return val, 1j * k * val[..., None] * d


def default_coupling(k: float) -> complex:
    return 1j / (k + 1.0)


def adaptive_triangle_nodes(corners, targets, max_level: int = 3, eta: float = 1.0):
    """Adaptive 7-point quadrature of triangles around nearby targets.

    ``corners`` (P, 3, 3) and ``targets`` (P, 3) describe P (triangle, target)
    pairs. A (sub)triangle whose centroid is closer than ``eta`` times its
    longest edge to its target is split into four, up to ``max_level``
    times. Returns (pair index, nodes, weights) of all leaves.
    """
    base = triangle_rule_7()
    tri = np.asarray(corners, dtype=float)
    targets = np.asarray(targets, dtype=float)
    owner = np.arange(len(tri))
    out_i, out_p, out_w = [], [], []
    for level in range(max_level + 1):
        if not len(tri):
            break
        edges = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 1], tri[:, 0] - tri[:, 2]], axis=1)
        size = np.linalg.norm(edges, axis=-1).max(axis=1)
        near = np.linalg.norm(tri.mean(axis=1) - targets[owner], axis=-1) < eta * size
        split = near if level < max_level else np.zeros_like(near)
        leaf = tri[~split]
        if len(leaf):
            e1, e2 = leaf[:, 1] - leaf[:, 0], leaf[:, 2] - leaf[:, 0]
            area2 = np.linalg.norm(np.cross(e1, e2), axis=-1)
            pts = leaf[:, None, 0] + base.nodes[None, :, :1] * e1[:, None] + base.nodes[None, :, 1:] * e2[:, None]
            out_p.append(pts.reshape(-1, 3))
            out_w.append((base.weights[None, :] * area2[:, None]).ravel())
            out_i.append(np.repeat(owner[~split], len(base.weights)))
        t = tri[split]
        owner = owner[split]
        m01, m12, m20 = 0.5 * (t[:, 0] + t[:, 1]), 0.5 * (t[:, 1] + t[:, 2]), 0.5 * (t[:, 2] + t[:, 0])
        children = [np.stack(c, axis=1) for c in ((t[:, 0], m01, m20), (m01, t[:, 1], m12),
                                                     (m20, m12, t[:, 2]), (m12, m20, m01))]
        tri = np.concatenate(children)
        owner = np.tile(owner, 4)
    if not out_i:
        return np.zeros(0, dtype=int), np.zeros((0, 3)), np.zeros(0)
    return np.concatenate(out_i), np.concatenate(out_p), np.concatenate(out_w)


def _self_polar_nodes(corners, n_angle: int, n_radial: int):
    """Polar nodes about the centroid of a flat triangle.

    Returns per-direction data: unit directions e (A, 3), edge distances R (A,),
    angular weights (A,), radial nodes r (A, n_r) and radial weights (A, n_r).
    """
    corners = np.asarray(corners, dtype=float)
    c = corners.mean(axis=0)
    gl_a = gauss_legendre(n_angle)
    gl_r = gauss_legendre(n_radial)
    dirs, radii, wang = [], [], []
    for i in range(3):
        a, b = corners[i], corners[(i + 1) % 3]
        d = b - a
        L = np.linalg.norm(d)
        u_tan = d / L
        s = np.dot(c - a, u_tan)
        foot = a + s * u_tan
        h = np.linalg.norm(foot - c)
        u_perp = (foot - c) / h
        psi_a, psi_b = math.atan2(-s, h), math.atan2(L - s, h)
        psi = 0.5 * (psi_a + psi_b) + 0.5 * (psi_b - psi_a) * gl_a.nodes
        dirs.append(np.cos(psi)[:, None] * u_perp + np.sin(psi)[:, None] * u_tan)
        radii.append(h / np.cos(psi))
        wang.append(0.5 * (psi_b - psi_a) * gl_a.weights)
    e = np.concatenate(dirs)
    R = np.concatenate(radii)
    w = np.concatenate(wang)
    r = 0.5 * R[:, None] * (gl_r.nodes[None, :] + 1.0)
    wr = 0.5 * R[:, None] * gl_r.weights[None, :]
    return c, e, R, w, r, wr


def hypersingular_self(kind: KernelKind, corners, basis, element: int, n_angle: int = 12, n_radial: int = 12):
    """Finite-part value of int_T d^2Phi/dn_x dn_y (c, y) f(y) dS at the centroid c.

    For a flat triangle the kernel in the plane is F(r) / r^3 with
    F = exp(ikr)(1 - ikr) / 4pi. In polar coordinates about c, with
    G(r) = F(r) f(c + r e) = G0 + G1 r + O(r^2), the radial finite part is
    -G0 / R + G1 ln R + int_0^R (G - G0 - G1 r) / r^2 dr; the ln of the cut-off
    cancels because G1 is odd in the direction. Returns one value per column.
    """
    c, e, R, w, r, wr = _self_polar_nodes(corners, n_angle, n_radial)
    k = kind.k if kind.operator == "helmholtz" else 0.0
    pts = c + r[..., None] * e[:, None, :]
    n_dirs, n_r = r.shape
    elem = np.full(n_dirs * n_r, element)
    vals, _ = basis.trace(pts.reshape(-1, 3), np.zeros((n_dirs * n_r, 3)), elem)
    vals = vals.reshape(n_dirs, n_r, -1)
    f0, _ = basis.trace(c[None, :], np.zeros((1, 3)), np.array([element]))
    grad0 = basis.surface_gradient(c[None, :], np.array([element]))[0]  # (M, 3)
    f0 = f0[0]
    f1 = e @ grad0.T  # (A, M)
    F = np.exp(1j * k * r) * (1.0 - 1j * k * r) / (4 * np.pi)
    G0 = f0[None, :] / (4 * np.pi)
    G1 = f1 / (4 * np.pi)
    G = F[..., None] * vals
    rest = (G - G0[:, None, :] - G1[:, None, :] * r[..., None]) / (r * r)[..., None]
    radial = -G0 / R[:, None] + G1 * np.log(R)[:, None] + np.sum(wr[..., None] * rest, axis=1)
    return np.sum(w[:, None] * radial, axis=0)


@dataclass
class MeshOperators:
    """Quadrature weights of the double-layer (M_k) and hypersingular (N_k) actions.

    Far triangles use the 7-point rule (dense ``Dw``/``Hw`` over all rule
    nodes, near entries zeroed); near triangles use adaptive nodes listed per
    target in ``extra_rows`` order.
    """

    mesh: TriMesh
    kind: KernelKind
    targets: np.ndarray
    target_normals: np.ndarray | None
    points: np.ndarray
    element: np.ndarray
    Dw: np.ndarray
    Hw: np.ndarray | None
    extra_rows: np.ndarray
    extra_points: np.ndarray
    extra_element: np.ndarray
    extra_wd: np.ndarray
    extra_wh: np.ndarray | None
    owners: np.ndarray

    def _extra_sum(self, weights, values_fn, chunk: int = 200_000):
        """sum over extra nodes of weight * values, grouped by target row."""
        out = None
        n = len(self.extra_rows)
        for s in range(0, n, chunk):
            sl = slice(s, min(n, s + chunk))
            vals = values_fn(self.extra_points[sl], self.extra_element[sl])
            W = sparse.csr_matrix((weights[sl], (self.extra_rows[sl], np.arange(sl.stop - sl.start))),
                                  shape=(len(self.targets), sl.stop - sl.start))
            part = W @ vals
            part = part.toarray() if sparse.issparse(part) else np.asarray(part)
            out = part if out is None else out + part
        return out

    def apply(self, basis):
        """(M_k f, N_k f) at the targets for every column of ``basis``; N_k is None without normals."""
        zeros = np.zeros((len(self.points), 3))
        dl, _ = _weighted_traces(self.Dw, basis, self.points, zeros, self.element)
        hs = None if self.Hw is None else _weighted_traces(self.Hw, basis, self.points, zeros, self.element)[0]
        if len(self.extra_rows):
            if isinstance(basis, PanelConstantBasis):
                def values(p, e):
                    return basis.sparse_trace(e)[0]
            else:
                def values(p, e):
                    return basis.trace(p, np.zeros_like(p), e)[0]
            dl = dl + self._extra_sum(self.extra_wd, values)
            if hs is not None:
                hs = hs + self._extra_sum(self.extra_wh, values)
        if hs is not None:
            corners = self.mesh.corners()
            for i, t in enumerate(self.owners):
                if t >= 0:
                    hs[i] += hypersingular_self(self.kind, corners[t], basis, int(t))
        return dl, hs

    def apply_density(self, density):
        """M_k of a density callable density(points, element) (reconstruction path)."""
        dl = self.Dw @ density(self.points, self.element)
        if len(self.extra_rows):
            dl = dl + self._extra_sum(self.extra_wd, density)
        return dl


def mesh_operators(mesh: TriMesh, kind: KernelKind, targets, target_normals=None, owners=None,
                   near_factor: float = 2.0, max_level: int = 4, eta: float = 1.5) -> MeshOperators:
    """Weights for M_k (and N_k when target normals are given) at the targets.

    Triangles owning a target are skipped here (flat: the M_k self term is 0;
    the N_k self term is added by :func:`hypersingular_self`). Triangles whose
    centroid is within ``near_factor`` longest edges of a target are
    integrated with :func:`adaptive_triangle_nodes`; all others with the
    7-point rule.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n_tgt = len(targets)
    owners = np.full(n_tgt, -1) if owners is None else np.asarray(owners)
    rule = triangle_rule_7()
    corners = mesh.corners()
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    pts = corners[:, None, 0, :] + rule.nodes[None, :, :1] * e1[:, None, :] + rule.nodes[None, :, 1:] * e2[:, None, :]
    wts = rule.weights[None, :] * (2.0 * mesh.areas)[:, None]
    nq = len(rule.weights)
    points = pts.reshape(-1, 3)
    weights = wts.ravel()
    element = np.repeat(np.arange(len(mesh)), nq)
    normals_q = np.repeat(mesh.normals, nq, axis=0)

    size = mesh.size()
    dist_c = np.linalg.norm(targets[:, None, :] - mesh.centroids[None, :, :], axis=-1)
    special = dist_c < near_factor * size[None, :]
    has_owner = owners >= 0
    special[np.nonzero(has_owner)[0], owners[has_owner]] = True

    Dw = np.zeros((n_tgt, len(points)), dtype=complex)
    Hw = None if target_normals is None else np.zeros((n_tgt, len(points)), dtype=complex)
    chunk = max(1, 2_000_000 // max(len(points), 1))
    for s in range(0, n_tgt, chunk):
        sl = slice(s, s + chunk)
        mask = special[sl][:, element]
        R = targets[sl, None, :] - points[None, :, :]
        r = np.where(mask, 1.0, np.sqrt(np.sum(R * R, axis=-1)))
        if target_normals is None:
            g0, g1 = kernels.radial(kind, r, 1)
        else:
            g0, g1, g2 = kernels.radial(kind, r, 2)
        ry = np.sum(R * normals_q[None, :, :], axis=-1)
        Dw[sl] = np.where(mask, 0.0, -g1 * ry / r * weights)
        if Hw is not None:
            nx = target_normals[sl]
            rx = np.sum(R * nx[:, None, :], axis=-1)
            nn = (nx @ mesh.normals.T)[:, element]
            h = -((g2 - g1 / r) * rx * ry / (r * r) + g1 * nn / r)
            Hw[sl] = np.where(mask, 0.0, h * weights)

    pair_t, pair_e = np.nonzero(special)
    keep = owners[pair_t] != pair_e
    pair_t, pair_e = pair_t[keep], pair_e[keep]
    idx, ex_p, w = adaptive_triangle_nodes(corners[pair_e], targets[pair_t], max_level, eta)
    order = np.argsort(pair_t[idx], kind="stable")
    idx, ex_p, w = idx[order], ex_p[order], w[order]
    rows = pair_t[idx]
    ex_e = pair_e[idx]
    x = targets[rows]
    n_y = mesh.normals[ex_e]
    wd = w * kernels.normal_derivative_y(kind, x, ex_p, n_y) if len(w) else np.zeros(0, dtype=complex)
    wh = None
    if target_normals is not None:
        wh = w * kernels.hypersingular(kind, x, ex_p, target_normals[rows], n_y) if len(w) else np.zeros(0, dtype=complex)
    return MeshOperators(mesh, kind, targets, target_normals, points, element, Dw, Hw,
                         rows, ex_p, ex_e, np.asarray(wd, dtype=complex),
                         None if wh is None else np.asarray(wh, dtype=complex), owners)


def burton_miller_operators(mesh: TriMesh, kind: KernelKind) -> MeshOperators:
    return mesh_operators(mesh, kind, mesh.centroids, mesh.normals, owners=np.arange(len(mesh)))


def assemble_burton_miller(mesh: TriMesh, basis, kind: KernelKind, amplitude: float = 1.0,
                           direction=(0.0, 0.0, 1.0), mu: complex | None = None,
                           operators: MeshOperators | None = None) -> BIESystem:
    """Sound-hard scattering rows (v = 0): [M_k - I/2 + mu N_k] phi = -phi_inc - mu v_inc."""
    if kind.operator != "helmholtz" or kind.dim != 3:
        raise ValueError("Burton-Miller assembly needs a 3D Helmholtz kernel")
    mu = default_coupling(kind.k) if mu is None else complex(mu)
    if mu == 0:
        raise ZeroCouplingParameter("coupling parameter must be nonzero")
    ops = operators or burton_miller_operators(mesh, kind)
    pts, nrm = mesh.centroids, mesh.normals
    dl, hs = ops.apply(basis)
    vals, _ = basis.trace(pts, nrm, np.arange(len(mesh)))
    A = dl - 0.5 * vals + mu * hs
    inc, grad = plane_wave(amplitude, kind.k, direction, pts)
    v_inc = np.sum(grad * nrm, axis=-1)
    b = -inc - mu * v_inc
    system = BIESystem(A, b, pts, nrm, tuple([BC.NEUMANN] * len(mesh)), "burton_miller")
    system.meta.update(mu=mu, amplitude=amplitude, direction=tuple(direction))
    return system
