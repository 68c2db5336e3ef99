"""Boundary discretizations: 2D panel curves and 3D triangle meshes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyPointSet, InvalidResolution, MeshFormatError


class BC(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class Orientation(str, Enum):
    INTERIOR = "interior_domain"
    EXTERIOR = "exterior_domain"


@dataclass(frozen=True)
class Panel2D:
    """A straight segment or a circular arc, parametrized by t in [-1, 1].

    Arc panels run from angle ``theta0`` to ``theta1`` about ``center``; the
    outward normal is radial with sign ``normal_sign`` (+1 away from the
    center).
    """

    a: np.ndarray
    b: np.ndarray
    center: np.ndarray | None = None
    radius: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0
    normal_sign: float = 1.0
    fixed_normal: np.ndarray | None = None

    @property
    def is_arc(self) -> bool:
        return self.center is not None

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_arc:
            th = self._theta(t)
            return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        return 0.5 * (self.a + self.b) + 0.5 * t[..., None] * (self.b - self.a)

    def normal(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_arc:
            th = self._theta(t)
            return self.normal_sign * np.stack([np.cos(th), np.sin(th)], axis=-1)
        if self.fixed_normal is not None:
            nrm = self.fixed_normal
        else:
            d = (self.b - self.a) / self.length
            nrm = np.array([d[1], -d[0]])
        return np.broadcast_to(nrm, t.shape + (2,)).copy()

    def jacobian(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, 0.5 * self.length)

    def _theta(self, t):
        return 0.5 * (self.theta0 + self.theta1) + 0.5 * t * (self.theta1 - self.theta0)

    @property
    def length(self) -> float:
        if self.is_arc:
            return self.radius * abs(self.theta1 - self.theta0)
        return float(np.linalg.norm(self.b - self.a))

    @property
    def midpoint(self) -> np.ndarray:
        return self.point(0.0)

    @property
    def mid_normal(self) -> np.ndarray:
        return self.normal(0.0)

    def closest_parameter(self, x) -> float:
        """Parameter of the point of the panel closest to ``x``."""
        x = np.asarray(x, dtype=float)
        if self.is_arc:
            ang = math.atan2(x[1] - self.center[1], x[0] - self.center[0])
            mid = 0.5 * (self.theta0 + self.theta1)
            half = 0.5 * (self.theta1 - self.theta0)
            ang = mid + (ang - mid + math.pi) % (2 * math.pi) - math.pi
            t = (ang - mid) / half
            if abs(t) <= 1.0:
                return float(t)
            da = np.linalg.norm(x - self.a)
            db = np.linalg.norm(x - self.b)
            return -1.0 if da < db else 1.0
        d = self.b - self.a
        s = float(np.dot(x - self.a, d) / np.dot(d, d))
        return float(np.clip(2.0 * s - 1.0, -1.0, 1.0))

    def distance(self, x) -> float:
        return float(np.linalg.norm(self.point(self.closest_parameter(x)) - np.asarray(x)))


def line_panel(a, b) -> Panel2D:
    return Panel2D(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def arc_panel(center, radius, theta0, theta1, normal_sign=1.0) -> Panel2D:
    center = np.asarray(center, dtype=float)
    a = center + radius * np.array([math.cos(theta0), math.sin(theta0)])
    b = center + radius * np.array([math.cos(theta1), math.sin(theta1)])
    return Panel2D(a, b, center, float(radius), float(theta0), float(theta1), float(normal_sign))


@dataclass(frozen=True)
class PanelNodes:
    """Quadrature nodes of a whole boundary, flattened panel by panel."""

    points: np.ndarray  # (Q, 2)
    normals: np.ndarray  # (Q, 2)
    weights: np.ndarray  # (Q,) rule weight times Jacobian
    panel: np.ndarray  # (Q,) owning panel index


@dataclass(frozen=True)
class Boundary2D:
    panels: tuple[Panel2D, ...]
    tags: tuple[BC, ...]
    orientation: Orientation = Orientation.INTERIOR
    name: str = "curve"

    def __post_init__(self):
        if len(self.panels) != len(self.tags):
            raise ValueError("one tag per panel required")

    def __len__(self):
        return len(self.panels)

    def with_tags(self, tags) -> "Boundary2D":
        if callable(tags):
            tags = [tags(i, p) for i, p in enumerate(self.panels)]
        return Boundary2D(self.panels, tuple(BC(t) for t in tags), self.orientation, self.name)

    def with_orientation(self, orientation) -> "Boundary2D":
        return Boundary2D(self.panels, self.tags, Orientation(orientation), self.name)

    @property
    def midpoints(self) -> np.ndarray:
        return np.array([p.midpoint for p in self.panels])

    @property
    def mid_normals(self) -> np.ndarray:
        return np.array([p.mid_normal for p in self.panels])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([p.length for p in self.panels])

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    def vertices(self) -> np.ndarray:
        return np.array([p.a for p in self.panels])

    def closure_gap(self) -> float:
        gaps = [np.linalg.norm(p.b - q.a) for p, q in zip(self.panels, self.panels[1:] + self.panels[:1])]
        return float(max(gaps))

    def bounding_box(self):
        pts = self.sample(8)
        return pts.min(axis=0), pts.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def sample(self, per_panel: int) -> np.ndarray:
        """Points at equally spaced parameters on every panel, endpoints included."""
        t = np.linspace(-1.0, 1.0, per_panel + 1)
        return np.concatenate([p.point(t) for p in self.panels])

    def nodes(self, rule_nodes, rule_weights) -> PanelNodes:
        t = np.asarray(rule_nodes, dtype=float)
        w = np.asarray(rule_weights, dtype=float)
        pts = np.concatenate([p.point(t) for p in self.panels])
        nrm = np.concatenate([p.normal(t) for p in self.panels])
        wts = np.concatenate([w * p.jacobian(t) for p in self.panels])
        idx = np.repeat(np.arange(len(self.panels)), len(t))
        return PanelNodes(pts, nrm, wts, idx)

    def polygon(self, per_panel: int = 8) -> np.ndarray:
        t = np.linspace(-1.0, 1.0, per_panel + 1)[:-1]
        return np.concatenate([p.point(t) for p in self.panels])

    def signed_area(self) -> float:
        poly = self.polygon()
        x, y = poly[:, 0], poly[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def winding_number(self, points) -> np.ndarray:
        """Winding number of the closed curve around each point (fine polygon)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.polygon(16)
        d0 = poly[None, :, :] - pts[:, None, :]
        d1 = np.roll(poly, -1, axis=0)[None, :, :] - pts[:, None, :]
        cross = d0[..., 0] * d1[..., 1] - d0[..., 1] * d1[..., 0]
        dot = (d0 * d1).sum(axis=-1)
        return np.rint(np.arctan2(cross, dot).sum(axis=1) / (2 * np.pi)).astype(int)

    def contains(self, points) -> np.ndarray:
        return self.winding_number(points) != 0

    def distance(self, points) -> np.ndarray:
        """Distance from each point to the discretized curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.polygon(16)
        a = poly[None, :, :]
        b = np.roll(poly, -1, axis=0)[None, :, :]
        d = b - a
        s = np.clip(((pts[:, None, :] - a) * d).sum(-1) / (d * d).sum(-1), 0.0, 1.0)
        proj = a + s[..., None] * d
        return np.linalg.norm(pts[:, None, :] - proj, axis=-1).min(axis=1)

    def arclength_position(self, x) -> float:
        """Arc-length coordinate of the point of the curve closest to ``x``."""
        dists = [p.distance(x) for p in self.panels]
        i = int(np.argmin(dists))
        t = self.panels[i].closest_parameter(x)
        start = float(self.lengths[:i].sum())
        return start + 0.5 * (t + 1.0) * self.panels[i].length


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------


def unit_square(n_panels: int, tags=BC.DIRICHLET) -> Boundary2D:
    """[0, 1]^2, counterclockwise from the origin, n_panels / 4 per side."""
    if n_panels < 4 or n_panels % 4:
        raise InvalidResolution("unit_square needs a positive multiple of 4 panels")
    per_side = n_panels // 4
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    panels = []
    for c in range(4):
        p0, p1 = corners[c], corners[(c + 1) % 4]
        s = np.linspace(0.0, 1.0, per_side + 1)
        pts = p0 + s[:, None] * (p1 - p0)
        panels.extend(line_panel(pts[i], pts[i + 1]) for i in range(per_side))
    return _tagged(panels, tags, "unit_square")


def circle(radius: float, n_panels: int, tags=BC.DIRICHLET) -> Boundary2D:
    if n_panels < 4:
        raise InvalidResolution("circle needs at least 4 panels")
    th = np.linspace(0.0, 2 * np.pi, n_panels + 1)
    panels = [arc_panel((0.0, 0.0), radius, th[i], th[i + 1]) for i in range(n_panels)]
    return _tagged(panels, tags, "circle")


def flower(n_panels: int, tags=BC.DIRICHLET) -> Boundary2D:
    """Five outward unit semicircles on the edges of a regular pentagon of side 2."""
    if n_panels < 5 or n_panels % 5:
        raise InvalidResolution("flower needs a positive multiple of 5 panels")
    per_arc = n_panels // 5
    circum = 1.0 / math.sin(math.pi / 5)
    verts = [circum * np.array([math.cos(a), math.sin(a)]) for a in np.pi / 2 + 2 * np.pi * np.arange(5) / 5]
    panels = []
    for i in range(5):
        v0, v1 = verts[i], verts[(i + 1) % 5]
        mid = 0.5 * (v0 + v1)
        e = v1 - v0
        base = math.atan2(e[1], e[0])
        th = np.linspace(base + np.pi, base + 2 * np.pi, per_arc + 1)
        panels.extend(arc_panel(mid, 1.0, th[j], th[j + 1]) for j in range(per_arc))
    return _tagged(panels, tags, "flower")


def star_radius(theta):
    return 1.0 + 0.2 * np.cos(5.0 * theta)


def star_normal(theta):
    """Outward unit normal of the star curve at parameter theta."""
    theta = np.asarray(theta, dtype=float)
    r = star_radius(theta)
    dr = -np.sin(5.0 * theta)
    tx = dr * np.cos(theta) - r * np.sin(theta)
    ty = dr * np.sin(theta) + r * np.cos(theta)
    n = np.stack([ty, -tx], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def star(n_panels: int, tags=BC.DIRICHLET) -> Boundary2D:
    """Chords of r(theta) = 1 + 0.2 cos(5 theta) at equal parameter steps."""
    if n_panels < 4:
        raise InvalidResolution("star needs at least 4 panels")
    th = np.linspace(0.0, 2 * np.pi, n_panels + 1)
    r = star_radius(th)
    pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    pts[-1] = pts[0]
    normals = star_normal(0.5 * (th[:-1] + th[1:]))
    panels = [Panel2D(pts[i], pts[i + 1], fixed_normal=normals[i]) for i in range(n_panels)]
    return _tagged(panels, tags, "star")


def _tagged(panels, tags, name) -> Boundary2D:
    if isinstance(tags, (str, BC)):
        tag_list = [BC(tags)] * len(panels)
    elif callable(tags):
        tag_list = [BC(tags(i, p)) for i, p in enumerate(panels)]
    else:
        tag_list = [BC(t) for t in tags]
    return Boundary2D(tuple(panels), tuple(tag_list), Orientation.INTERIOR, name)


def make_shape(shape: str, n_panels: int = 100, **params):
    """Build a named shape: unit_square, circle, flower, star or sphere."""
    if shape == "unit_square":
        return unit_square(n_panels, **params)
    if shape == "circle":
        return circle(params.pop("radius", 1.0), n_panels, **params)
    if shape == "flower":
        return flower(n_panels, **params)
    if shape == "star":
        return star(n_panels, **params)
    if shape == "sphere":
        return uv_sphere(params.get("radius", 1.0), params.get("slices", 18), params.get("stacks", 19))
    raise ValueError(f"unknown shape {shape!r}")


def collocation_points(boundary):
    """Midpoints (curves) or centroids (meshes) with their normals and tags."""
    if isinstance(boundary, TriMesh):
        return boundary.centroids, boundary.normals, [BC.NEUMANN] * len(boundary)
    return boundary.midpoints, boundary.mid_normals, list(boundary.tags)


def fill_distance(boundary: Boundary2D, points, refine: int = 10) -> float:
    """Largest arc-length distance from the curve to the nearest point of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise EmptyPointSet("no collocation points")
    total = boundary.perimeter
    s_pts = np.sort([boundary.arclength_position(p) for p in pts])
    lengths = boundary.lengths
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    frac = np.linspace(0.0, 1.0, refine + 1)
    samples = (starts[:, None] + frac[None, :] * lengths[:, None]).ravel()
    diff = np.abs(samples[:, None] - s_pts[None, :])
    diff = np.minimum(diff, total - diff)
    return float(diff.min(axis=1).max())


# ---------------------------------------------------------------------------
# triangle meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    centroids: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cr = np.cross(p1 - p0, p2 - p0)
        twice = np.linalg.norm(cr, axis=1)
        if np.sum(np.einsum("ij,ij->i", p0, cr)) < 0:
            # wound inward: flip every triangle
            t = t[:, [0, 2, 1]]
            cr = -cr
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "centroids", (p0 + p1 + p2) / 3.0)
        object.__setattr__(self, "areas", 0.5 * twice)
        object.__setattr__(self, "normals", cr / np.where(twice > 0, twice, 1.0)[:, None])

    def __len__(self):
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """(T, 3, 3) array of triangle vertex coordinates."""
        return self.vertices[self.triangles]

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def edge_counts(self) -> dict:
        counts: dict = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def is_closed(self) -> bool:
        return all(c == 2 for c in self.edge_counts().values())

    def size(self) -> np.ndarray:
        """Longest edge of each triangle."""
        c = self.corners()
        e = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)


def uv_sphere(radius: float = 1.0, slices: int = 18, stacks: int = 19) -> TriMesh:
    """Latitude/longitude sphere: 2 * slices * (stacks - 1) triangles."""
    if slices < 3 or stacks < 3:
        raise InvalidResolution("sphere needs slices >= 3 and stacks >= 3")
    verts = [[0.0, 0.0, radius]]
    for i in range(1, stacks):
        th = np.pi * i / stacks
        for j in range(slices):
            ph = 2 * np.pi * j / slices
            verts.append([radius * np.sin(th) * np.cos(ph), radius * np.sin(th) * np.sin(ph), radius * np.cos(th)])
    verts.append([0.0, 0.0, -radius])
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * slices + (j % slices)

    tris = []
    for j in range(slices):
        tris.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, stacks - 1):
        for j in range(slices):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    for j in range(slices):
        tris.append([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)])
    return TriMesh(np.array(verts), np.array(tris))


def read_off(path) -> TriMesh:
    """Read a triangle mesh in OFF format (0-based indices, faces '3 i j k')."""
    tokens = Path(path).read_text().split()
    if not tokens or tokens[0] != "OFF":
        raise MeshFormatError("missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshFormatError("only triangular faces are supported")
            faces.append([int(tokens[pos + 1]), int(tokens[pos + 2]), int(tokens[pos + 3])])
            pos += 4
    except (IndexError, ValueError) as exc:
        raise MeshFormatError(f"malformed OFF file: {exc}") from exc
    faces = np.array(faces, dtype=np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise MeshFormatError("face index out of range")
    return TriMesh(verts, faces)


def write_off(mesh: TriMesh, path) -> None:
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in t) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")
