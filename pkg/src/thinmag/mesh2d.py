"""Polygonal cross-sections and conforming triangulations of a truncated disk.

A :class:`CrossSection` is a simple counterclockwise polygon.  :func:`triangulate`
meshes the disk of radius ``R`` centred at the origin so that every polygon edge
is a union of mesh edges; triangles are flagged as inside or outside the polygon.
Mesh size equals ``target_h`` inside and near the polygon and grows linearly with
distance away from it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
import triangle as _triangle

from .errors import InvalidArgument, InvalidGeometry

NONE, INTERFACE, OUTER = 0, 1, 2


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Simple polygon with counterclockwise vertex order."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidGeometry("vertices must be an (n, 2) array")
        if len(v) < 3:
            raise InvalidGeometry("a cross-section needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidGeometry("vertices must be finite")
        if not shapely.Polygon(v).is_valid:
            raise InvalidGeometry("polygon is not simple")
        if _signed_area(v) <= 0.0:
            raise InvalidGeometry("polygon must be counterclockwise with positive area")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, points):
        """Build a section, reversing clockwise input."""
        v = np.asarray(points, dtype=float)
        if v.ndim == 2 and len(v) >= 3 and _signed_area(v) < 0:
            v = v[::-1]
        return cls(v)

    @classmethod
    def rectangle(cls, lower, upper):
        (x0, y0), (x1, y1) = lower, upper
        return cls([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    @property
    def area(self):
        return polygon_area(self)

    @property
    def centroid(self):
        c = shapely.Polygon(self.vertices).centroid
        return np.array([c.x, c.y])

    @property
    def diameter(self):
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @property
    def perimeter(self):
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    def translated(self, shift):
        return CrossSection(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, t):
        if t <= 0:
            raise InvalidArgument("dilation factor must be positive")
        return CrossSection(self.vertices * float(t))

    def reflected(self):
        """Mirror image across the line x1 = x2 (order reversed to stay counterclockwise)."""
        return CrossSection(self.vertices[::-1, ::-1].copy())

    def distance(self, points):
        """Euclidean distance from each point to the closed polygon (0 inside)."""
        pts = np.atleast_2d(points)
        return shapely.distance(shapely.Polygon(self.vertices), shapely.points(pts))

    def contains(self, points):
        pts = np.atleast_2d(points)
        return shapely.contains_xy(shapely.Polygon(self.vertices), pts[:, 0], pts[:, 1])

    def to_json(self):
        return json.dumps({"vertices": self.vertices.tolist()})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, str) else text
        if set(doc) != {"vertices"}:
            raise InvalidArgument(f"cross-section JSON must have exactly the key 'vertices', got {sorted(doc)}")
        return cls.from_points(doc["vertices"])


def polygon_from_disc(center=(0.0, 0.0), radius=1.0, n_segments=64):
    """Regular ``n_segments``-gon inscribed in a circle, counterclockwise."""
    if int(n_segments) != n_segments or n_segments < 3:
        raise InvalidArgument("n_segments must be an integer >= 3")
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    t = 2.0 * np.pi * np.arange(int(n_segments)) / n_segments
    c = np.asarray(center, dtype=float)
    return CrossSection(c + radius * np.column_stack([np.cos(t), np.sin(t)]))


def polygon_area(section):
    a = _signed_area(np.asarray(section.vertices))
    if a <= 0.0:
        raise InvalidGeometry(f"degenerate polygon, signed area {a}")
    return a


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangulation with per-triangle inside flags and per-edge markers.

    ``edges`` holds every mesh edge once (sorted vertex pair); ``edge_markers``
    uses ``NONE``, ``INTERFACE`` (polygon boundary) and ``OUTER`` (truncation circle).
    """

    points: np.ndarray
    triangles: np.ndarray
    inside: np.ndarray
    edges: np.ndarray
    edge_markers: np.ndarray
    radius: float
    target_h: float
    areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = self.points[self.triangles]
        a = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        object.__setattr__(self, "areas", a)

    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def interface_edges(self):
        return self.edges[self.edge_markers == INTERFACE]

    @property
    def outer_vertices(self):
        return np.unique(self.edges[self.edge_markers == OUTER])

    @property
    def vertex_markers(self):
        m = np.zeros(self.n_vertices, dtype=int)
        m[self.edges[self.edge_markers == INTERFACE].ravel()] = INTERFACE
        m[self.edges[self.edge_markers == OUTER].ravel()] = OUTER
        return m

    @property
    def inside_area(self):
        return float(self.areas[self.inside].sum())

    def edge_lengths(self, edges=None):
        e = self.edges if edges is None else edges
        d = self.points[e[:, 1]] - self.points[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def triangle_max_edge(self):
        p = self.points[self.triangles]
        d = p - np.roll(p, -1, axis=1)
        return np.hypot(d[..., 0], d[..., 1]).max(axis=1)

    def restrict_inside(self):
        """Sub-mesh made of the inside triangles, vertices renumbered.

        The former interface edges become the (OUTER-free) boundary of the result,
        marked INTERFACE.
        """
        tri = self.triangles[self.inside]
        used = np.unique(tri)
        remap = -np.ones(self.n_vertices, dtype=int)
        remap[used] = np.arange(len(used))
        tri = remap[tri]
        edges, _ = _unique_edges(tri)
        iface = {tuple(e) for e in np.sort(remap[self.interface_edges], axis=1)}
        markers = np.array([INTERFACE if tuple(e) in iface else NONE for e in edges], dtype=int)
        return Mesh2D(self.points[used].copy(), tri, np.ones(len(tri), dtype=bool),
                      edges, markers, self.radius, self.target_h)

    def write_node_element(self, path):
        """Plain-text export: ``N M`` header, N lines ``x y marker``, M lines ``i j k inside``."""
        markers = self.vertex_markers
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices} {len(self.triangles)}\n")
            for (x, y), m in zip(self.points, markers):
                fh.write(f"{x:.17g} {y:.17g} {m}\n")
            for (i, j, k), f in zip(self.triangles, self.inside):
                fh.write(f"{i} {j} {k} {int(f)}\n")


def read_node_element(path):
    """Inverse of :meth:`Mesh2D.write_node_element` (returns arrays, not a Mesh2D)."""
    with open(path) as fh:
        n, m = map(int, fh.readline().split())
        rows = [fh.readline().split() for _ in range(n)]
        points = np.array([[float(r[0]), float(r[1])] for r in rows])
        markers = np.array([int(r[2]) for r in rows])
        tris = np.array([list(map(int, fh.readline().split())) for _ in range(m)])
    return points, markers, tris[:, :3], tris[:, 3].astype(bool)


def _unique_edges(tri):
    e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0, return_inverse=True)


def _subdivide(poly, h):
    """Polygon boundary points with every piece no longer than h."""
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        k = max(1, math.ceil(np.hypot(*(b - a)) / h - 1e-9))
        s = np.arange(k)[:, None] / k
        pts.append(a + s * (b - a))
    return np.concatenate(pts)


def triangulate(section, truncation_radius, target_h, grading=0.25, max_rounds=40):
    """Conforming triangulation of the disk |x| < truncation_radius around ``section``.

    Edges within ``2 * target_h`` of the polygon are at most ``target_h`` long;
    farther out the admissible length is ``target_h + grading * distance``.
    """
    R, h = float(truncation_radius), float(target_h)
    if not h > 0:
        raise InvalidArgument("target_h must be positive")
    if not 0 < grading <= 0.5:
        raise InvalidArgument("grading must lie in (0, 0.5]")
    if R < 2.0 * section.diameter:
        raise InvalidArgument(f"truncation radius {R} is smaller than twice the section diameter")
    if np.hypot(section.vertices[:, 0], section.vertices[:, 1]).max() > R / 2:
        raise InvalidArgument("section must lie inside the disk of radius truncation_radius / 2")

    near = 2.0 * h
    poly = shapely.Polygon(section.vertices)

    def size(xy):
        d = shapely.distance(poly, shapely.points(xy))
        return h + grading * np.maximum(d - near, 0.0)

    inner = _subdivide(section.vertices, h)
    s_out = float(size(np.array([[R, 0.0]]))[0])
    n_out = max(32, math.ceil(2 * np.pi * R / s_out))
    t = 2 * np.pi * np.arange(n_out) / n_out
    outer = R * np.column_stack([np.cos(t), np.sin(t)])

    ni = len(inner)
    seg_in = np.column_stack([np.arange(ni), (np.arange(ni) + 1) % ni])
    seg_out = ni + np.column_stack([np.arange(n_out), (np.arange(n_out) + 1) % n_out])
    pslg = {
        "vertices": np.concatenate([inner, outer]),
        "segments": np.concatenate([seg_in, seg_out]),
        "segment_markers": np.concatenate([np.full(ni, INTERFACE), np.full(n_out, OUTER)])[:, None],
    }
    out = _triangle.triangulate(pslg, "pq30Q")
    for _ in range(max_rounds):
        pts, tri = out["vertices"], out["triangles"]
        p = pts[tri]
        d = p - np.roll(p, -1, axis=1)
        longest = np.hypot(d[..., 0], d[..., 1]).max(axis=1)
        s = size(pts)[tri].min(axis=1)
        bad = longest > s
        if not bad.any():
            break
        u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]) / 2
        out["triangle_max_area"] = np.where(bad, np.minimum(0.35 * s**2, 0.5 * area), -1.0)
        out = _triangle.triangulate(out, "rpq30aQ")
    else:
        raise InvalidArgument("mesh refinement did not reach the requested size")

    pts, tri = out["vertices"], out["triangles"].astype(np.int64)
    p = pts[tri]
    cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    tri[cross < 0] = tri[cross < 0][:, [0, 2, 1]]

    edges, _ = _unique_edges(tri)
    segmark = {tuple(sorted(s)): int(m) for s, m in zip(out["segments"], out["segment_markers"].ravel())}
    markers = np.array([segmark.get(tuple(e), NONE) for e in edges], dtype=int)
    cen = p.mean(axis=1)
    inside = shapely.contains_xy(poly, cen[:, 0], cen[:, 1])
    return Mesh2D(pts, tri, inside, edges, markers, R, h)


def footprint_mesh(section, target_h):
    """Triangulation of the section itself (inside triangles only), e.g. a film footprint."""
    reach = max(2.0 * section.diameter, 2.0 * float(np.hypot(*section.vertices.T).max())) * 1.01
    return triangulate(section, reach, target_h, grading=0.5).restrict_inside()
