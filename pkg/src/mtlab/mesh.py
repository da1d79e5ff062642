"""Domains and conforming triangulations.

Supported domains: the unit square, disks (structured radial layers with
circle projection on refinement), and simple polygons (ear clipping plus
uniform refinement).  Meshes are immutable after construction.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Invalid domain specification (degenerate polygon, bad sizes)."""


@dataclass(frozen=True)
class DomainSpec:
    """Computational domain: 'unit-square', 'disk', or 'polygon'."""

    kind: str
    target_h: float
    radius: float = 1.0
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unit-square", "disk", "polygon"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if not self.target_h > 0.0:
            raise DomainError("target_h must be positive")
        if self.kind == "disk" and not self.radius > 0.0:
            raise DomainError("disk radius must be positive")
        if self.kind == "polygon":
            _validate_polygon(np.asarray(self.vertices, dtype=float))


@dataclass(frozen=True)
class BoundaryPoint:
    node_id: int
    coords: tuple


class Mesh:
    """Conforming P1 triangulation with tagged boundary edges.

    nodes: (n, 2) float array; tris: (m, 3) int array, positively oriented;
    boundary_edges: (b, 2) int array forming closed loops.
    """

    def __init__(self, nodes, tris, boundary_edges, circle=None, check=True):
        self.nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        self.tris = np.ascontiguousarray(tris, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self._circle = circle  # (cx, cy, r) when the boundary lies on a circle
        areas = self.signed_areas()
        if check and np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise DomainError(f"triangle {bad} has non-positive area {areas[bad]:g}")
        self.area = float(np.sum(areas))

    def signed_areas(self):
        p = self.nodes[self.tris]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    @property
    def n_nodes(self):
        return len(self.nodes)

    def edges(self):
        """Unique undirected edges, each as a sorted index pair."""
        e = np.vstack([self.tris[:, [0, 1]], self.tris[:, [1, 2]],
                       self.tris[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def max_edge_length(self):
        e = self.edges()
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    def boundary_nodes(self):
        return np.unique(self.boundary_edges)

    def euler_characteristic(self):
        return self.n_nodes - len(self.edges()) + len(self.tris)

    def validate(self):
        """Assert structural invariants; raises AssertionError on violation."""
        areas = self.signed_areas()
        assert np.all(areas > 0.0), "non-positive triangle area"
        assert abs(np.sum(areas) - self.area) <= 1e-12 * self.area
        assert self.euler_characteristic() == 1, "V - E + F != 1"
        # boundary edges close up: every boundary node has degree 2
        ids, counts = np.unique(self.boundary_edges, return_counts=True)
        assert np.all(counts == 2), "boundary edges do not form closed loops"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(format_mesh(self))

    def content_hash(self):
        return hashlib.sha256(format_mesh(self).encode()).hexdigest()


def format_mesh(mesh):
    lines = ["mt-mesh v1", f"nodes {mesh.n_nodes}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    lines.append(f"tris {len(mesh.tris)}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.tris]
    lines.append(f"bedges {len(mesh.boundary_edges)}")
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges]
    return "\n".join(lines) + "\n"


def load_mesh(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[0:2] != ["mt-mesh", "v1"]:
        raise ValueError(f"{path}: not an mt-mesh v1 file")
    pos = 2
    assert tokens[pos] == "nodes"
    n = int(tokens[pos + 1]); pos += 2
    nodes = np.array(tokens[pos:pos + 2 * n], dtype=float).reshape(n, 2)
    pos += 2 * n
    assert tokens[pos] == "tris"
    m = int(tokens[pos + 1]); pos += 2
    tris = np.array(tokens[pos:pos + 3 * m], dtype=np.int64).reshape(m, 3)
    pos += 3 * m
    assert tokens[pos] == "bedges"
    b = int(tokens[pos + 1]); pos += 2
    bedges = np.array(tokens[pos:pos + 2 * b], dtype=np.int64).reshape(b, 2)
    return Mesh(nodes, tris, bedges)


def _validate_polygon(verts):
    if verts.ndim != 2 or len(verts) < 3 or verts.shape[1] != 2:
        raise DomainError("polygon needs at least 3 (x, y) vertices")
    x, y = verts[:, 0], verts[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if abs(area2) < 1e-14:
        raise DomainError("polygon has zero area")
    if area2 < 0.0:
        raise DomainError("polygon is negatively oriented")
    n = len(verts)
    for i in range(n):
        a0, a1 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b0, b1 = verts[j], verts[(j + 1) % n]
            if _segments_cross(a0, a1, b0, b1):
                raise DomainError(
                    f"polygon self-intersects: edges {i} and {j} cross")


def _segments_cross(a0, a1, b0, b1):
    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)
    o1, o2 = orient(a0, a1, b0), orient(a0, a1, b1)
    o3, o4 = orient(b0, b1, a0), orient(b0, b1, a1)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def build_mesh(spec):
    """Triangulate the domain with max edge length <= 1.5 * target_h."""
    if spec.kind == "unit-square":
        n = max(1, math.ceil(math.sqrt(2.0) / spec.target_h))
        return _square_mesh(n)
    if spec.kind == "disk":
        return _disk_mesh(spec.radius, spec.target_h)
    mesh = _polygon_mesh(np.asarray(spec.vertices, dtype=float))
    while mesh.max_edge_length() > 1.5 * spec.target_h:
        mesh = refine(mesh)
    return mesh


def _square_mesh(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    bedges = []
    for i in range(n):
        bedges.append((nid(i, 0), nid(i + 1, 0)))
    for j in range(n):
        bedges.append((nid(n, j), nid(n, j + 1)))
    for i in range(n, 0, -1):
        bedges.append((nid(i, n), nid(i - 1, n)))
    for j in range(n, 0, -1):
        bedges.append((nid(0, j), nid(0, j - 1)))
    return Mesh(nodes, np.array(tris), np.array(bedges))


def _stitch_rings(inner, outer):
    """Triangle strip between two concentric node rings (CCW ordered)."""
    ni, no = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < ni or j < no:
        if j < no and (i == ni or (j + 1) * ni <= (i + 1) * no):
            tris.append((inner[i % ni], outer[j % no], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((outer[j % no], inner[(i + 1) % ni], inner[i % ni]))
            i += 1
    return tris


def _disk_mesh_rings(radius, m):
    nodes = [(0.0, 0.0)]
    rings = []
    for k in range(1, m + 1):
        r = radius * k / m
        count = 6 * k
        start = len(nodes)
        ang = 2.0 * np.pi * np.arange(count) / count
        for a in ang:
            nodes.append((r * math.cos(a), r * math.sin(a)))
        rings.append(list(range(start, start + count)))
    tris = []
    # center fan
    first = rings[0]
    for j in range(6):
        tris.append((0, first[j], first[(j + 1) % 6]))
    for k in range(1, m):
        tris.extend(_stitch_rings(rings[k - 1], rings[k]))
    outer = rings[-1]
    bedges = [(outer[j], outer[(j + 1) % len(outer)]) for j in range(len(outer))]
    nodes = np.array(nodes)
    tris = np.array(tris)
    # orientation fix: stitching order can flip depending on ring phase
    p = nodes[tris]
    s = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
         - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    flip = s < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return Mesh(nodes, tris, np.array(bedges), circle=(0.0, 0.0, radius))


def _disk_mesh(radius, target_h):
    m = max(2, math.ceil(1.1 * radius / target_h))
    for _ in range(8):
        mesh = _disk_mesh_rings(radius, m)
        if mesh.max_edge_length() <= 1.5 * target_h:
            return mesh
        m = math.ceil(m * mesh.max_edge_length() / (1.4 * target_h))
    return mesh


def _polygon_mesh(verts):
    tris = _ear_clip(verts)
    n = len(verts)
    bedges = [(i, (i + 1) % n) for i in range(n)]
    return Mesh(verts.copy(), np.array(tris), np.array(bedges))


def _ear_clip(verts):
    idx = list(range(len(verts)))
    tris = []

    def is_convex(a, b, c):
        return ((verts[b, 0] - verts[a, 0]) * (verts[c, 1] - verts[a, 1])
                - (verts[b, 1] - verts[a, 1]) * (verts[c, 0] - verts[a, 0])) > 1e-14

    def contains(a, b, c, p):
        def side(p0, p1):
            return ((p1[0] - p0[0]) * (p[1] - p0[1])
                    - (p1[1] - p0[1]) * (p[0] - p0[0]))
        d1, d2, d3 = side(verts[a], verts[b]), side(verts[b], verts[c]), side(verts[c], verts[a])
        return d1 >= -1e-14 and d2 >= -1e-14 and d3 >= -1e-14

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(verts) ** 2:
            raise DomainError("ear clipping failed; polygon may be degenerate")
        n = len(idx)
        for k in range(n):
            a, b, c = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            if not is_convex(a, b, c):
                continue
            if any(contains(a, b, c, verts[q]) for q in idx
                   if q not in (a, b, c)):
                continue
            tris.append((a, b, c))
            idx.pop(k)
            break
    tris.append(tuple(idx))
    return tris


def refine(mesh):
    """Regular 4-way refinement; disk boundary midpoints stay on the circle."""
    nodes = [tuple(p) for p in mesh.nodes]
    midpoint = {}
    bset = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        h = midpoint.get(key)
        if h is None:
            p = 0.5 * (mesh.nodes[i] + mesh.nodes[j])
            if mesh._circle is not None and key in bset:
                cx, cy, r = mesh._circle
                v = p - (cx, cy)
                p = np.array([cx, cy]) + v * (r / np.hypot(*v))
            h = len(nodes)
            nodes.append(tuple(p))
            midpoint[key] = h
        return h

    tris = []
    for a, b, c in mesh.tris:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    bedges = []
    for i, j in mesh.boundary_edges:
        m = mid(i, j)
        bedges += [(i, m), (m, j)]
    return Mesh(np.array(nodes), np.array(tris), np.array(bedges),
                circle=mesh._circle)


def pick_boundary_point(mesh, hint):
    """Boundary node nearest to hint; ties broken by smallest node index."""
    ids = mesh.boundary_nodes()  # sorted ascending by construction of unique
    d = mesh.nodes[ids] - np.asarray(hint, dtype=float)
    d2 = d[:, 0] ** 2 + d[:, 1] ** 2
    best = ids[int(np.argmin(d2))]
    return BoundaryPoint(int(best), tuple(mesh.nodes[best]))


def distance_to_boundary(mesh, point):
    """Euclidean distance from a point to the polygonal boundary."""
    p = np.asarray(point, dtype=float)
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab)
                / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300), 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = proj - p
    return float(np.min(np.hypot(d[:, 0], d[:, 1])))
