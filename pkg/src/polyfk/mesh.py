"""Two-dimensional polygonal meshes: construction, I/O, agglomeration.

A :class:`PolyMesh` holds counter-clockwise vertex loops and derives its
face topology on construction. Every edge of every loop is one face; an
edge shared by two loops is interior, an edge used once lies on the
boundary and must carry a ``dirichlet`` or ``neumann`` tag.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, QhullError, cKDTree

from . import kernels
from .errors import ContractError, InputError, MeshParseError, TopologyError

INTERIOR, DIRICHLET, NEUMANN = "interior", "dirichlet", "neumann"
KIND_NAMES = (INTERIOR, DIRICHLET, NEUMANN)
BOUNDARY_TAGS = (DIRICHLET, NEUMANN)
SIDES = ("left", "right", "bottom", "top")


def polygon_area(P):
    """Signed shoelace area of a closed vertex loop ``P`` of shape (k, 2)."""
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(P):
    x, y = P[:, 0], P[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    A = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * A)


def _diameter(P):
    d = P[:, None, :] - P[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def _segments_cross(P):
    """True if two non-adjacent edges of the loop ``P`` touch or cross."""
    k = len(P)
    if k < 4:
        return False
    A = P
    B = np.roll(P, -1, axis=0)
    i, j = np.triu_indices(k, 2)
    keep = ~((i == 0) & (j == k - 1))
    i, j = i[keep], j[keep]
    a, b, c, d = A[i], B[i], A[j], B[j]

    def orient(p, q, r):
        return (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])

    scale = np.abs(P).max() + 1.0
    tol = 1e-13 * scale * scale
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    proper = (((o1 > tol) & (o2 < -tol)) | ((o1 < -tol) & (o2 > tol))) & (
        ((o3 > tol) & (o4 < -tol)) | ((o3 < -tol) & (o4 > tol))
    )
    if proper.any():
        return True

    def on_seg(p, q, r, o):
        inside = (
            (np.minimum(p[:, 0], q[:, 0]) - 1e-13 * scale <= r[:, 0])
            & (r[:, 0] <= np.maximum(p[:, 0], q[:, 0]) + 1e-13 * scale)
            & (np.minimum(p[:, 1], q[:, 1]) - 1e-13 * scale <= r[:, 1])
            & (r[:, 1] <= np.maximum(p[:, 1], q[:, 1]) + 1e-13 * scale)
        )
        return (np.abs(o) <= tol) & inside

    touch = on_seg(a, b, c, o1) | on_seg(a, b, d, o2) | on_seg(c, d, a, o3) | on_seg(c, d, b, o4)
    return bool(touch.any())


@dataclass(frozen=True)
class Face:
    """One straight mesh face.

    ``elements`` is ``(plus,)`` on the boundary and ``(plus, minus)`` inside;
    ``normal`` points out of ``plus``.
    """

    vertices: tuple
    normal: np.ndarray
    length: float
    elements: tuple
    kind: str


@dataclass(frozen=True)
class SubTriangulation:
    """Per-element triangle coordinates, ``triangles[e]`` of shape (nt, 3, 2)."""

    triangles: tuple

    def areas(self, e):
        T = self.triangles[e]
        a = T[:, 1] - T[:, 0]
        b = T[:, 2] - T[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


@dataclass(frozen=True)
class RegularityReport:
    shape_min: float
    shape_max: float
    contact_min: float
    contact_max: float


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


class PolyMesh:
    """Immutable polygonal mesh with derived face topology.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    elements : sequence of int sequences
        Counter-clockwise vertex loops.
    boundary_tags : dict or callable
        Either ``{(i, j): tag}`` keyed by vertex pairs in any order, or a
        callable ``tag(midpoint, normal)`` applied to every boundary edge.
    """

    def __init__(self, vertices, elements, boundary_tags):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2:
            raise InputError("vertices must have shape (n, 2)")
        self.vertices = _readonly(V)
        loops = []
        for e, loop in enumerate(elements):
            loop = np.asarray(loop, dtype=np.int64)
            if loop.ndim != 1 or len(loop) < 3:
                raise TopologyError(f"element {e} has fewer than 3 vertices", element=e)
            if loop.min() < 0 or loop.max() >= len(V):
                raise TopologyError(f"element {e} references a missing vertex", element=e)
            if len(np.unique(loop)) != len(loop):
                raise TopologyError(f"element {e} repeats a vertex", element=e)
            loops.append(_readonly(loop))
        if not loops:
            raise InputError("mesh has no elements")
        self.elements = tuple(loops)
        self._build(boundary_tags)
        self._subtri = None

    # -- construction -------------------------------------------------------
    def _build(self, boundary_tags):
        V = self.vertices
        nel = len(self.elements)
        areas = np.empty(nel)
        cents = np.empty((nel, 2))
        diams = np.empty(nel)
        bbox = np.empty((nel, 4))
        for e, loop in enumerate(self.elements):
            P = V[loop]
            A = polygon_area(P)
            scale = _diameter(P)
            if not A > 1e-14 * scale * scale:
                raise TopologyError(f"element {e} is clockwise or degenerate (signed area {A:.3e})", element=e)
            if _segments_cross(P):
                raise TopologyError(f"element {e} is not a simple polygon", element=e)
            areas[e] = A
            cents[e] = polygon_centroid(P)
            diams[e] = scale
            bbox[e] = (P[:, 0].min(), P[:, 0].max(), P[:, 1].min(), P[:, 1].max())

        edge_map = {}
        fverts, felems = [], []
        for e, loop in enumerate(self.elements):
            k = len(loop)
            for m in range(k):
                i, j = int(loop[m]), int(loop[(m + 1) % k])
                key = (i, j) if i < j else (j, i)
                f = edge_map.get(key)
                if f is None:
                    edge_map[key] = len(fverts)
                    fverts.append((i, j))
                    felems.append([e, -1])
                else:
                    if felems[f][1] != -1:
                        raise TopologyError(
                            f"face {key} is shared by more than two elements "
                            f"({felems[f][0]}, {felems[f][1]}, {e})",
                            element=e,
                        )
                    if fverts[f] == (i, j):
                        raise TopologyError(
                            f"element {e} traverses face {key} in the same direction as element {felems[f][0]}",
                            element=e,
                        )
                    felems[f][1] = e
        fverts = np.array(fverts, dtype=np.int64)
        felems = np.array(felems, dtype=np.int64)
        d = V[fverts[:, 1]] - V[fverts[:, 0]]
        lengths = np.hypot(d[:, 0], d[:, 1])
        normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / lengths[:, None]

        kinds = np.zeros(len(fverts), dtype=np.int8)
        tags = {}
        for f in np.flatnonzero(felems[:, 1] < 0):
            i, j = fverts[f]
            key = (min(i, j), max(i, j))
            if callable(boundary_tags):
                tag = boundary_tags(0.5 * (V[i] + V[j]), normals[f])
            else:
                tag = boundary_tags.get(key, boundary_tags.get((key[1], key[0])))
            if tag is None:
                raise TopologyError(
                    f"boundary face {key} of element {felems[f, 0]} has no tag", element=int(felems[f, 0])
                )
            tag = str(tag).lower()
            if tag not in BOUNDARY_TAGS:
                raise InputError(f"unknown boundary tag {tag!r} on face {key}")
            tags[key] = tag
            kinds[f] = KIND_NAMES.index(tag)
        if not callable(boundary_tags):
            extra = {tuple(sorted(k)) for k in boundary_tags} - set(tags)
            if extra:
                key = sorted(extra)[0]
                raise TopologyError(f"tagged segment {key} is not a boundary face")

        bnd = felems[:, 1] < 0
        P0, P1 = V[fverts[bnd, 0]], V[fverts[bnd, 1]]
        dom = 0.5 * float(np.sum(P0[:, 0] * P1[:, 1] - P1[:, 0] * P0[:, 1]))
        if abs(dom - areas.sum()) > 1e-12 * abs(dom) * max(1.0, math.log10(nel + 1)):
            raise TopologyError(f"element areas {areas.sum():.16g} do not tile the domain area {dom:.16g}")

        self.areas = _readonly(areas)
        self.centroids = _readonly(cents)
        self.element_diameters = _readonly(diams)
        self.mesh_size = float(diams.max())
        self.bboxes = _readonly(bbox)
        self.domain_area = dom
        self.face_vertices = _readonly(fverts)
        self.face_elements = _readonly(felems)
        self.face_normals = _readonly(normals)
        self.face_lengths = _readonly(lengths)
        self.face_kind = _readonly(kinds)
        self.boundary_tags = tags

        elem_faces = [[] for _ in range(nel)]
        for f, (a, b) in enumerate(felems):
            elem_faces[a].append(f)
            if b >= 0:
                elem_faces[b].append(f)
        self.element_faces = tuple(tuple(x) for x in elem_faces)

    # -- queries ------------------------------------------------------------
    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_faces(self):
        return len(self.face_vertices)

    @property
    def interior(self):
        return self.face_elements[:, 1] >= 0

    def face(self, f):
        kind = KIND_NAMES[self.face_kind[f]]
        a, b = self.face_elements[f]
        els = (int(a),) if b < 0 else (int(a), int(b))
        return Face(
            vertices=(int(self.face_vertices[f, 0]), int(self.face_vertices[f, 1])),
            normal=self.face_normals[f],
            length=float(self.face_lengths[f]),
            elements=els,
            kind=kind,
        )

    @property
    def faces(self):
        return [self.face(f) for f in range(self.n_faces)]

    def faces_of_kind(self, kind):
        return np.flatnonzero(self.face_kind == KIND_NAMES.index(kind))

    def polygon(self, e):
        return self.vertices[self.elements[e]]

    def adjacency(self):
        """Symmetric element adjacency matrix through interior faces."""
        fe = self.face_elements[self.interior]
        n = self.n_elements
        A = sp.coo_matrix((np.ones(len(fe)), (fe[:, 0], fe[:, 1])), shape=(n, n))
        return (A + A.T).tocsr()

    @property
    def sub_triangulation(self):
        if self._subtri is None:
            self._subtri = sub_triangulate(self)
        return self._subtri

    def locate(self, points):
        """Element id containing each point (``-1`` when outside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        st = self.sub_triangulation
        tri = np.concatenate(st.triangles)
        owner = np.repeat(np.arange(self.n_elements), [len(t) for t in st.triangles])
        tree = cKDTree(tri.mean(axis=1))
        k = min(len(tri), 32)
        _, cand = tree.query(pts, k=k)
        cand = np.atleast_2d(cand).reshape(len(pts), k)
        T = tri[cand]
        a, b, c = T[..., 0, :], T[..., 1, :], T[..., 2, :]
        p = pts[:, None, :]

        def cr(u, v, w):
            return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

        tol = -1e-12 * self.mesh_size**2
        inside = (cr(a, b, p) >= tol) & (cr(b, c, p) >= tol) & (cr(c, a, p) >= tol)
        hit = inside.any(axis=1)
        first = inside.argmax(axis=1)
        out[hit] = owner[cand[hit, first[hit]]]
        return out

    def __eq__(self, other):
        if not isinstance(other, PolyMesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.vertices, other.vertices)
            and len(self.elements) == len(other.elements)
            and all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))
            and self.boundary_tags == other.boundary_tags
        )

    __hash__ = None

    def __repr__(self):
        return f"PolyMesh(n_elements={self.n_elements}, n_faces={self.n_faces}, h={self.mesh_size:.4g})"


# -- generators -------------------------------------------------------------
def _check_domain(domain):
    try:
        x0, x1, y0, y1 = (float(v) for v in domain)
    except (TypeError, ValueError):
        raise InputError("domain must be (x0, x1, y0, y1)") from None
    if not (x1 > x0 and y1 > y0):
        raise InputError(f"degenerate domain {domain}: zero area")
    return x0, x1, y0, y1


def side_tagger(domain, boundary):
    """Boundary-tag callable for an axis-aligned rectangle.

    ``boundary`` is a single tag or a mapping from side name
    (left/right/bottom/top) to tag.
    """
    x0, x1, y0, y1 = domain
    if isinstance(boundary, str):
        boundary = {s: boundary for s in SIDES}
    missing = set(SIDES) - set(boundary)
    if missing:
        raise InputError(f"no boundary tag for side(s) {sorted(missing)}")

    def tag(mid, normal):
        if abs(normal[0]) > abs(normal[1]):
            return boundary["left"] if normal[0] < 0 else boundary["right"]
        return boundary["bottom"] if normal[1] < 0 else boundary["top"]

    return tag


def generate_cartesian_mesh(domain=(0.0, 1.0, 0.0, 1.0), nx=1, ny=1, boundary=DIRICHLET):
    """Structured ``nx`` by ``ny`` grid of rectangles."""
    rect = _check_domain(domain)
    if nx < 1 or ny < 1:
        raise InputError("nx and ny must be >= 1")
    x = np.linspace(rect[0], rect[1], nx + 1)
    y = np.linspace(rect[2], rect[3], ny + 1)
    X, Y = np.meshgrid(x, y)
    V = np.stack([X.ravel(), Y.ravel()], axis=1)
    els = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            els.append((a, a + 1, a + nx + 2, a + nx + 1))
    return PolyMesh(V, els, side_tagger(rect, boundary))


def _neighbor_graph(pts):
    n = len(pts)
    if n <= 8:
        ptr = np.arange(n + 1) * (n - 1)
        idx = np.array([j for i in range(n) for j in range(n) if j != i], dtype=np.int64)
        return ptr, idx
    try:
        tri = Delaunay(pts)
    except QhullError:
        ptr = np.arange(n + 1) * (n - 1)
        idx = np.array([j for i in range(n) for j in range(n) if j != i], dtype=np.int64)
        return ptr, idx
    ptr, idx = tri.vertex_neighbor_vertices
    return ptr.astype(np.int64), idx.astype(np.int64)


def _voronoi_cells(pts, rect):
    ptr, idx = _neighbor_graph(pts)
    scale = max(rect[1] - rect[0], rect[3] - rect[2])
    verts, counts = kernels.clip_voronoi_cells(pts, ptr, idx, np.asarray(rect, dtype=float), 1e-13 * scale)
    return verts, counts


def _cell_centroids(verts, counts):
    n, maxv, _ = verts.shape
    k = np.arange(maxv)
    nxt = np.where(k[None, :] + 1 < counts[:, None], k[None, :] + 1, 0)
    valid = k[None, :] < counts[:, None]
    P = verts
    Q = np.take_along_axis(verts, nxt[:, :, None], axis=1)
    cr = np.where(valid, P[..., 0] * Q[..., 1] - Q[..., 0] * P[..., 1], 0.0)
    A = 0.5 * cr.sum(1)
    cx = ((P[..., 0] + Q[..., 0]) * cr).sum(1) / (6.0 * A)
    cy = ((P[..., 1] + Q[..., 1]) * cr).sum(1) / (6.0 * A)
    return np.column_stack([cx, cy])


def _merge_cells(verts, counts, rect):
    """Weld independently clipped cell vertices into a conforming mesh."""
    x0, x1, y0, y1 = rect
    scale = max(x1 - x0, y1 - y0)
    tol = 1e-10 * scale
    n = len(counts)
    owner = np.repeat(np.arange(n), counts)
    P = np.concatenate([verts[i, : counts[i]] for i in range(n)])
    for col, lo, hi in ((0, x0, x1), (1, y0, y1)):
        P[np.abs(P[:, col] - lo) < tol, col] = lo
        P[np.abs(P[:, col] - hi) < tol, col] = hi
    parent = np.arange(len(P))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(cKDTree(P).query_pairs(tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(len(P))])
    uniq, new_id = np.unique(roots, return_inverse=True)
    V = P[uniq]
    loops = []
    start = 0
    for i in range(n):
        ids = list(new_id[start : start + counts[i]])
        start += counts[i]
        clean = [v for k, v in enumerate(ids) if v != ids[k - 1]] if len(ids) > 1 else ids
        loops.append(clean)
    used = np.unique(np.concatenate([np.asarray(l) for l in loops]))
    remap = -np.ones(len(V), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return V[used], [list(remap[np.asarray(l)]) for l in loops], owner


def generate_voronoi_mesh(
    domain=(0.0, 1.0, 0.0, 1.0), n_elements=30, lloyd_iterations=100, seed=0, boundary=DIRICHLET, seeds=None
):
    """Lloyd-relaxed Voronoi tessellation of a rectangle.

    Seeds are drawn uniformly in the rectangle from ``numpy.random.default_rng(seed)``
    unless ``seeds`` is given. Each Lloyd iteration moves every seed to the
    centroid of its clipped cell.
    """
    rect = _check_domain(domain)
    if seeds is None:
        if n_elements < 1:
            raise InputError("n_elements must be >= 1")
        rng = np.random.default_rng(seed)
        pts = np.column_stack(
            [rng.uniform(rect[0], rect[1], n_elements), rng.uniform(rect[2], rect[3], n_elements)]
        )
    else:
        pts = np.array(seeds, dtype=float).reshape(-1, 2)
        if len(pts) != n_elements:
            raise InputError(f"got {len(pts)} seeds for n_elements={n_elements}")
    for _ in range(lloyd_iterations):
        verts, counts = _voronoi_cells(pts, rect)
        new = _cell_centroids(verts, counts)
        step = np.abs(new - pts).max()
        pts = new
        if step < 1e-14 * max(rect[1] - rect[0], rect[3] - rect[2]):
            break
    verts, counts = _voronoi_cells(pts, rect)
    if (counts < 3).any():
        raise TopologyError("Voronoi clipping produced an empty cell; seeds coincide", element=int(np.argmin(counts)))
    V, loops, _ = _merge_cells(verts, counts, rect)
    return PolyMesh(V, loops, side_tagger(rect, boundary))


# -- file format --------------------------------------------------------------
def save_mesh(mesh, path):
    """Write ``mesh`` in the ``polymesh 2d`` text format (0-based vertex ids)."""
    lines = ["polymesh 2d", f"vertices {len(mesh.vertices)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(str(v) for v in [len(l)] + l.tolist()) for l in mesh.elements]
    bnd = np.flatnonzero(~mesh.interior)
    lines.append(f"boundary {len(bnd)}")
    for f in bnd:
        i, j = mesh.face_vertices[f]
        key = (min(i, j), max(i, j))
        lines.append(f"{i} {j} {mesh.boundary_tags[key]}")
    Path(path).write_text("\n".join(lines) + "\n")


def _tokens(path):
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def load_mesh(path):
    """Read and validate a mesh in the ``polymesh 2d`` text format."""
    try:
        it = _tokens(path)
    except OSError as exc:
        raise InputError(f"cannot read mesh file {path}: {exc}") from exc

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshParseError(f"unexpected end of file, expected {what}", path=path) from None

    def section(name):
        n, tok = nxt(f"'{name} N'")
        if len(tok) != 2 or tok[0] != name:
            raise MeshParseError(f"expected '{name} N', got {' '.join(tok)!r}", line=n, path=path)
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshParseError(f"bad count {tok[1]!r}", line=n, path=path) from None
        if count < 0:
            raise MeshParseError("negative count", line=n, path=path)
        return count

    n, tok = nxt("header")
    if tok != ["polymesh", "2d"]:
        raise MeshParseError("header must be 'polymesh 2d'", line=n, path=path)
    nv = section("vertices")
    V = np.empty((nv, 2))
    for k in range(nv):
        n, tok = nxt("vertex line")
        try:
            if len(tok) != 2:
                raise ValueError
            V[k] = float(tok[0]), float(tok[1])
        except ValueError:
            raise MeshParseError(f"bad vertex line {' '.join(tok)!r}", line=n, path=path) from None
    ne = section("elements")
    loops = []
    for k in range(ne):
        n, tok = nxt("element line")
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError(f"non-integer in element line {' '.join(tok)!r}", line=n, path=path) from None
        if len(vals) < 1 or vals[0] != len(vals) - 1:
            raise MeshParseError("element vertex count does not match the listed ids", line=n, path=path)
        loops.append(vals[1:])
    nb = section("boundary")
    tags = {}
    for k in range(nb):
        n, tok = nxt("boundary line")
        if len(tok) != 3:
            raise MeshParseError(f"bad boundary line {' '.join(tok)!r}", line=n, path=path)
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise MeshParseError("non-integer vertex id in boundary line", line=n, path=path) from None
        tag = tok[2].lower()
        if tag not in BOUNDARY_TAGS:
            raise MeshParseError(f"unknown tag {tok[2]!r}", line=n, path=path)
        tags[(min(i, j), max(i, j))] = tag
    extra = next(it, None)
    if extra is not None:
        raise MeshParseError("trailing content after boundary section", line=extra[0], path=path)
    return PolyMesh(V, loops, tags)


# -- agglomeration ------------------------------------------------------------
def _boundary_loop(mesh, members):
    """Outer loop of the union of ``members``, or None if not a simple disk."""
    inside = np.zeros(mesh.n_elements, dtype=bool)
    inside[members] = True
    nxt = {}
    for e in members:
        loop = mesh.elements[e]
        k = len(loop)
        for m in range(k):
            i, j = int(loop[m]), int(loop[(m + 1) % k])
            nxt_elem = None
            for f in mesh.element_faces[e]:
                a, b = mesh.face_vertices[f]
                if (a == i and b == j) or (a == j and b == i):
                    fe = mesh.face_elements[f]
                    nxt_elem = fe[1] if fe[0] == e else fe[0]
                    break
            if nxt_elem is not None and nxt_elem >= 0 and inside[nxt_elem]:
                continue
            if i in nxt:
                return None
            nxt[i] = j
    start = min(nxt)
    loop = [start]
    v = nxt[start]
    while v != start:
        loop.append(v)
        v = nxt.get(v)
        if v is None or len(loop) > len(nxt):
            return None
    if len(loop) != len(nxt):
        return None
    return loop


def _grow_parts(mesh, adj, seeds):
    n = mesh.n_elements
    part = -np.ones(n, dtype=np.int64)
    area = np.zeros(len(seeds))
    cent = mesh.centroids
    heaps = [[] for _ in seeds]
    for p, s in enumerate(seeds):
        part[s] = p
        area[p] = mesh.areas[s]
    for p, s in enumerate(seeds):
        for nb in adj.indices[adj.indptr[s] : adj.indptr[s + 1]]:
            heapq.heappush(heaps[p], (float(np.sum((cent[nb] - cent[s]) ** 2)), int(nb)))
    order = [(area[p], p) for p in range(len(seeds))]
    heapq.heapify(order)
    remaining = n - len(seeds)
    stalled = []
    while remaining and order:
        a, p = heapq.heappop(order)
        h = heaps[p]
        while h and part[h[0][1]] >= 0:
            heapq.heappop(h)
        if not h:
            stalled.append(p)
            continue
        _, e = heapq.heappop(h)
        part[e] = p
        area[p] += mesh.areas[e]
        remaining -= 1
        s = seeds[p]
        for nb in adj.indices[adj.indptr[e] : adj.indptr[e + 1]]:
            if part[nb] < 0:
                heapq.heappush(h, (float(np.sum((cent[nb] - cent[s]) ** 2)), int(nb)))
        heapq.heappush(order, (area[p], p))
    return part


def _farthest_seeds(mesh, k, rng):
    cent = mesh.centroids
    first = int(rng.integers(mesh.n_elements))
    seeds = [first]
    d = np.sum((cent - cent[first]) ** 2, axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(d))
        seeds.append(nxt)
        d = np.minimum(d, np.sum((cent - cent[nxt]) ** 2, axis=1))
    return seeds


def partition_elements(mesh, n_parts, seed=0, attempts=25, relax=5):
    """Greedy area-balanced region growing on the element adjacency graph.

    Returns the part id per element. Every part is connected and its union
    is a simple polygon without holes.
    """
    n = mesh.n_elements
    if not 1 <= n_parts <= n:
        raise InputError(f"n_coarse must lie in [1, {n}], got {n_parts}")
    adj = mesh.adjacency()
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise InputError(f"fine mesh is disconnected ({ncomp} components)")
    if n_parts == n:
        return np.arange(n)
    if n_parts == 1:
        return np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    cent = mesh.centroids
    for _ in range(attempts):
        seeds = _farthest_seeds(mesh, n_parts, rng)
        part = _grow_parts(mesh, adj, seeds)
        for _ in range(relax):
            new_seeds = []
            for p in range(n_parts):
                members = np.flatnonzero(part == p)
                w = mesh.areas[members]
                c = (cent[members] * w[:, None]).sum(0) / w.sum()
                new_seeds.append(int(members[np.argmin(np.sum((cent[members] - c) ** 2, axis=1))]))
            if new_seeds == seeds:
                break
            seeds = new_seeds
            part = _grow_parts(mesh, adj, seeds)
        if (part < 0).any():
            continue
        ok = True
        for p in range(n_parts):
            members = np.flatnonzero(part == p)
            sub = adj[members][:, members]
            if connected_components(sub, directed=False)[0] != 1 or _boundary_loop(mesh, members) is None:
                ok = False
                break
        if ok:
            return part
    raise TopologyError(f"could not split the mesh into {n_parts} simply connected parts")


def agglomerate(fine, n_coarse, seed=0):
    """Merge fine elements into ``n_coarse`` connected polygonal elements.

    Coarse loops keep every fine vertex on their boundary, so each fine
    segment between two coarse cells stays a separate face.
    """
    part = partition_elements(fine, n_coarse, seed=seed)
    if n_coarse == fine.n_elements:
        loops = [list(l) for l in fine.elements]
    else:
        loops = [_boundary_loop(fine, np.flatnonzero(part == p)) for p in range(n_coarse)]
    used = np.unique(np.concatenate([np.asarray(l) for l in loops]))
    remap = -np.ones(len(fine.vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    tags = {}
    for (i, j), t in fine.boundary_tags.items():
        a, b = remap[i], remap[j]
        tags[(min(a, b), max(a, b))] = t
    mesh = PolyMesh(fine.vertices[used], [remap[np.asarray(l)] for l in loops], tags)
    mesh.fine_partition = part
    return mesh


# -- sub-triangulation --------------------------------------------------------
def _is_convex(P):
    d1 = np.roll(P, -1, axis=0) - P
    d0 = P - np.roll(P, 1, axis=0)
    cr = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]
    scale = np.abs(d0).max() ** 2
    return bool((cr >= -1e-12 * scale).all())


def _drop_collinear(P):
    d1 = np.roll(P, -1, axis=0) - P
    d0 = P - np.roll(P, 1, axis=0)
    cr = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]
    scale = np.hypot(d0[:, 0], d0[:, 1]) * np.hypot(d1[:, 0], d1[:, 1])
    return P[np.abs(cr) > 1e-12 * scale]


def _ear_clip(P, e):
    P = _drop_collinear(P)
    idx = list(range(len(P)))
    tris = []
    scale = np.abs(P - P.mean(0)).max() ** 2

    def cross(a, b, c):
        return (P[b, 0] - P[a, 0]) * (P[c, 1] - P[a, 1]) - (P[b, 1] - P[a, 1]) * (P[c, 0] - P[a, 0])

    while len(idx) > 3:
        k = len(idx)
        for m in range(k):
            a, b, c = idx[m - 1], idx[m], idx[(m + 1) % k]
            if cross(a, b, c) <= 1e-14 * scale:
                continue
            others = [v for v in idx if v not in (a, b, c)]
            Q = P[others]
            u = (P[b, 0] - P[a, 0]) * (Q[:, 1] - P[a, 1]) - (P[b, 1] - P[a, 1]) * (Q[:, 0] - P[a, 0])
            v = (P[c, 0] - P[b, 0]) * (Q[:, 1] - P[b, 1]) - (P[c, 1] - P[b, 1]) * (Q[:, 0] - P[b, 0])
            w = (P[a, 0] - P[c, 0]) * (Q[:, 1] - P[c, 1]) - (P[a, 1] - P[c, 1]) * (Q[:, 0] - P[c, 0])
            t = -1e-14 * scale
            if ((u >= t) & (v >= t) & (w >= t)).any():
                continue
            tris.append((a, b, c))
            idx.pop(m)
            break
        else:
            raise TopologyError(f"element {e} cannot be ear-clipped (self-intersecting?)", element=e)
    tris.append(tuple(idx))
    return P[np.array(tris)]


def sub_triangulate(mesh):
    """Centroid fan for convex elements, ear clipping otherwise."""
    out = []
    for e in range(mesh.n_elements):
        P = mesh.polygon(e)
        if _is_convex(P):
            c = mesh.centroids[e]
            T = np.stack([np.broadcast_to(c, P.shape), P, np.roll(P, -1, axis=0)], axis=1)
        else:
            T = _ear_clip(P, e)
        out.append(_readonly(T))
    return SubTriangulation(tuple(out))


def check_regularity(mesh):
    """Shape ratios ``|K|/h_K^2`` and contact ratios ``|F|/h_K``.

    Diagnostic only; no thresholds are applied.
    """
    shape = mesh.areas / mesh.element_diameters**2
    fe = mesh.face_elements
    L = mesh.face_lengths
    contact = [L / mesh.element_diameters[fe[:, 0]]]
    inner = fe[:, 1] >= 0
    contact.append(L[inner] / mesh.element_diameters[fe[inner, 1]])
    contact = np.concatenate(contact)
    return RegularityReport(float(shape.min()), float(shape.max()), float(contact.min()), float(contact.max()))


def element_graph_components(mesh, members):
    """Number of connected components of the subgraph spanned by ``members``."""
    members = np.asarray(members)
    if len(members) == 0:
        raise ContractError("empty element set")
    adj = mesh.adjacency()[members][:, members]
    return connected_components(adj, directed=False)[0]

