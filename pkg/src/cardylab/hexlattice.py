"""Hexagonal lattice geometry and hexagonal domains.

Faces are pointy-top hexagons with circumradius ``mesh`` addressed by axial
coordinates ``(q, r)``; the face center is
``(mesh * sqrt(3) * (q + r / 2), mesh * 1.5 * r)``.

Every lattice point we care about (face centers, vertices, mid-edges) has
integer coordinates ``(a, b)`` in the Eisenstein basis ``a + b * tau`` with
``tau = exp(2 pi i / 3)`` and unit length ``mesh / (2 sqrt(3))``.  These
exact coordinates are used for identification of shared vertices and
mid-edges and for exact contour integrals.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    BoundaryVertex,
    EmptyFaceSet,
    InvalidMarks,
    MarksCollide,
    MeshTooCoarse,
    NotConnected,
    NotSimplyConnected,
    SameMark,
)

SQRT3 = math.sqrt(3.0)

# Neighbor k sits in direction 60*k degrees.
AXIAL_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
# exp(i*pi*k/3) in the (1, tau) basis
OMEGA6 = ((1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1))


def eis_mul(x: tuple[int, int], y: tuple[int, int]) -> tuple[int, int]:
    a, b = x
    c, d = y
    # tau^2 = -1 - tau
    return (a * c - b * d, a * d + b * c - b * d)


def eis_to_complex(a, b, mesh: float = 1.0):
    """Embed Eisenstein lattice coordinates (unit mesh/(2 sqrt 3)) into the plane."""
    unit = mesh / (2.0 * SQRT3)
    return unit * (np.asarray(a) - 0.5 * np.asarray(b)) + 1j * unit * (SQRT3 / 2.0) * np.asarray(b)


_VERTEX_OFFSETS = tuple(eis_mul((4, 2), w) for w in OMEGA6)
_MID_OFFSETS = tuple((3 * a, 3 * b) for a, b in OMEGA6)


class FaceCoord(NamedTuple):
    q: int
    r: int

    def center(self, mesh: float = 1.0) -> tuple[float, float]:
        return (mesh * SQRT3 * (self.q + self.r / 2.0), mesh * 1.5 * self.r)

    def center_eis(self) -> tuple[int, int]:
        return (6 * (self.q + self.r), 6 * self.r)

    def neighbor(self, k: int) -> "FaceCoord":
        dq, dr = AXIAL_DIRECTIONS[k % 6]
        return FaceCoord(self.q + dq, self.r + dr)

    def neighbors(self) -> list["FaceCoord"]:
        return [self.neighbor(k) for k in range(6)]


def _add(x, y):
    return (x[0] + y[0], x[1] + y[1])


def _components(cells: set, neighbors) -> list[set]:
    seen: set = set()
    out = []
    for start in sorted(cells):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for n in neighbors(c):
                if n in cells and n not in seen:
                    seen.add(n)
                    comp.add(n)
                    queue.append(n)
        out.append(comp)
    return out


def _face_neighbors(c):
    return FaceCoord(*c).neighbors()


def is_simply_connected(faces: set) -> bool:
    """Complement of ``faces`` inside a padded bounding box is connected."""
    qs = [f[0] for f in faces]
    rs = [f[1] for f in faces]
    q0, q1, r0, r1 = min(qs) - 1, max(qs) + 1, min(rs) - 1, max(rs) + 1
    holes = {
        FaceCoord(q, r)
        for q in range(q0, q1 + 1)
        for r in range(r0, r1 + 1)
        if (q, r) not in faces
    }
    return len(_components(holes, _face_neighbors)) == 1


class HexDomain:
    """Immutable simply connected hexagonal domain with derived index sets.

    Index arrays (all read-only numpy int arrays, ``-1`` for "absent"):

    ``face_verts``/``face_mids``/``face_nbrs`` (F, 6), local index k is CCW.
    ``mid_faces`` (M, 2): the domain face of the edge first, the other face
    or -1 on the boundary.  ``mid_verts`` (M, 2) sorted by vertex index.
    Half-edge ``h`` is ``2 * m + s`` and joins mid-edge ``m`` to vertex
    ``mid_verts[m, s]``.  ``vert_he``/``vert_faces`` (V, 3).
    ``face_halfedges`` (F, 12) lists the boundary half-edges of each face.
    ``boundary_mids`` is the CCW boundary cycle and ``boundary_halfedges``
    its half-edge refinement (two steps per boundary mid-edge).
    """

    def __init__(self, faces: Iterable, mesh: float = 1.0):
        face_list = sorted({FaceCoord(int(q), int(r)) for q, r in faces})
        if not face_list:
            raise EmptyFaceSet("no faces given")
        if not mesh > 0:
            raise ValueError("mesh must be positive")
        face_set = set(face_list)
        if len(_components(face_set, _face_neighbors)) != 1:
            raise NotConnected("faces do not form a connected set")
        if not is_simply_connected(face_set):
            raise NotSimplyConnected("faces enclose a hole")

        self.mesh = float(mesh)
        self.faces: tuple[FaceCoord, ...] = tuple(face_list)
        self.face_index = {f: i for i, f in enumerate(face_list)}
        F = len(face_list)

        vert_ids: dict[tuple[int, int], int] = {}
        mid_ids: dict[tuple[int, int], int] = {}
        face_verts = np.empty((F, 6), dtype=np.int64)
        face_mids = np.empty((F, 6), dtype=np.int64)
        face_nbrs = np.full((F, 6), -1, dtype=np.int64)
        for i, f in enumerate(face_list):
            c = f.center_eis()
            for k in range(6):
                face_verts[i, k] = vert_ids.setdefault(_add(c, _VERTEX_OFFSETS[k]), len(vert_ids))
                face_mids[i, k] = mid_ids.setdefault(_add(c, _MID_OFFSETS[k]), len(mid_ids))
                face_nbrs[i, k] = self.face_index.get(f.neighbor(k), -1)
        V, M = len(vert_ids), len(mid_ids)

        vertex_eis = np.array(list(vert_ids), dtype=np.int64).reshape(V, 2)
        mid_eis = np.array(list(mid_ids), dtype=np.int64).reshape(M, 2)

        mid_faces = np.full((M, 2), -1, dtype=np.int64)
        mid_verts = np.full((M, 2), -1, dtype=np.int64)
        vert_faces = np.full((V, 3), -1, dtype=np.int64)
        # local direction of each mid-edge seen from its first face
        mid_dir = np.full(M, -1, dtype=np.int64)
        for i in range(F):
            for k in range(6):
                m = face_mids[i, k]
                if mid_faces[m, 0] == -1:
                    mid_faces[m, 0] = i
                    mid_faces[m, 1] = face_nbrs[i, k]
                    mid_dir[m] = k
                    a, b = face_verts[i, (k - 1) % 6], face_verts[i, k]
                    mid_verts[m] = (a, b) if a < b else (b, a)
                # vertex k is surrounded by this face and neighbors k, k+1
                v = face_verts[i, k]
                if vert_faces[v, 0] == -1:
                    vert_faces[v] = (i, face_nbrs[i, k], face_nbrs[i, (k + 1) % 6])

        H = 2 * M
        he_mid = np.repeat(np.arange(M, dtype=np.int64), 2)
        he_vert = mid_verts.reshape(-1).copy()
        mid_he = np.arange(H, dtype=np.int64).reshape(M, 2)
        vert_he = np.full((V, 3), -1, dtype=np.int64)
        vert_degree = np.zeros(V, dtype=np.int64)
        for h in range(H):
            v = he_vert[h]
            vert_he[v, vert_degree[v]] = h
            vert_degree[v] += 1

        def he_of(m, v):
            return 2 * m if mid_verts[m, 0] == v else 2 * m + 1

        face_halfedges = np.empty((F, 12), dtype=np.int64)
        for i in range(F):
            for k in range(6):
                m = face_mids[i, k]
                face_halfedges[i, 2 * k] = he_of(m, face_verts[i, (k - 1) % 6])
                face_halfedges[i, 2 * k + 1] = he_of(m, face_verts[i, k])

        # CCW boundary: edge k of face i runs from vertex k-1 to vertex k
        step: dict[int, tuple[int, int]] = {}
        for i in range(F):
            for k in range(6):
                if face_nbrs[i, k] == -1:
                    step[int(face_verts[i, (k - 1) % 6])] = (int(face_mids[i, k]), int(face_verts[i, k]))
        boundary_mids_set = {m for m, _ in step.values()}
        first = min(boundary_mids_set)
        start_v = next(v for v, (m, _) in step.items() if m == first)
        b_mids, b_hes = [], []
        v = start_v
        while True:
            m, w = step[v]
            b_mids.append(m)
            b_hes.extend((he_of(m, v), he_of(m, w)))
            v = w
            if v == start_v:
                break
        if len(b_mids) != len(boundary_mids_set):
            raise NotSimplyConnected("boundary is not a single cycle")
        mid_boundary_pos = np.full(M, -1, dtype=np.int64)
        mid_boundary_pos[b_mids] = np.arange(len(b_mids))

        interior = [
            v for v in range(V) if (vert_faces[v] >= 0).all()
        ]

        self.vertex_eis = vertex_eis
        self.mid_eis = mid_eis
        self.face_eis = np.array([f.center_eis() for f in face_list], dtype=np.int64).reshape(F, 2)
        self.face_verts = face_verts
        self.face_mids = face_mids
        self.face_nbrs = face_nbrs
        self.mid_faces = mid_faces
        self.mid_verts = mid_verts
        self.mid_dir = mid_dir
        self.vert_faces = vert_faces
        self.he_mid = he_mid
        self.he_vert = he_vert
        self.mid_he = mid_he
        self.vert_he = vert_he
        self.vert_degree = vert_degree
        self.face_halfedges = face_halfedges
        self.boundary_mids = np.array(b_mids, dtype=np.int64)
        self.boundary_halfedges = np.array(b_hes, dtype=np.int64)
        self.mid_boundary_pos = mid_boundary_pos
        self.interior_vertices = np.array(interior, dtype=np.int64)
        # faces on either side of each half-edge (-1 = outside)
        self.he_faces = np.repeat(mid_faces, 2, axis=0)
        for name, value in vars(self).items():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    # sizes ---------------------------------------------------------------
    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_eis)

    @property
    def n_edges(self) -> int:
        return len(self.mid_eis)

    n_mids = n_edges

    @property
    def n_halfedges(self) -> int:
        return 2 * len(self.mid_eis)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_mids)

    # geometry ------------------------------------------------------------
    def face_points(self) -> np.ndarray:
        return eis_to_complex(self.face_eis[:, 0], self.face_eis[:, 1], self.mesh)

    def mid_points(self) -> np.ndarray:
        return eis_to_complex(self.mid_eis[:, 0], self.mid_eis[:, 1], self.mesh)

    def vertex_points(self) -> np.ndarray:
        return eis_to_complex(self.vertex_eis[:, 0], self.vertex_eis[:, 1], self.mesh)

    def is_boundary_mid(self, m: int) -> bool:
        return self.mid_boundary_pos[m] >= 0

    def boundary_polygon(self) -> np.ndarray:
        """Boundary vertices (complex) in CCW order."""
        verts = self.he_vert[self.boundary_halfedges[0::2]]
        return self.vertex_points()[verts]

    def area(self) -> float:
        return self.n_faces * 1.5 * SQRT3 * self.mesh ** 2

    def __repr__(self) -> str:
        return f"HexDomain(faces={self.n_faces}, mesh={self.mesh:g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, HexDomain) and self.faces == other.faces and self.mesh == other.mesh

    def __hash__(self) -> int:
        return hash((self.faces, self.mesh))


def build_domain(faces: Iterable, mesh: float = 1.0) -> HexDomain:
    return HexDomain(faces, mesh)


@dataclass(frozen=True)
class MarkedDomain:
    """A domain with boundary mid-edges ``u_1..u_k`` in CCW order.

    Marks are indexed from 1 and cyclically: ``mark(k + 1) == mark(1)``.
    """

    domain: HexDomain
    marks: tuple[int, ...]

    def __post_init__(self):
        marks = tuple(int(m) for m in self.marks)
        object.__setattr__(self, "marks", marks)
        d = self.domain
        if len(set(marks)) != len(marks):
            raise InvalidMarks("marks must be distinct")
        pos = []
        for m in marks:
            if not 0 <= m < d.n_mids or d.mid_boundary_pos[m] < 0:
                raise InvalidMarks(f"mark {m} is not a boundary mid-edge")
            pos.append(int(d.mid_boundary_pos[m]))
        descents = sum(pos[i] > pos[(i + 1) % len(pos)] for i in range(len(pos)))
        if len(pos) > 1 and descents != 1:
            raise InvalidMarks("marks are not in counterclockwise order")

    @property
    def k(self) -> int:
        return len(self.marks)

    def mark(self, j: int) -> int:
        return self.marks[(j - 1) % self.k]

    def positions(self) -> list[int]:
        return [int(self.domain.mid_boundary_pos[m]) for m in self.marks]


def canonical_marks(d: HexDomain, mids: Sequence[int]) -> tuple[int, ...]:
    """Sort boundary mid-edges into CCW order starting from the smallest cycle position."""
    return tuple(sorted((int(m) for m in mids), key=lambda m: d.mid_boundary_pos[m]))


@dataclass(frozen=True)
class Arc:
    mids: tuple[int, ...]
    faces: tuple[int, ...]
    halfedges: tuple[int, ...]


def _cyclic_range(a: int, b: int, n: int) -> list[int]:
    return [(a + i) % n for i in range((b - a) % n + 1)]


def boundary_arc(md: MarkedDomain, j: int, jp: int) -> Arc:
    """Counterclockwise boundary arc from ``u_j`` to ``u_jp`` (both included).

    ``halfedges`` covers the arc at half-edge resolution: it starts with the
    second half of ``u_j`` and ends with the first half of ``u_jp``, so arcs
    between consecutive marks partition the boundary half-edge cycle.
    """
    if (j - jp) % md.k == 0:
        raise SameMark(f"arc endpoints coincide: {j}, {jp}")
    d = md.domain
    n = d.n_boundary
    pa = int(d.mid_boundary_pos[md.mark(j)])
    pb = int(d.mid_boundary_pos[md.mark(jp)])
    mids = tuple(int(d.boundary_mids[p]) for p in _cyclic_range(pa, pb, n))
    hes = tuple(
        int(d.boundary_halfedges[p]) for p in _cyclic_range(2 * pa + 1, 2 * pb, 2 * n)
    )
    faces: list[int] = []
    for m in mids:
        f = int(d.mid_faces[m, 0])
        if f not in faces:
            faces.append(f)
    return Arc(mids, tuple(faces), hes)


def vertex_midedges(d: HexDomain, v: int) -> tuple[int, int, int]:
    """The three mid-edges around ``v`` in CCW order, smallest angle first."""
    if d.vert_degree[v] != 3:
        raise BoundaryVertex(f"vertex {v} has {d.vert_degree[v]} incident half-edges")
    mids = [int(d.he_mid[h]) for h in d.vert_he[v]]
    vp = d.vertex_points()[v]
    mp = d.mid_points()[mids]
    ang = np.mod(np.angle(mp - vp), 2 * math.pi)
    order = np.argsort(ang, kind="stable")
    return tuple(mids[i] for i in order)


def mirror_mids(d: HexDomain) -> np.ndarray:
    """Image of each mid-edge under the reflection y -> -y (-1 if it leaves the domain)."""
    lookup = {tuple(c): i for i, c in enumerate(d.mid_eis.tolist())}
    # complex conjugation: a + b*tau -> (a - b) - b*tau
    return np.array(
        [lookup.get((a - b, -b), -1) for a, b in d.mid_eis.tolist()], dtype=np.int64
    )


def mirror_faces(faces: Iterable) -> set[FaceCoord]:
    return {FaceCoord(q + r, -r) for q, r in faces}


# -- discretization -----------------------------------------------------------

def _hexagon_rings(qs: np.ndarray, rs: np.ndarray, mesh: float) -> np.ndarray:
    cx = mesh * SQRT3 * (qs + rs / 2.0)
    cy = mesh * 1.5 * rs
    ang = np.deg2rad(30.0 + 60.0 * np.arange(6))
    xs = cx[:, None] + mesh * np.cos(ang)[None, :]
    ys = cy[:, None] + mesh * np.sin(ang)[None, :]
    return np.stack([xs, ys], axis=-1)


def faces_inside(polygon: Sequence[tuple[float, float]], mesh: float) -> set[FaceCoord]:
    """All faces whose closed hexagon lies in the closed polygon."""
    import shapely

    poly = shapely.Polygon(polygon)
    if not poly.is_valid or poly.area <= 0:
        raise ValueError("polygon must be simple with positive area")
    xmin, ymin, xmax, ymax = poly.bounds
    r_lo = math.floor(ymin / (1.5 * mesh)) - 1
    r_hi = math.ceil(ymax / (1.5 * mesh)) + 1
    qs, rs = [], []
    for r in range(r_lo, r_hi + 1):
        q_lo = math.floor(xmin / (SQRT3 * mesh) - r / 2.0) - 1
        q_hi = math.ceil(xmax / (SQRT3 * mesh) - r / 2.0) + 1
        qs.append(np.arange(q_lo, q_hi + 1))
        rs.append(np.full(q_hi - q_lo + 1, r))
    qa = np.concatenate(qs)
    ra = np.concatenate(rs)
    hexes = shapely.polygons(_hexagon_rings(qa, ra, mesh))
    shapely.prepare(poly)
    inside = shapely.covers(poly, hexes)
    return {FaceCoord(int(q), int(r)) for q, r in zip(qa[inside], ra[inside])}


def discretize(
    polygon: Sequence[tuple[float, float]],
    prime_ends: Sequence[tuple[float, float]],
    mesh: float,
) -> MarkedDomain:
    """Maximal-area hexagonal domain inside ``polygon`` with marks nearest to ``prime_ends``.

    Ties between equidistant boundary mid-edges go to the smallest position
    in the boundary cycle.
    """
    faces = faces_inside(polygon, mesh)
    if not faces:
        raise MeshTooCoarse(f"no closed hexagon of mesh {mesh:g} fits in the polygon")
    comps = _components(faces, _face_neighbors)
    import shapely

    c = shapely.Polygon(polygon).centroid
    centroid = complex(c.x, c.y)

    def nearest(comp):
        return min(abs(complex(*f.center(mesh)) - centroid) for f in comp)

    best = max(comps, key=lambda comp: (len(comp), -nearest(comp)))
    try:
        d = HexDomain(best, mesh)
    except NotSimplyConnected as exc:
        raise MeshTooCoarse(str(exc)) from exc

    bpts = d.mid_points()[d.boundary_mids]
    tol = 1e-9 * mesh
    marks = []
    for x, y in prime_ends:
        dist = np.abs(bpts - complex(x, y))
        pos = int(np.flatnonzero(dist <= dist.min() + tol)[0])
        marks.append(int(d.boundary_mids[pos]))
    if len(set(marks)) != len(marks):
        raise MarksCollide("two prime ends map to the same boundary mid-edge")
    try:
        return MarkedDomain(d, tuple(marks))
    except InvalidMarks as exc:
        raise MeshTooCoarse(str(exc)) from exc


# -- serialization ------------------------------------------------------------

def domain_to_dict(d: HexDomain, marks: Sequence[int] = ()) -> dict:
    return {
        "mesh": d.mesh,
        "faces": [[f.q, f.r] for f in d.faces],
        "marks": [int(m) for m in marks],
    }


def dumps_domain(d: HexDomain | MarkedDomain) -> str:
    if isinstance(d, MarkedDomain):
        payload = domain_to_dict(d.domain, d.marks)
    else:
        payload = domain_to_dict(d)
    return json.dumps(payload, sort_keys=True) + "\n"


def save_domain(d: HexDomain | MarkedDomain, path: str | Path) -> None:
    Path(path).write_text(dumps_domain(d), encoding="utf-8")


def loads_domain(text: str) -> tuple[HexDomain, tuple[int, ...]]:
    data = json.loads(text)
    d = HexDomain([tuple(f) for f in data["faces"]], data.get("mesh", 1.0))
    return d, tuple(int(m) for m in data.get("marks", []))


def load_domain(path: str | Path) -> tuple[HexDomain, tuple[int, ...]]:
    return loads_domain(Path(path).read_text(encoding="utf-8"))
