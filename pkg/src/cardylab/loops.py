"""Loop configurations on half-edges, the coloring/loop bijection and link patterns."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .errors import BoundaryMismatch, TooLarge, WrongMarkCount
from .hexlattice import HexDomain, MarkedDomain, boundary_arc, canonical_marks
from .percolation import Coloring, crossing_bits, sample_coloring
from .rng import RngState

ENUMERATION_CAP = 24


@dataclass(frozen=True)
class LoopConfig:
    """A set of half-edges stored as an integer bitset (bit h = half-edge h)."""

    domain: HexDomain = field(compare=False, repr=False)
    bits: int

    @classmethod
    def from_halfedges(cls, d: HexDomain, halfedges) -> "LoopConfig":
        bits = 0
        for h in halfedges:
            bits ^= 1 << int(h)
        return cls(d, bits)

    @classmethod
    def from_array(cls, d: HexDomain, xi) -> "LoopConfig":
        return cls.from_halfedges(d, np.flatnonzero(np.asarray(xi)))

    def to_array(self) -> np.ndarray:
        n = self.domain.n_halfedges
        raw = self.bits.to_bytes((n + 7) // 8, "little")
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=n, bitorder="little")

    def halfedges(self) -> list[int]:
        return np.flatnonzero(self.to_array()).tolist()

    def __xor__(self, other: "LoopConfig") -> "LoopConfig":
        return LoopConfig(self.domain, self.bits ^ other.bits)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    @cached_property
    def boundary(self) -> tuple[frozenset[int], frozenset[int]]:
        """(vertices, mid-edges) adjacent to an odd number of half-edges."""
        return odd_nodes(self.domain, self.to_array())

    @property
    def boundary_mids(self) -> frozenset[int]:
        return self.boundary[1]

    def has_boundary(self, mids) -> bool:
        verts, ms = self.boundary
        return not verts and ms == frozenset(int(m) for m in mids)


def odd_nodes(d: HexDomain, xi: np.ndarray) -> tuple[frozenset[int], frozenset[int]]:
    xi = np.asarray(xi, dtype=np.int64)
    mids = np.flatnonzero(xi.reshape(-1, 2).sum(axis=1) % 2)
    vdeg = np.bincount(d.he_vert, weights=xi, minlength=d.n_vertices).astype(np.int64)
    verts = np.flatnonzero(vdeg % 2)
    return frozenset(verts.tolist()), frozenset(mids.tolist())


@dataclass(frozen=True)
class LinkPattern:
    """Perfect matching of marked mid-edges; pairs and their members are sorted."""

    pairs: tuple[tuple[int, int], ...]

    @classmethod
    def from_pairs(cls, pairs) -> "LinkPattern":
        return cls(tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in pairs)))

    def partner(self, m: int) -> int:
        for a, b in self.pairs:
            if a == m:
                return b
            if b == m:
                return a
        raise KeyError(m)

    def links(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in self.pairs

    def is_noncrossing(self, order: Sequence[int]) -> bool:
        pos = {m: i for i, m in enumerate(order)}
        chords = [tuple(sorted((pos[a], pos[b]))) for a, b in self.pairs]
        for a, b in chords:
            for c, e in chords:
                if a < c < b < e:
                    return False
        return True


# -- reference configurations ---------------------------------------------------

def face_masks(d: HexDomain) -> list[int]:
    """Bitset of the 12 boundary half-edges of each face."""
    return [sum(1 << int(h) for h in row) for row in d.face_halfedges]


def difference_set(d: HexDomain, c: Coloring) -> LoopConfig:
    """Half-edges whose two sides differ when the outside is uniformly yellow."""
    bits = 0
    masks = face_masks(d)
    for f in np.flatnonzero(c.blue):
        bits ^= masks[f]
    return LoopConfig(d, bits)


def reference_config(md: MarkedDomain) -> LoopConfig:
    """Boundary half-edges along arcs (u1 u2), (u3 u4), ...: the all-yellow configuration."""
    if md.k % 2:
        raise WrongMarkCount("an even number of marks is required")
    hes: list[int] = []
    for j in range(1, md.k + 1, 2):
        hes.extend(boundary_arc(md, j, j + 1).halfedges)
    return LoopConfig.from_halfedges(md.domain, hes)


def outside_colors(md: MarkedDomain) -> np.ndarray:
    """Convention color (1 = blue) outside each boundary half-edge; -1 for interior ones."""
    out = np.full(md.domain.n_halfedges, -1, dtype=np.int64)
    for j in range(1, md.k + 1):
        for h in boundary_arc(md, j, j + 1).halfedges:
            out[h] = 1 if j % 2 == 1 else 0
    return out


def coloring_to_loops(md: MarkedDomain, c: Coloring) -> LoopConfig:
    """Half-edge ``e`` is in the configuration iff the colors on its two sides differ.

    The outside is blue along arcs (u1 u2) and (u3 u4) and yellow along
    (u2 u3) and (u4 u1).
    """
    if md.k != 4:
        raise WrongMarkCount(f"coloring_to_loops needs 4 marks, got {md.k}")
    d = md.domain
    blue = c.blue.astype(np.int64)
    outside = outside_colors(md)
    f, g = d.he_faces[:, 0], d.he_faces[:, 1]
    other = np.where(g >= 0, blue[np.maximum(g, 0)], outside)
    return LoopConfig.from_array(d, blue[f] != other)


# -- shortest half-edge paths ------------------------------------------------------

def _node_adjacency(d: HexDomain):
    """Node ids: mid-edge m -> m, vertex v -> M + v.  Neighbors sorted by half-edge id."""
    M = d.n_mids
    adj: list[list[tuple[int, int]]] = [[] for _ in range(M + d.n_vertices)]
    for h in range(d.n_halfedges):
        m, v = int(d.he_mid[h]), int(d.he_vert[h])
        adj[m].append((M + v, h))
        adj[M + v].append((m, h))
    return adj


def shortest_path_tree(d: HexDomain, source_mid: int) -> np.ndarray:
    """Half-edge bitsets (one row per mid-edge) of BFS paths from ``source_mid``.

    Ties go to the smallest half-edge index.
    """
    adj = _node_adjacency(d)
    parent = {source_mid: (-1, -1)}
    queue = deque([source_mid])
    while queue:
        x = queue.popleft()
        for y, h in adj[x]:
            if y not in parent:
                parent[y] = (x, h)
                queue.append(y)
    out = np.zeros((d.n_mids, d.n_halfedges), dtype=np.uint8)
    for t in range(d.n_mids):
        x = t
        while x != source_mid:
            x, h = parent[x]
            out[t, h] ^= 1
    return out


def halfedge_path(d: HexDomain, a: int, b: int) -> LoopConfig:
    return LoopConfig.from_array(d, shortest_path_tree(d, a)[b])


# -- enumeration and sampling --------------------------------------------------------

def _check_cap(d: HexDomain, cap: int) -> None:
    if d.n_faces > cap:
        raise TooLarge(f"{d.n_faces} faces exceed the enumeration cap {cap}")


def enumerate_from(reference: LoopConfig, cap: int = ENUMERATION_CAP) -> Iterator[LoopConfig]:
    """``reference ^ D(sigma)`` over all colorings sigma, in Gray-code order."""
    d = reference.domain
    _check_cap(d, cap)
    masks = face_masks(d)
    bits = reference.bits
    yield LoopConfig(d, bits)
    for i in range(1, 1 << d.n_faces):
        bits ^= masks[(i & -i).bit_length() - 1]
        yield LoopConfig(d, bits)


def enumerate_loop_configs(md: MarkedDomain, cap: int = ENUMERATION_CAP) -> Iterator[LoopConfig]:
    return enumerate_from(reference_config(md), cap)


def sample_loop_config(md: MarkedDomain, rng_state: RngState) -> LoopConfig:
    return reference_config(md) ^ difference_set(md.domain, sample_coloring(md.domain, rng_state))


def chi_square_uniform(hist, z: float = 2.3263478740408408) -> tuple[float, float]:
    """Pearson statistic against the uniform law and its upper 99% point.

    The critical value uses the Wilson-Hilferty cube-root approximation,
    which is within a few percent of the exact quantile for any number of
    cells.
    """
    hist = np.asarray(hist, dtype=float)
    k = len(hist) - 1
    if k < 1:
        return 0.0, float("inf")
    e = hist.sum() / len(hist)
    stat = float(((hist - e) ** 2).sum() / e)
    a = 2.0 / (9.0 * k)
    return stat, float(k * (1 - a + z * a ** 0.5) ** 3)


# -- link patterns ----------------------------------------------------------------------

def trace_from(d: HexDomain, xi: np.ndarray, start: int, stops: set[int]) -> int:
    """Follow the configuration from disorder ``start`` until another mid-edge in ``stops``."""
    here = [h for h in d.mid_he[start] if xi[h]]
    if len(here) != 1:
        raise BoundaryMismatch(f"mid-edge {start} is not a disorder")
    h = int(here[0])
    for _ in range(d.n_halfedges + 1):
        v = d.he_vert[h]
        nxt = [g for g in d.vert_he[v] if g >= 0 and g != h and xi[g]]
        if len(nxt) != 1:
            raise BoundaryMismatch(f"vertex {v} has odd degree in the configuration")
        m = int(d.he_mid[nxt[0]])
        if m in stops:
            return m
        a, b = d.mid_he[m]
        h = int(b if a == nxt[0] else a)
        if not xi[h]:
            raise BoundaryMismatch(f"mid-edge {m} is an unexpected disorder")
    raise BoundaryMismatch("trace did not terminate")


def link_pattern(xi: LoopConfig, marks: Sequence[int]) -> LinkPattern:
    """Pair up marks along the interface part of ``xi``."""
    marks = [int(m) for m in marks]
    if len(marks) % 2 or not xi.has_boundary(marks):
        raise BoundaryMismatch("configuration boundary differs from the marks")
    arr = xi.to_array()
    stops = set(marks)
    pairs = []
    done: set[int] = set()
    for m in marks:
        if m in done:
            continue
        p = trace_from(xi.domain, arr, m, stops)
        pairs.append((m, p))
        done.update((m, p))
    return LinkPattern.from_pairs(pairs)


# -- numba kernels -----------------------------------------------------------------------

@njit(cache=True, nogil=True)
def trace_partner(xi, start, is_mark, mid_he, other_he, twin, he_mid):
    """Mark reached from disorder ``start``; negative on malformed input.

    ``other_he[h]`` lists the other half-edges at the vertex of ``h`` and
    ``twin[h]`` is the half-edge sharing its mid-edge.
    """
    if xi[mid_he[start, 0]]:
        h = mid_he[start, 0]
    elif xi[mid_he[start, 1]]:
        h = mid_he[start, 1]
    else:
        return -1
    for _ in range(xi.shape[0] + 1):
        a = other_he[h, 0]
        b = other_he[h, 1]
        if a >= 0 and xi[a]:
            h2 = a
        elif b >= 0 and xi[b]:
            h2 = b
        else:
            return -2
        m = he_mid[h2]
        if is_mark[m]:
            return m
        h = twin[h2]
        if not xi[h]:
            return -3
    return -4


def trace_tables(d: HexDomain) -> tuple[np.ndarray, np.ndarray]:
    """(other_he, twin) lookup tables for ``trace_partner``."""
    other = np.full((d.n_halfedges, 2), -1, dtype=np.int64)
    for h in range(d.n_halfedges):
        rest = [int(g) for g in d.vert_he[d.he_vert[h]] if g >= 0 and g != h]
        other[h, : len(rest)] = rest
    pair = d.mid_he[d.he_mid]
    twin = np.where(pair[:, 0] == np.arange(d.n_halfedges), pair[:, 1], pair[:, 0]).astype(np.int64)
    return other, twin


@njit(cache=True, nogil=True)
def _boundary_is(xi, target_mid, mid_he, vert_he):
    for m in range(mid_he.shape[0]):
        if (xi[mid_he[m, 0]] ^ xi[mid_he[m, 1]]) != target_mid[m]:
            return False
    for v in range(vert_he.shape[0]):
        par = 0
        for j in range(3):
            g = vert_he[v, j]
            if g >= 0:
                par ^= xi[g]
        if par:
            return False
    return True


@njit(cache=True, nogil=True)
def _count_distinct(hashes, xi0, face_halfedges):
    """Distinct configurations among xi0 + span(faces), given their 64-bit hashes.

    Equal hashes are settled by rebuilding both configurations exactly.
    """
    n = hashes.shape[0]
    order = np.argsort(hashes)
    distinct = n
    a_cfg = np.empty_like(xi0)
    b_cfg = np.empty_like(xi0)
    for i in range(1, n):
        if hashes[order[i]] != hashes[order[i - 1]]:
            continue
        for cfg, idx in ((a_cfg, order[i]), (b_cfg, order[i - 1])):
            cfg[:] = xi0
            for f in range(face_halfedges.shape[0]):
                if (idx >> f) & 1:
                    for k in range(12):
                        cfg[face_halfedges[f, k]] ^= 1
        same = True
        for h in range(xi0.shape[0]):
            if a_cfg[h] != b_cfg[h]:
                same = False
                break
        if same:
            distinct -= 1
    return distinct


# columns of the subset table
BOUNDARY_OK, DISTINCT, CROSS0, CROSS1, PAIR12, PAIR13, PAIR14, BAD0, BAD1 = range(9)


@njit(cache=True, nogil=True)
def bijection_and_pattern_kernel(quads, boundary_halfedges, mid_pos, face_halfedges, face_mids,
                                mid_faces, nbrs, mid_he, vert_he, he_mid, other_he, twin,
                                he_keys, fault_he):
    """Enumerate every coloring for each CCW quadruple q1..q4 of boundary mid-edges.

    Configurations are xi(s) = xi0 + D(s), with xi0 the boundary half-edges
    of arcs (q1 q2) and (q3 q4).  Columns per quadruple:

    BOUNDARY_OK  the disorders of xi0 are exactly q1..q4 (face cycles have
                 no boundary, so every xi(s) shares them)
    DISTINCT     number of distinct xi(s)
    CROSS0/1     colorings with a blue (q1 q2)<->(q3 q4), resp. (q2 q3)<->(q4 q1), path
    PAIR12/13/14 configurations pairing q1 with q2, q3, q4
    BAD0/1       colorings where crossing and link pattern disagree, for the
                 labeling starting at q1, resp. q2

    The labeling starting at q2 has reference xi0 + (boundary cycle) = xi0 +
    D(all blue), so its configuration for s is xi(complement of s).
    """
    F = face_halfedges.shape[0]
    H = he_mid.shape[0]
    M = mid_he.shape[0]
    n2 = 2 * boundary_halfedges.shape[0]
    nb = boundary_halfedges.shape[0]
    full = (1 << F) - 1
    out = np.zeros((quads.shape[0], 9), dtype=np.int64)
    face_keys = np.zeros(F, dtype=np.uint64)
    for f in range(F):
        for k in range(12):
            face_keys[f] ^= he_keys[face_halfedges[f, k]]
    hashes = np.empty(1 << F, dtype=np.uint64)
    pairing = np.empty(1 << F, dtype=np.int64)
    xi = np.empty(H, dtype=np.uint8)
    xi0 = np.empty(H, dtype=np.uint8)
    is_mark = np.zeros(M, dtype=np.uint8)
    side_a = np.zeros(F, dtype=np.uint8)
    side_b = np.zeros(F, dtype=np.uint8)
    side_c = np.zeros(F, dtype=np.uint8)
    side_d = np.zeros(F, dtype=np.uint8)
    words0 = np.zeros(max(1, (1 << F) // 64), dtype=np.uint64)
    words1 = np.zeros(max(1, (1 << F) // 64), dtype=np.uint64)
    for qi in range(quads.shape[0]):
        u = quads[qi]
        p = np.empty(4, dtype=np.int64)
        for j in range(4):
            p[j] = mid_pos[u[j]]
        xi[:] = 0
        side_a[:] = 0
        side_b[:] = 0
        side_c[:] = 0
        side_d[:] = 0
        # reference: arcs (1,2) and (3,4) at half-edge resolution
        for j in (0, 2):
            end = (2 * p[j + 1]) % n2
            k = 2 * p[j] + 1
            while True:
                kk = k % n2
                xi[boundary_halfedges[kk // 2, kk % 2]] ^= 1
                if kk == end:
                    break
                k += 1
        # faces along each of the four arcs, endpoints included
        for j in range(4):
            end = p[(j + 1) % 4] % nb
            k = p[j]
            while True:
                kk = k % nb
                f = mid_faces[he_mid[boundary_halfedges[kk, 0]], 0]
                if j == 0:
                    side_a[f] = 1
                elif j == 1:
                    side_b[f] = 1
                elif j == 2:
                    side_c[f] = 1
                else:
                    side_d[f] = 1
                if kk == end:
                    break
                k += 1
        if fault_he >= 0:
            xi[fault_he] ^= 1
        for j in range(4):
            is_mark[u[j]] = 1
        out[qi, BOUNDARY_OK] = _boundary_is(xi, is_mark, mid_he, vert_he)
        xi0[:] = xi
        crossing_bits(nbrs, side_a, side_c, words0)
        crossing_bits(nbrs, side_b, side_d, words1)
        hsh = np.uint64(0)
        for h in range(H):
            if xi[h]:
                hsh ^= he_keys[h]
        for idx in range(1 << F):
            if idx > 0:
                f = 0
                while not (idx >> f) & 1:
                    f += 1
                hsh ^= face_keys[f]
                for t in range(12):
                    xi[face_halfedges[f, t]] ^= 1
            g = idx ^ (idx >> 1)
            hashes[g] = hsh
            partner = trace_partner(xi, u[0], is_mark, mid_he, other_he, twin, he_mid)
            if partner == u[1]:
                pairing[g] = 2
            elif partner == u[2]:
                pairing[g] = 3
            elif partner == u[3]:
                pairing[g] = 4
            else:
                pairing[g] = -1
        c0 = 0
        c1 = 0
        bad0 = 0
        bad1 = 0
        for g in range(1 << F):
            pr = pairing[g]
            if pr == 2:
                out[qi, PAIR12] += 1
            elif pr == 3:
                out[qi, PAIR13] += 1
            elif pr == 4:
                out[qi, PAIR14] += 1
            e0 = (words0[g >> 6] >> np.uint64(g & 63)) & np.uint64(1) == 1
            e1 = (words1[g >> 6] >> np.uint64(g & 63)) & np.uint64(1) == 1
            c0 += e0
            c1 += e1
            if pr < 0 or e0 != (pr == 4):
                bad0 += 1
            pc = pairing[g ^ full]
            if pc < 0 or e1 != (pc == 2):
                bad1 += 1
        out[qi, DISTINCT] = _count_distinct(hashes, xi0, face_halfedges)
        out[qi, CROSS0] = c0
        out[qi, CROSS1] = c1
        out[qi, BAD0] = bad0
        out[qi, BAD1] = bad1
        for j in range(4):
            is_mark[u[j]] = 0
    return out


def halfedge_keys(n: int, seed: int = 0x5EED) -> np.ndarray:
    """Fixed pseudo-random 64-bit keys used to hash half-edge sets."""
    from .rng import mix64_py, GAMMA, MASK64

    return np.array([mix64_py((seed + (h + 1) * GAMMA) & MASK64) for h in range(n)], dtype=np.uint64)


def domain_arrays(d: HexDomain) -> dict:
    other, twin = trace_tables(d)
    return dict(
        boundary_halfedges=d.boundary_halfedges.reshape(-1, 2),
        mid_pos=d.mid_boundary_pos,
        face_halfedges=d.face_halfedges,
        face_mids=d.face_mids,
        mid_faces=d.mid_faces,
        nbrs=d.face_nbrs,
        mid_he=d.mid_he,
        vert_he=d.vert_he,
        he_mid=d.he_mid,
        other_he=other,
        twin=twin,
        he_keys=halfedge_keys(d.n_halfedges),
    )


def pattern_table(d: HexDomain, quads, fault_he: int = -1) -> np.ndarray:
    quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    return bijection_and_pattern_kernel(quads, fault_he=fault_he, **domain_arrays(d))


def boundary_is_face_sum(d: HexDomain) -> bool:
    """The boundary half-edge cycle equals the sum of all face cycles."""
    total = np.zeros(d.n_halfedges, dtype=np.uint8)
    for row in d.face_halfedges:
        total[row] ^= 1
    ring = np.zeros(d.n_halfedges, dtype=np.uint8)
    ring[d.boundary_halfedges.ravel()] = 1
    return bool((total == ring).all())


def face_cycles_closed(d: HexDomain) -> bool:
    """Every face boundary cycle has empty boundary (so adding it keeps the disorders)."""
    zero = np.zeros(d.n_mids, dtype=np.uint8)
    for row in d.face_halfedges:
        xi = np.zeros(d.n_halfedges, dtype=np.uint8)
        xi[row] = 1
        if not _boundary_is(xi, zero, d.mid_he, d.vert_he):
            return False
    return True


@dataclass
class EquivalenceReport:
    n_colorings: int
    crossing_count: int
    pattern_count: int
    mismatches: int
    boundary_ok: bool
    distinct_configs: int

    @property
    def ok(self) -> bool:
        return (
            self.mismatches == 0
            and self.boundary_ok
            and self.crossing_count == self.pattern_count
            and self.distinct_configs == self.n_colorings
        )


def crossing_equivalence_check(md: MarkedDomain, cap: int = ENUMERATION_CAP) -> EquivalenceReport:
    """Per-coloring comparison of the (u1 u2)<->(u3 u4) crossing with the u1-u4, u2-u3 link pattern."""
    if md.k != 4:
        raise WrongMarkCount(f"need 4 marks, got {md.k}")
    _check_cap(md.domain, cap)
    d = md.domain
    srt = canonical_marks(d, md.marks)
    shift = srt.index(md.marks[0]) % 2
    row = pattern_table(d, [srt])[0]
    n = 1 << d.n_faces
    if shift == 0:
        cross, pattern, bad = row[CROSS0], row[PAIR14], row[BAD0]
    else:
        # the configuration paired u1-u4 here pairs q1 with q2 in the sorted labeling
        cross, pattern, bad = row[CROSS1], row[PAIR12], row[BAD1]
    return EquivalenceReport(
        n_colorings=n,
        crossing_count=int(cross),
        pattern_count=int(pattern),
        mismatches=int(bad),
        boundary_ok=bool(row[BOUNDARY_OK]),
        distinct_configs=int(row[DISTINCT]),
    )


def gf2_rank(rows: Sequence[int]) -> int:
    """Rank over GF(2) of integer-encoded bit rows."""
    basis: dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top in basis:
                r ^= basis[top]
            else:
                basis[top] = r
                rank += 1
                break
    return rank


def cycle_space_dimension(d: HexDomain) -> int:
    """Dimension of {xi : boundary(xi) = empty}, from the rank of the incidence map."""
    # one row per half-edge: its two endpoint nodes (mid-edge, vertex)
    M = d.n_mids
    rows = [(1 << int(d.he_mid[h])) | (1 << (M + int(d.he_vert[h]))) for h in range(d.n_halfedges)]
    return d.n_halfedges - gf2_rank(rows)
