"""The observable F = sum_j tau^j H_j on mid-edges, exact and Monte Carlo.

H_j(z) is the probability, under the uniform measure on loop
configurations with disorders {u1, u2, u3, z}, that the interface from z
ends at u_j.  The exact backend counts over all 2^F configurations, so
H_j = count_j / 2^F and F is stored through its integer numerators in
the basis (1, tau).

Face centers and mid-edges use exact Eisenstein coordinates in units of
mesh / (2 sqrt 3); contour integrals are reported in those units.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .eisenstein import Eisenstein
from .errors import (MarkAtVertex, MarkOnContour, NotAContour, NotDefined,
                     TooLarge, WrongMarkCount)
from .hexlattice import HexDomain, MarkedDomain, canonical_marks, domain_to_dict, vertex_midedges
from .loops import (ENUMERATION_CAP, reference_config, shortest_path_tree, trace_partner,
                    trace_tables)
from .percolation import crossing_bits, popcount64, run_blocks, wilson_interval
from .rng import fill_bits, stream_key
from .spinor import build_cover


# -- kernels ------------------------------------------------------------------

@njit(cache=True, nogil=True)
def field_counts_kernel(triples, z_mask, trees, tree_row, face_halfedges, mid_he, other_he, twin, he_mid):
    """Link counts for every triple and every mid-edge z.

    ``trees[tree_row[u], m]`` is a shortest half-edge path from u to m.  The
    reference for disorders {u1, u2, u3, z} is path(u1, u2) xor path(u3, z);
    adding face cycles in Gray-code order visits all of W.  Rows at marks are
    -1, as are rows with ``z_mask[z] == 0``; a row of -2 flags a
    configuration whose trace failed.
    """
    T = triples.shape[0]
    F = face_halfedges.shape[0]
    M = mid_he.shape[0]
    H = he_mid.shape[0]
    out = np.zeros((T, M, 3), dtype=np.int64)
    xi = np.empty(H, dtype=np.uint8)
    is_mark = np.zeros(M, dtype=np.uint8)
    for t in range(T):
        u1, u2, u3 = triples[t, 0], triples[t, 1], triples[t, 2]
        is_mark[u1] = 1
        is_mark[u2] = 1
        is_mark[u3] = 1
        base = trees[tree_row[u1], u2]
        for z in range(M):
            if is_mark[z] or not z_mask[z]:
                out[t, z, :] = -1
                continue
            path = trees[tree_row[u3], z]
            for h in range(H):
                xi[h] = base[h] ^ path[h]
            is_mark[z] = 1
            bad = False
            for idx in range(1 << F):
                if idx > 0:
                    f = 0
                    while not (idx >> f) & 1:
                        f += 1
                    for k in range(12):
                        xi[face_halfedges[f, k]] ^= 1
                p = trace_partner(xi, z, is_mark, mid_he, other_he, twin, he_mid)
                if p == u1:
                    out[t, z, 0] += 1
                elif p == u2:
                    out[t, z, 1] += 1
                elif p == u3:
                    out[t, z, 2] += 1
                else:
                    bad = True
            if bad:
                out[t, z, :] = -2
            is_mark[z] = 0
        is_mark[u1] = 0
        is_mark[u2] = 0
        is_mark[u3] = 0
    return out


@njit(cache=True, nogil=True)
def _mc_partner_counts(key, start, stop, ref, he_f, he_g, z, marks, is_mark,
                       mid_he, other_he, twin, he_mid):
    """Partner histogram for samples ``[start, stop)``; the last slot counts failed traces.

    A half-edge is present when ref xor blue(f) xor blue(g) is 1, where f, g
    are its two faces (g = -1 outside).  Only half-edges on the traced path
    are evaluated.
    """
    F = 0
    for h in range(he_f.shape[0]):
        if he_f[h] + 1 > F:
            F = he_f[h] + 1
    blue = np.empty(F, dtype=np.uint8)
    counts = np.zeros(4, dtype=np.int64)
    for s in range(start, stop):
        fill_bits(key, s, F, blue)
        h0 = mid_he[z, 0]
        h1 = mid_he[z, 1]
        if _present(h0, ref, blue, he_f, he_g):
            h = h0
        elif _present(h1, ref, blue, he_f, he_g):
            h = h1
        else:
            counts[3] += 1
            continue
        partner = -1
        for _ in range(he_f.shape[0] + 1):
            a = other_he[h, 0]
            b = other_he[h, 1]
            if a >= 0 and _present(a, ref, blue, he_f, he_g):
                h2 = a
            elif b >= 0 and _present(b, ref, blue, he_f, he_g):
                h2 = b
            else:
                break
            m = he_mid[h2]
            if is_mark[m]:
                partner = m
                break
            h = twin[h2]
        if partner == marks[0]:
            counts[0] += 1
        elif partner == marks[1]:
            counts[1] += 1
        elif partner == marks[2]:
            counts[2] += 1
        else:
            counts[3] += 1
    return counts


@njit(cache=True, nogil=True, inline="always")
def _present(h, ref, blue, he_f, he_g):
    x = ref[h] ^ blue[he_f[h]]
    if he_g[h] >= 0:
        x ^= blue[he_g[h]]
    return x


@njit(cache=True, nogil=True)
def quad_crossing_counts(quads, mid_pos, bface, nbrs):
    """Number of colorings with a blue path between arcs (q1 q2) and (q3 q4), per quad.

    ``bface[p]`` is the face owning the boundary mid-edge at cycle position p.
    """
    F = nbrs.shape[0]
    nb = bface.shape[0]
    out = np.zeros(quads.shape[0], dtype=np.int64)
    side_a = np.zeros(F, dtype=np.uint8)
    side_b = np.zeros(F, dtype=np.uint8)
    words = np.zeros(max(1, (1 << F) // 64), dtype=np.uint64)
    for qi in range(quads.shape[0]):
        side_a[:] = 0
        side_b[:] = 0
        for j in (0, 2):
            k = mid_pos[quads[qi, j]]
            end = mid_pos[quads[qi, j + 1]]
            while True:
                if j == 0:
                    side_a[bface[k]] = 1
                else:
                    side_b[bface[k]] = 1
                if k == end:
                    break
                k = (k + 1) % nb
        crossing_bits(nbrs, side_a, side_b, words)
        n = 0
        for w in range(words.shape[0]):
            n += popcount64(words[w])
        out[qi] = n
    return out


# -- field type ---------------------------------------------------------------

def _f_numerators(c: np.ndarray) -> np.ndarray:
    """(..., 3) H-counts -> (..., 2) numerators of F in the basis (1, tau)."""
    return np.stack([c[..., 2] - c[..., 1], c[..., 0] - c[..., 1]], axis=-1)


@dataclass(frozen=True)
class ObservableField:
    """H-counts per mid-edge over a common denominator.

    ``counts[z]`` is (n1, n2, n3) with H_j = n_j / denominator; rows equal to
    -1 are marks or (for Monte Carlo) mid-edges that were not sampled.
    """

    domain: MarkedDomain
    counts: np.ndarray = field(repr=False)
    denominator: int
    exact: bool
    seed: int | None = None

    def _row(self, z: int) -> np.ndarray:
        z = int(z)
        if z in self.domain.marks:
            raise NotDefined(f"the observable is not defined at the mark {z}")
        row = self.counts[z]
        if row[0] < 0:
            raise NotDefined(f"no value at mid-edge {z}")
        return row

    @property
    def z_list(self) -> list[int]:
        return [int(z) for z in np.flatnonzero(self.counts[:, 0] >= 0)]

    def H(self, z: int):
        row = self._row(z)
        if self.exact:
            return tuple(Fraction(int(n), self.denominator) for n in row)
        return tuple(int(n) / self.denominator for n in row)

    def F(self, z: int):
        h1, h2, h3 = self.H(z)
        if self.exact:
            return Eisenstein(h3 - h2, h1 - h2)
        return complex(Eisenstein(0)) + h1 * complex(Eisenstein(0, 1)) \
            + h2 * complex(Eisenstein(-1, -1)) + h3

    def ci(self, z: int) -> tuple[tuple[float, float], ...]:
        row = self._row(z)
        return tuple(wilson_interval(int(n), self.denominator) for n in row)

    def to_dict(self) -> dict:
        d = self.domain.domain
        values = {}
        for z in self.z_list:
            if self.exact:
                values[str(z)] = [str(h) for h in self.H(z)]
            else:
                values[str(z)] = {"H": list(self.H(z)), "ci": [list(c) for c in self.ci(z)]}
        return {
            "domain": domain_to_dict(d),
            "marks": list(self.domain.marks),
            "backend": "exact" if self.exact else "mc",
            "denominator": self.denominator,
            "seed": self.seed,
            "values": values,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ObservableField":
        from .hexlattice import build_domain

        raw = data["domain"]
        d = build_domain([tuple(f) for f in raw["faces"]], raw["mesh"])
        md = MarkedDomain(d, tuple(data["marks"]))
        den = int(data["denominator"])
        counts = np.full((d.n_mids, 3), -1, dtype=np.int64)
        for z, v in data["values"].items():
            if data["backend"] == "exact":
                hs = [Fraction(x) for x in v]
                counts[int(z)] = [int(h * den) for h in hs]
            else:
                counts[int(z)] = [round(h * den) for h in v["H"]]
        return cls(md, counts, den, data["backend"] == "exact", data.get("seed"))


# -- exact backend --------------------------------------------------------------

def path_trees(d: HexDomain, sources: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked shortest-path trees and the row index of each source mid-edge."""
    sources = sorted({int(s) for s in sources})
    row = np.full(d.n_mids, -1, dtype=np.int64)
    trees = np.empty((len(sources), d.n_mids, d.n_halfedges), dtype=np.uint8)
    for i, s in enumerate(sources):
        row[s] = i
        trees[i] = shortest_path_tree(d, s)
    return trees, row


def field_counts(d: HexDomain, triples, trees=None, tree_row=None, z_list=None) -> np.ndarray:
    """Exact H-counts (T, n_mids, 3) for CCW-ordered boundary triples.

    With ``z_list`` only those mid-edges are computed; other rows are -1.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if trees is None:
        trees, tree_row = path_trees(d, np.unique(triples[:, [0, 2]]))
    mask = np.ones(d.n_mids, dtype=np.uint8)
    if z_list is not None:
        mask[:] = 0
        mask[np.asarray(list(z_list), dtype=np.int64)] = 1
    other, twin = trace_tables(d)
    return field_counts_kernel(triples, mask, trees, tree_row, d.face_halfedges, d.mid_he,
                               other, twin, d.he_mid)


def admissible_triples(d: HexDomain) -> list[tuple[int, int, int]]:
    """Every 3-subset of boundary mid-edges, listed once in CCW order from its first position."""
    return [tuple(int(x) for x in c) for c in combinations(d.boundary_mids.tolist(), 3)]


def observable_exact(md: MarkedDomain, cap: int = ENUMERATION_CAP) -> ObservableField:
    if md.k != 3:
        raise WrongMarkCount(f"the observable needs 3 marks, got {md.k}")
    d = md.domain
    if d.n_faces > cap:
        raise TooLarge(f"{d.n_faces} faces exceed the enumeration cap {cap}")
    counts = field_counts(d, [md.marks])[0]
    if (counts == -2).any():
        raise RuntimeError("interface trace failed during enumeration")
    return ObservableField(md, counts, 1 << d.n_faces, True)


# -- Monte Carlo backend ----------------------------------------------------------

def _reference_for(md: MarkedDomain, z: int) -> np.ndarray:
    d = md.domain
    if d.mid_boundary_pos[z] >= 0:
        quad = MarkedDomain(d, canonical_marks(d, (*md.marks, z)))
        return reference_config(quad).to_array()
    return build_cover(d, (*md.marks, z)).flip


def observable_mc(md: MarkedDomain, z_list: Sequence[int], trials: int, seed: int,
                  workers: int | None = None) -> ObservableField:
    """Estimate H_j(z) from ``trials`` uniform configurations per z.

    Every z uses the same coloring stream, so estimates at different z are
    positively correlated but each is unbiased.
    """
    if md.k != 3:
        raise WrongMarkCount(f"the observable needs 3 marks, got {md.k}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = md.domain
    key = np.uint64(stream_key(seed))
    marks = np.asarray(md.marks, dtype=np.int64)
    he_f = d.he_faces[:, 0].astype(np.int64)
    he_g = d.he_faces[:, 1].astype(np.int64)
    counts = np.full((d.n_mids, 3), -1, dtype=np.int64)
    other, twin = trace_tables(d)
    for z in z_list:
        z = int(z)
        if z in md.marks:
            raise NotDefined(f"the observable is not defined at the mark {z}")
        ref = _reference_for(md, z)
        is_mark = np.zeros(d.n_mids, dtype=np.uint8)
        is_mark[list(md.marks) + [z]] = 1

        def block(a, b, ref=ref, z=z, is_mark=is_mark):
            return _mc_partner_counts(key, a, b, ref, he_f, he_g, z, marks, is_mark,
                                      d.mid_he, other, twin, d.he_mid)

        c = run_blocks(block, trials, workers)
        if c[3]:
            raise RuntimeError(f"{c[3]} interface traces failed at mid-edge {z}")
        counts[z] = c[:3]
    return ObservableField(md, counts, trials, False, seed)


# -- holomorphicity and contour integrals -------------------------------------

def holomorphicity_residual(fld: ObservableField, v: int):
    """sum_k tau^k F(z_k) over the mid-edges around ``v`` in CCW order."""
    z = vertex_midedges(fld.domain.domain, v)
    if any(m in fld.domain.marks for m in z):
        raise MarkAtVertex(f"vertex {v} touches a mark")
    total = Eisenstein(0) if fld.exact else 0j
    for k, m in enumerate(z, start=1):
        w = Eisenstein.tau_power(k)
        total = total + (w * fld.F(m) if fld.exact else complex(w) * fld.F(m))
    return total


def ccw_vertex_mids(d: HexDomain, vertices: Sequence[int] | None = None) -> np.ndarray:
    """(V, 3) mid-edges around each degree-3 vertex, CCW from the smallest angle."""
    if vertices is None:
        vertices = np.flatnonzero(d.vert_degree == 3)
    return np.array([vertex_midedges(d, int(v)) for v in vertices], dtype=np.int64).reshape(-1, 3)


def residual_numerators(counts: np.ndarray, vmids: np.ndarray) -> np.ndarray:
    """(T, V, 2) residual numerators; vertices touching a mark give (0, 0) and must be masked."""
    fz = _f_numerators(counts)  # (T, M, 2)
    a1, b1 = fz[:, vmids[:, 0], 0], fz[:, vmids[:, 0], 1]
    a2, b2 = fz[:, vmids[:, 1], 0], fz[:, vmids[:, 1], 1]
    a3, b3 = fz[:, vmids[:, 2], 0], fz[:, vmids[:, 2], 1]
    # tau (a, b) = (-b, a - b);  tau^2 (a, b) = (b - a, -a)
    ra = -b1 + (b2 - a2) + a3
    rb = (a1 - b1) - a2 + b3
    res = np.stack([ra, rb], axis=-1)
    touched = (counts[:, vmids, 0] == -1).any(axis=-1)
    res[touched] = 0
    return res


def contour_edges(d: HexDomain, contour: Sequence[int]) -> tuple[list[int], list[tuple[int, int]]]:
    """Shared mid-edges e_j and center steps w_{j+1} - w_j of a closed face cycle."""
    faces = [int(f) for f in contour]
    if len(faces) > 1 and faces[0] == faces[-1]:
        faces = faces[:-1]
    if len(faces) < 3 or len(set(faces)) != len(faces):
        raise NotAContour("a contour needs at least 3 distinct faces")
    if any(not 0 <= f < d.n_faces for f in faces):
        raise NotAContour("contour face out of range")
    mids, steps = [], []
    for j, f in enumerate(faces):
        g = faces[(j + 1) % len(faces)]
        hits = np.flatnonzero(d.face_nbrs[f] == g)
        if len(hits) != 1:
            raise NotAContour(f"faces {f} and {g} do not share an edge")
        mids.append(int(d.face_mids[f, hits[0]]))
        steps.append(tuple(int(x) for x in d.face_eis[g] - d.face_eis[f]))
    return mids, steps


def discrete_contour_integral(fld: ObservableField, contour: Sequence[int]) -> Eisenstein:
    """sum_j F(e_j) (w_{j+1} - w_j) with face centers in units of mesh / (2 sqrt 3)."""
    if not fld.exact:
        raise ValueError("contour integrals need an exact field")
    mids, steps = contour_edges(fld.domain.domain, contour)
    if any(m in fld.domain.marks for m in mids):
        raise MarkOnContour("a contour edge carries a mark")
    total = Eisenstein(0)
    for m, (a, b) in zip(mids, steps):
        total = total + fld.F(m) * Eisenstein(a, b)
    return total


def contour_numerators(counts: np.ndarray, mids: Sequence[int], steps) -> tuple[np.ndarray, np.ndarray]:
    """(T, 2) integral numerators and a (T,) mask of triples whose contour avoids the marks."""
    fz = _f_numerators(counts[:, mids])  # (T, L, 2)
    st = np.asarray(steps, dtype=np.int64)
    a, b = fz[..., 0], fz[..., 1]
    c, e = st[:, 0], st[:, 1]
    re = (a * c - b * e).sum(axis=1)
    im = (a * e + b * c - b * e).sum(axis=1)
    valid = (counts[:, mids, 0] >= 0).all(axis=1)
    return np.stack([re, im], axis=-1), valid


def elementary_contours(d: HexDomain) -> list[list[int]]:
    """The three faces around each interior vertex, in CCW order."""
    out = []
    for v in d.interior_vertices:
        faces = [int(f) for f in d.vert_faces[v] if f >= 0]
        c = d.face_points()[faces].mean()
        ang = np.angle(d.face_points()[faces] - c)
        out.append([faces[i] for i in np.argsort(ang)])
    return out


def random_contours(d: HexDomain, count: int, seed: int, max_len: int = 24) -> list[list[int]]:
    """Random simple cycles of the face graph from self-avoiding walks that close up."""
    rng = random.Random(seed)
    out: list[list[int]] = []
    attempts = 0
    while len(out) < count and attempts < 200 * count:
        attempts += 1
        start = rng.randrange(d.n_faces)
        walk = [start]
        seen = {start}
        while len(walk) < max_len:
            f = walk[-1]
            nbrs = [int(g) for g in d.face_nbrs[f] if g >= 0]
            if len(walk) >= 3 and start in nbrs and rng.random() < 0.5:
                out.append(list(walk))
                break
            free = [g for g in nbrs if g not in seen]
            if not free:
                break
            g = rng.choice(free)
            walk.append(g)
            seen.add(g)
    return out


# -- boundary values --------------------------------------------------------------

@dataclass
class BoundaryReport:
    checked: int = 0
    failures: list = field(default_factory=list)
    max_violation: Fraction = Fraction(0)

    @property
    def ok(self) -> bool:
        return not self.failures


def _arc_index(pos: Sequence[int], p: int) -> int:
    """j such that boundary position ``p`` lies strictly inside arc (u_{j+1} u_{j-1})."""
    for j in range(3):
        a, b = pos[(j + 1) % 3], pos[(j + 2) % 3]
        if (a < p < b) if a < b else (p > a or p < b):
            return j
    raise NotDefined("position coincides with a mark")


def _lex_rank_table(n: int, k: int = 4) -> np.ndarray:
    """table[i, c] = number of k-subsets of range(n), in lexicographic order, whose
    i-th element is below c given equal earlier elements (summed cumulatively)."""
    table = np.zeros((k, n + 1), dtype=np.int64)
    for i in range(k):
        for c in range(n):
            table[i, c + 1] = table[i, c] + math.comb(n - 1 - c, k - 1 - i)
    return table


def quad_index(pos: np.ndarray, n: int, tab: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographic rank of each quad's 4-subset and the parity of its rotation.

    ``pos`` (J, 4) holds boundary positions of CCW quads.  Rotating a quad by
    two swaps its two arcs, which leaves the crossing event alone, so the
    parity picks between the two distinct events of a subset.
    """
    srt = np.sort(pos, axis=1)
    if tab is None:
        tab = _lex_rank_table(n)
    rank = np.zeros(len(pos), dtype=np.int64)
    prev = np.full(len(pos), -1, dtype=np.int64)
    for i in range(4):
        rank += tab[i, srt[:, i]] - tab[i, prev + 1]
        prev = srt[:, i]
    shift = np.argmax(srt == pos[:, :1], axis=1)
    return rank, shift % 2


def boundary_subsets(d: HexDomain) -> np.ndarray:
    """Every 4-subset of boundary mid-edges in CCW order, lexicographic by position."""
    return np.array(list(combinations(d.boundary_mids.tolist(), 4)), dtype=np.int64).reshape(-1, 4)


def crossing_table(d: HexDomain) -> np.ndarray:
    """(N, 2) crossing counts per boundary 4-subset: arcs (q1 q2)-(q3 q4) and (q2 q3)-(q4 q1)."""
    subs = boundary_subsets(d)
    bface = d.mid_faces[d.boundary_mids, 0].astype(np.int64)
    pos = d.mid_boundary_pos.astype(np.int64)
    c0 = quad_crossing_counts(subs, pos, bface, d.face_nbrs)
    c1 = quad_crossing_counts(np.roll(subs, -1, axis=1), pos, bface, d.face_nbrs)
    return np.stack([c0, c1], axis=1)


# partner of sorted index i under the pairings 12|34, 13|24, 14|23
_PARTNER = np.array([[1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]], dtype=np.int64)


def _boundary_rows(d: HexDomain, tri: np.ndarray):
    """(t, z) index pairs for boundary z outside each triple."""
    bm = d.boundary_mids.astype(np.int64)
    tt, zz = np.meshgrid(np.arange(len(tri)), bm, indexing="ij")
    keep = (zz != tri[:, :1]) & (zz != tri[:, 1:2]) & (zz != tri[:, 2:3])
    return tt[keep], zz[keep]


def boundary_counts_from_pairings(d: HexDomain, triples, pair_counts: np.ndarray,
                                  counts: np.ndarray | None = None) -> np.ndarray:
    """Fill H-counts at boundary z from per-subset pairing histograms.

    ``pair_counts`` (N, 3) counts the configurations pairing q1 with q2, q3,
    q4 for each subset of ``boundary_subsets``; for four boundary disorders
    this pairing fixes the partner of every mark.
    """
    tri = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if counts is None:
        counts = np.full((len(tri), d.n_mids, 3), -1, dtype=np.int64)
    tt, zz = _boundary_rows(d, tri)
    if len(tt) == 0:
        return counts
    pos = d.mid_boundary_pos.astype(np.int64)
    nb = len(d.boundary_mids)
    quad = np.concatenate([pos[zz][:, None], pos[tri[tt]]], axis=1)  # z first
    rank, _ = quad_index(quad, nb)
    order = np.argsort(quad, axis=1)
    where = np.argsort(order, axis=1)  # sorted index of each column
    iz = where[:, 0]
    pc = pair_counts[rank]
    out = np.zeros((len(tt), 3), dtype=np.int64)
    for typ in range(3):
        partner = _PARTNER[typ][iz]
        for j in range(3):
            out[:, j] += np.where(where[:, j + 1] == partner, pc[:, typ], 0)
    counts[tt, zz] = out
    return counts


def boundary_values_batch(d: HexDomain, triples, counts: np.ndarray,
                          cross: np.ndarray | None = None) -> BoundaryReport:
    """Check the boundary decomposition of F for every triple and boundary z.

    For z strictly inside the arc opposite u_j: H_j = 0,
    H_{j-1} = P[(u_{j+1} z) <-> (u_{j-1} u_j)] and
    H_{j+1} = P[(u_j u_{j+1}) <-> (z u_{j-1})].
    ``cross`` is the (N, 2) output of ``crossing_table`` when already available.
    """
    tri = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    rep = BoundaryReport()
    nb = len(d.boundary_mids)
    if len(tri) == 0 or nb < 4:
        return rep
    if cross is None:
        cross = crossing_table(d)
    pos = d.mid_boundary_pos.astype(np.int64)
    den = 1 << d.n_faces
    tt, zz = _boundary_rows(d, tri)
    pu = pos[tri[tt]]
    pz = pos[zz]
    # z lies on the arc from u_{j+1} to u_{j+2} (counterclockwise)
    j = np.empty(len(zz), dtype=np.int64)
    for jj in range(3):
        a, b = pu[:, (jj + 1) % 3], pu[:, (jj + 2) % 3]
        inside = np.where(a < b, (a < pz) & (pz < b), (pz > a) | (pz < b))
        j[inside] = jj
    u = tri[tt]
    rows = np.arange(len(zz))
    uj, up, um = u[rows, j], u[rows, (j + 1) % 3], u[rows, (j + 2) % 3]
    qa = np.stack([pos[up], pz, pos[um], pos[uj]], axis=1)
    qb = np.stack([pos[uj], pos[up], pz, pos[um]], axis=1)
    tab = _lex_rank_table(nb)
    ra, sa = quad_index(qa, nb, tab)
    rb, sb = quad_index(qb, nb, tab)
    ca = cross[ra, sa]
    cb = cross[rb, sb]
    c = counts[tt, zz]
    lam, mu, rest = c[rows, (j + 2) % 3], c[rows, (j + 1) % 3], c[rows, j]
    viol = np.maximum.reduce([np.abs(rest), np.abs(lam - ca), np.abs(mu - cb),
                              np.maximum(-np.minimum(lam, mu), 0),
                              np.maximum(lam + mu - den, 0),
                              np.where(c[rows, 0] < 0, 1, 0)])
    rep.checked += len(zz)
    for i in np.flatnonzero(viol):
        rep.failures.append((tuple(int(x) for x in u[i]), int(zz[i])))
        rep.max_violation = max(rep.max_violation, Fraction(int(viol[i]), den))
    return rep


def boundary_values_check(fld: ObservableField) -> BoundaryReport:
    """F(z) = lam tau^{j-1} + mu tau^{j+1} with lam, mu the two arc-crossing probabilities."""
    if not fld.exact:
        raise ValueError("boundary values are checked on exact fields")
    d = fld.domain.domain
    return boundary_values_batch(d, [fld.domain.marks], fld.counts[None])
