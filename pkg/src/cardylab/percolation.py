"""Site percolation on hexagonal faces: colorings, crossing events, Monte Carlo."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from numba import njit, uint64

from .errors import DegenerateAnnulus, WrongMarkCount
from .hexlattice import SQRT3, HexDomain, MarkedDomain, boundary_arc
from .rng import RngState, fill_bits, random_bits, stream_key, word

Z95 = 1.959963984540054
BLOCK = 1 << 14

# Boundary convention: outside color along arcs (1,2), (2,3), (3,4), (4,1)
BOUNDARY_CONVENTION = ("blue", "yellow", "blue", "yellow")


@dataclass(frozen=True)
class Coloring:
    """Face colors packed one bit per face (1 = blue, 0 = yellow)."""

    packed: bytes
    n_faces: int
    convention: tuple[str, ...] = BOUNDARY_CONVENTION

    @classmethod
    def from_blue(cls, blue) -> "Coloring":
        blue = np.asarray(blue, dtype=np.uint8)
        return cls(np.packbits(blue, bitorder="little").tobytes(), len(blue))

    @classmethod
    def from_index(cls, index: int, n_faces: int) -> "Coloring":
        """Coloring whose face ``f`` is blue iff bit ``f`` of ``index`` is set."""
        return cls.from_blue([(index >> f) & 1 for f in range(n_faces)])

    @classmethod
    def uniform(cls, n_faces: int, blue: bool) -> "Coloring":
        return cls.from_blue(np.full(n_faces, int(blue), dtype=np.uint8))

    @property
    def blue(self) -> np.ndarray:
        bits = np.frombuffer(self.packed, dtype=np.uint8)
        return np.unpackbits(bits, count=self.n_faces, bitorder="little")

    def index(self) -> int:
        return int(sum(int(b) << f for f, b in enumerate(self.blue)))

    def complement(self) -> "Coloring":
        return Coloring.from_blue(1 - self.blue)


@dataclass
class CrossingEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int
    wall_time_s: float = 0.0

    @classmethod
    def from_counts(cls, successes: int, trials: int, seed: int, wall_time_s: float = 0.0):
        lo, hi = wilson_interval(successes, trials)
        return cls(int(successes), int(trials), successes / trials, lo, hi, int(seed), wall_time_s)

    @property
    def sigma(self) -> float:
        """Wilson half-width expressed in standard deviations."""
        return (self.ci_high - self.ci_low) / (2 * Z95)

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so that lo <= p_hat <= hi survives rounding at p in {0, 1}
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def resolve_workers(workers: int | None = None) -> int:
    env = os.environ.get("CARDYLAB_WORKERS")
    if env:
        return max(1, int(env))
    if workers:
        return max(1, int(workers))
    return os.cpu_count() or 1


def run_blocks(count_fn: Callable[[int, int], int], trials: int, workers: int | None = None,
               block: int = BLOCK) -> int:
    """Sum ``count_fn(start, stop)`` over fixed sample blocks.

    Blocks are aligned to absolute sample indices, so the total does not
    depend on the number of workers.
    """
    ranges = [(s, min(s + block, trials)) for s in range(0, trials, block)]
    n = resolve_workers(workers)
    if n == 1 or len(ranges) == 1:
        return sum(count_fn(a, b) for a, b in ranges)
    with ThreadPoolExecutor(max_workers=n) as pool:
        return sum(pool.map(lambda ab: count_fn(*ab), ranges))


# -- union-find kernels -------------------------------------------------------

@njit(cache=True, nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True, nogil=True)
def two_sided_cross(blue, back_nbrs, side_a, side_b, parent, size):
    """Is there a blue face path from a face with ``side_a`` to one with ``side_b``?"""
    n = blue.shape[0]
    for i in range(n + 2):
        parent[i] = i
        size[i] = 1
    for f in range(n):
        if blue[f]:
            for j in range(back_nbrs.shape[1]):
                g = back_nbrs[f, j]
                if g >= 0 and blue[g]:
                    _union(parent, size, f, g)
            if side_a[f]:
                _union(parent, size, f, n)
            if side_b[f]:
                _union(parent, size, f, n + 1)
    return _find(parent, n) == _find(parent, n + 1)


@njit(cache=True, nogil=True)
def _mc_count_uf(key, start, stop, back_nbrs, side_a, side_b):
    """Union-find counterpart of ``_mc_count``; kept as a cross-check."""
    n = side_a.shape[0]
    blue = np.empty(n, dtype=np.uint8)
    parent = np.empty(n + 2, dtype=np.int64)
    size = np.empty(n + 2, dtype=np.int64)
    count = 0
    for s in range(start, stop):
        fill_bits(key, s, n, blue)
        if two_sided_cross(blue, back_nbrs, side_a, side_b, parent, size):
            count += 1
    return count


@njit(cache=True, nogil=True)
def _mc_count(key, start, stop, nbrs, a_faces, side_b):
    """Crossing count over samples ``[start, stop)`` by depth-first search from side A.

    Colors are read straight from the random words (bit ``f`` of the sample
    is face ``f``, as in ``fill_bits``) and the search stops at the first
    side-B face, so most samples touch only a fraction of the domain.
    """
    n = side_b.shape[0]
    nw = (n + 63) // 64
    words = np.empty(nw, dtype=np.uint64)
    stamp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    count = 0
    for s in range(start, stop):
        base = uint64(s) * uint64(nw)
        for w in range(nw):
            words[w] = word(key, base + uint64(w))
        top = 0
        hit = False
        for f in a_faces:
            if (words[f >> 6] >> uint64(f & 63)) & uint64(1) and stamp[f] != s:
                stamp[f] = s
                if side_b[f]:
                    hit = True
                    break
                stack[top] = f
                top += 1
        while top > 0 and not hit:
            top -= 1
            f = stack[top]
            for j in range(nbrs.shape[1]):
                g = nbrs[f, j]
                if g >= 0 and stamp[g] != s and (words[g >> 6] >> uint64(g & 63)) & uint64(1):
                    stamp[g] = s
                    if side_b[g]:
                        hit = True
                        break
                    stack[top] = g
                    top += 1
        if hit:
            count += 1
    return count


@njit(cache=True, nogil=True)
def enumerate_crossings(back_nbrs, side_a, side_b):
    """Crossing indicator for every coloring index (bit f = face f blue)."""
    n = side_a.shape[0]
    out = np.zeros(1 << n, dtype=np.uint8)
    blue = np.empty(n, dtype=np.uint8)
    parent = np.empty(n + 2, dtype=np.int64)
    size = np.empty(n + 2, dtype=np.int64)
    for idx in range(1 << n):
        for f in range(n):
            blue[f] = (idx >> f) & 1
        out[idx] = two_sided_cross(blue, back_nbrs, side_a, side_b, parent, size)
    return out


@njit(cache=True, nogil=True)
def popcount64(x):
    x = x - ((x >> uint64(1)) & uint64(0x5555555555555555))
    x = (x & uint64(0x3333333333333333)) + ((x >> uint64(2)) & uint64(0x3333333333333333))
    x = (x + (x >> uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    return (x * uint64(0x0101010101010101)) >> uint64(56)


@njit(cache=True, nogil=True)
def crossing_bits(nbrs, side_a, side_b, out):
    """Crossing indicator of every coloring index, 64 colorings per word.

    Bit ``i % 64`` of ``out[i // 64]`` is set iff coloring ``i`` (face f blue
    iff bit f of i) has a blue path from side A to side B.  Each word is a
    bit-sliced flood fill: ``reach[f]`` holds, for 64 colorings at once,
    whether face f is blue and joined to side A.
    """
    n = side_a.shape[0]
    total = 1 << n
    reach = np.zeros(n, dtype=np.uint64)
    color = np.zeros(n, dtype=np.uint64)
    ones = ~uint64(0)
    for w in range(out.shape[0]):
        base = w * 64
        for f in range(n):
            if f < 6:
                c = uint64(0)
                for b in range(64):
                    if (b >> f) & 1:
                        c |= uint64(1) << uint64(b)
                color[f] = c
            else:
                color[f] = ones if (base >> f) & 1 else uint64(0)
            reach[f] = color[f] if side_a[f] else uint64(0)
        changed = True
        while changed:
            changed = False
            for f in range(n):
                acc = reach[f]
                for j in range(nbrs.shape[1]):
                    g = nbrs[f, j]
                    if g >= 0:
                        acc |= reach[g]
                acc &= color[f]
                if acc != reach[f]:
                    reach[f] = acc
                    changed = True
        hit = uint64(0)
        for f in range(n):
            if side_b[f]:
                hit |= reach[f]
        if total - base < 64:
            hit &= (uint64(1) << uint64(total - base)) - uint64(1)
        out[w] = hit


def crossing_words(n_faces: int) -> np.ndarray:
    return np.zeros(max(1, (1 << n_faces) // 64), dtype=np.uint64)


def back_neighbors(face_nbrs: np.ndarray) -> np.ndarray:
    """Neighbors with a smaller index, padded with -1."""
    idx = np.arange(len(face_nbrs))[:, None]
    masked = np.where((face_nbrs >= 0) & (face_nbrs < idx), face_nbrs, -1)
    width = max(1, int((masked >= 0).sum(axis=1).max()))
    out = np.full((len(face_nbrs), width), -1, dtype=np.int64)
    for i, row in enumerate(masked):
        vals = row[row >= 0]
        out[i, : len(vals)] = vals
    return out


def arc_face_flags(md: MarkedDomain, j: int, jp: int) -> np.ndarray:
    flags = np.zeros(md.domain.n_faces, dtype=np.uint8)
    flags[list(boundary_arc(md, j, jp).faces)] = 1
    return flags


def crossing_setup(md: MarkedDomain):
    """Arrays for the event: blue path between arc (u1 u2) and arc (u3 u4)."""
    if md.k != 4:
        raise WrongMarkCount(f"crossing needs 4 marks, got {md.k}")
    return back_neighbors(md.domain.face_nbrs), arc_face_flags(md, 1, 2), arc_face_flags(md, 3, 4)


# -- public operations --------------------------------------------------------

def sample_coloring(d: HexDomain, rng_state: RngState) -> Coloring:
    return Coloring.from_blue(random_bits(rng_state, d.n_faces))


def crosses(md: MarkedDomain, c: Coloring) -> bool:
    back, side_a, side_b = crossing_setup(md)
    n = md.domain.n_faces
    parent = np.empty(n + 2, dtype=np.int64)
    size = np.empty(n + 2, dtype=np.int64)
    return bool(two_sided_cross(c.blue, back, side_a, side_b, parent, size))


def _estimate(nbrs, side_a, side_b, trials, seed, workers) -> CrossingEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    key = np.uint64(stream_key(seed))
    a_faces = np.flatnonzero(side_a).astype(np.int64)
    t0 = time.perf_counter()
    hits = run_blocks(lambda a, b: int(_mc_count(key, a, b, nbrs, a_faces, side_b)), trials, workers)
    return CrossingEstimate.from_counts(hits, trials, seed, time.perf_counter() - t0)


def crossing_probability_mc(md: MarkedDomain, trials: int, seed: int,
                            workers: int | None = None) -> CrossingEstimate:
    """Fraction of ``trials`` uniform colorings with a blue (u1 u2) <-> (u3 u4) crossing.

    Sample ``i`` uses the counter-based stream ``(seed, i)``.
    """
    _, side_a, side_b = crossing_setup(md)
    return _estimate(md.domain.face_nbrs, side_a, side_b, trials, seed, workers)


def annulus_faces(r: float, R: float, mesh: float):
    """Faces meeting the closed disk of radius ``R`` and the flags of faces meeting each circle.

    Returns ``(face_nbrs, inner, outer)``; a face meets the circle of radius
    ``rho`` when its closed hexagon has points at distance both <= and >= rho.
    """
    import shapely

    from .hexlattice import _hexagon_rings

    box = R + 2 * mesh
    r_max = math.ceil(box / (1.5 * mesh)) + 1
    qs, rs = [], []
    for rr in range(-r_max, r_max + 1):
        q_lo = math.floor(-box / (SQRT3 * mesh) - rr / 2.0) - 1
        q_hi = math.ceil(box / (SQRT3 * mesh) - rr / 2.0) + 1
        qs.append(np.arange(q_lo, q_hi + 1))
        rs.append(np.full(q_hi - q_lo + 1, rr))
    qa, ra = np.concatenate(qs), np.concatenate(rs)
    rings = _hexagon_rings(qa, ra, mesh)
    dmax = np.hypot(rings[..., 0], rings[..., 1]).max(axis=1)
    dmin = shapely.distance(shapely.Point(0.0, 0.0), shapely.polygons(rings))
    keep = dmin <= R
    qa, ra, dmin, dmax = qa[keep], ra[keep], dmin[keep], dmax[keep]
    order = np.lexsort((ra, qa))
    qa, ra, dmin, dmax = qa[order], ra[order], dmin[order], dmax[order]
    index = {(int(q), int(r_)): i for i, (q, r_) in enumerate(zip(qa, ra))}
    from .hexlattice import AXIAL_DIRECTIONS

    nbrs = np.full((len(qa), 6), -1, dtype=np.int64)
    for i, (q, r_) in enumerate(zip(qa.tolist(), ra.tolist())):
        for k, (dq, dr) in enumerate(AXIAL_DIRECTIONS):
            nbrs[i, k] = index.get((q + dq, r_ + dr), -1)
    inner = ((dmin <= r) & (dmax >= r)).astype(np.uint8)
    outer = ((dmin <= R) & (dmax >= R)).astype(np.uint8)
    return nbrs, inner, outer


def annulus_crossing_mc(r: float, R: float, mesh: float, trials: int, seed: int,
                        workers: int | None = None) -> CrossingEstimate:
    """Blue face path from the faces meeting circle ``r`` to those meeting circle ``R``."""
    if r > R:
        raise DegenerateAnnulus(f"inner radius {r} exceeds outer radius {R}")
    if not mesh < r:
        raise ValueError("mesh must be smaller than the inner radius")
    if r == R:
        return CrossingEstimate.from_counts(trials, trials, seed)
    nbrs, inner, outer = annulus_faces(r, R, mesh)
    return _estimate(nbrs, inner, outer, trials, seed, workers)
