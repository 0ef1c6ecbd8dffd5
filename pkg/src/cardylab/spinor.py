"""Double covers ramified at mid-edges and spinor colorings.

The cover is encoded by a cut: a half-edge set whose odd-adjacency set is
the branch set.  Crossing a cut half-edge swaps the two sheets.  The
complement of the domain is treated as one extra face (index ``n_faces``)
so that a global sheet swap leaves the induced loop configuration fixed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoundaryMismatch, InvalidBranchSet, TooLarge
from .hexlattice import HexDomain
from .loops import ENUMERATION_CAP, LoopConfig, face_masks, shortest_path_tree


@dataclass(frozen=True)
class DoubleCover:
    base: HexDomain
    branch_points: tuple[int, ...]
    absorbed: tuple[int, ...]
    cut: LoopConfig

    @property
    def disorders(self) -> frozenset[int]:
        """Branch points plus any boundary point absorbed to make the count even."""
        return frozenset(self.branch_points) | frozenset(self.absorbed)

    @property
    def flip(self) -> np.ndarray:
        return self.cut.to_array()


@dataclass(frozen=True)
class SpinorColoring:
    """Sheet-1 colors of the base faces plus the outside face (last entry); 1 = blue."""

    base_bits: tuple[int, ...]

    @classmethod
    def from_index(cls, index: int, n: int) -> "SpinorColoring":
        return cls(tuple((index >> f) & 1 for f in range(n)))

    def complement(self) -> "SpinorColoring":
        return SpinorColoring(tuple(1 - b for b in self.base_bits))


def _nearest_boundary(d: HexDomain, source: int, exclude: set[int]) -> tuple[int, np.ndarray]:
    tree = shortest_path_tree(d, source)
    lengths = tree.sum(axis=1)
    cands = [int(m) for m in d.boundary_mids if int(m) not in exclude and int(m) != source]
    best = min(cands, key=lambda m: (lengths[m], m))
    return best, tree[best]


def build_cover(d: HexDomain, branch_points: Sequence[int],
                pairs: Sequence[tuple[int, int]] | None = None) -> DoubleCover:
    """Cover ramified at ``branch_points`` with a cut made of shortest half-edge paths.

    By default branch points are paired in increasing index order; an odd
    leftover is joined to the nearest free boundary mid-edge, which is then
    reported in ``absorbed``.  ``pairs`` overrides the pairing.
    """
    pts = [int(b) for b in branch_points]
    if len(set(pts)) != len(pts) or any(not 0 <= b < d.n_mids for b in pts):
        raise InvalidBranchSet(f"branch points must be distinct mid-edges: {pts}")
    ordered = sorted(pts)
    if pairs is None:
        pairs = [(ordered[i], ordered[i + 1]) for i in range(0, len(ordered) - 1, 2)]
    else:
        pairs = [(int(a), int(b)) for a, b in pairs]
        flat = [x for p in pairs for x in p]
        if len(set(flat)) != len(flat) or not set(flat) <= set(pts):
            raise InvalidBranchSet("pairs must use distinct branch points")
    used = {x for p in pairs for x in p}
    leftovers = [b for b in ordered if b not in used]
    if len(leftovers) > 1:
        raise InvalidBranchSet("pairing leaves more than one branch point unmatched")
    cut = np.zeros(d.n_halfedges, dtype=np.uint8)
    for a, b in pairs:
        cut ^= shortest_path_tree(d, a)[b]
    absorbed: tuple[int, ...] = ()
    if leftovers:
        end, path = _nearest_boundary(d, leftovers[0], set(pts))
        cut ^= path
        absorbed = (end,)
    return DoubleCover(d, tuple(pts), absorbed, LoopConfig.from_array(d, cut))


def spinor_to_loops(cover: DoubleCover, s: SpinorColoring) -> LoopConfig:
    """Half-edges whose two sides carry different colors on the cover."""
    d = cover.base
    bits = np.asarray(s.base_bits, dtype=np.uint8)
    if len(bits) != d.n_faces + 1:
        raise ValueError("spinor coloring needs one bit per face plus the outside face")
    f = d.he_faces[:, 0]
    g = np.where(d.he_faces[:, 1] >= 0, d.he_faces[:, 1], d.n_faces)
    return LoopConfig.from_array(d, bits[f] ^ bits[g] ^ cover.flip)


def count_spinor_configs(cover: DoubleCover, cap: int = ENUMERATION_CAP) -> int:
    """Enumerate all spinor colorings; return the number of distinct loop configurations.

    Raises ``BoundaryMismatch`` when an induced configuration has the wrong
    disorders or a fiber of the map is not of size two.
    """
    d = cover.base
    if d.n_faces > cap:
        raise TooLarge(f"{d.n_faces} faces exceed the enumeration cap {cap}")
    masks = face_masks(d)
    outer = sum(1 << int(h) for m in d.boundary_mids for h in d.mid_he[m])
    masks.append(outer)
    target = cover.disorders
    seen: dict[int, int] = {}
    bits = cover.cut.bits
    n = d.n_faces + 1
    for i in range(1 << n):
        if i:
            bits ^= masks[(i & -i).bit_length() - 1]
        seen[bits] = seen.get(bits, 0) + 1
    for b in seen:
        if not LoopConfig(d, b).has_boundary(target):
            raise BoundaryMismatch("induced configuration has the wrong disorders")
    if any(c != 2 for c in seen.values()):
        raise BoundaryMismatch("spinor map is not two-to-one")
    return len(seen)


def lifted_components(cover: DoubleCover) -> list[int]:
    """Component sizes of the lifted face graph of the domain (branch edges removed)."""
    d = cover.base
    flip = cover.flip
    disorders = cover.disorders
    F = d.n_faces
    parent = list(range(2 * F))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in range(d.n_mids):
        f, g = d.mid_faces[m]
        if g < 0 or m in disorders:
            continue
        s = int(flip[d.mid_he[m, 0]])
        for sheet in (0, 1):
            a, b = find(f + F * sheet), find(g + F * (sheet ^ s))
            if a != b:
                parent[a] = b
    sizes: dict[int, int] = {}
    for x in range(2 * F):
        r = find(x)
        sizes[r] = sizes.get(r, 0) + 1
    return sorted(sizes.values())
