import numpy as np
import pytest

from cardylab.errors import InvalidBranchSet, TooLarge
from cardylab.harness import random_domain
from cardylab.hexlattice import MarkedDomain
from cardylab.loops import LoopConfig, coloring_to_loops, difference_set, odd_nodes
from cardylab.percolation import Coloring
from cardylab.spinor import (SpinorColoring, build_cover, count_spinor_configs,
                             lifted_components, spinor_to_loops)

from conftest import four_marks


def interior_mids(d):
    return [int(m) for m in np.flatnonzero(d.mid_boundary_pos < 0)]


def induced_set(cover):
    n = cover.base.n_faces + 1
    return {spinor_to_loops(cover, SpinorColoring.from_index(i, n)).bits for i in range(1 << n)}


def test_empty_branch_set_is_difference_set(tri3):
    cover = build_cover(tri3, ())
    assert cover.cut.bits == 0 and cover.absorbed == ()
    for i in range(8):
        s = SpinorColoring.from_index(i, 4)  # outside face yellow
        assert spinor_to_loops(cover, s) == difference_set(tri3, Coloring.from_index(i, 3))
    assert count_spinor_configs(cover) == 8


def test_single_interior_point_is_absorbed(tri3):
    u = interior_mids(tri3)[0]
    cover = build_cover(tri3, (u,))
    assert len(cover.absorbed) == 1 and tri3.mid_boundary_pos[cover.absorbed[0]] >= 0
    verts, mids = odd_nodes(tri3, cover.flip)
    assert not verts and mids == {u, cover.absorbed[0]}
    assert count_spinor_configs(cover) == 8


def test_boundary_branch_points_give_two_copies():
    for n in (1, 4, 9):
        d = random_domain(n, n)
        cover = build_cover(d, four_marks(d))
        assert lifted_components(cover) == [n, n]


def _shared_mid(d, a, b):
    (m,) = set(d.face_mids[a].tolist()) & set(d.face_mids[b].tolist())
    return m


def test_monodromy_around_interior_branch_point():
    d = random_domain(19, 0)
    done = 0
    for u in interior_mids(d):
        v1, v2 = d.mid_verts[u]
        if not ((d.vert_faces[v1] >= 0).all() and (d.vert_faces[v2] >= 0).all()):
            continue
        f, g = d.mid_faces[u]
        h1 = (set(d.vert_faces[v1].tolist()) - {f, g}).pop()
        h2 = (set(d.vert_faces[v2].tolist()) - {f, g}).pop()
        ring = [f, h1, g, h2, f]
        for pts in ((u,), ()):
            flip = build_cover(d, pts).flip
            # away from branch points both halves of an edge carry the same flag,
            # and crossing that edge swaps sheets iff the flag is set
            mids = [_shared_mid(d, a, b) for a, b in zip(ring, ring[1:])]
            assert all(flip[d.mid_he[m, 0]] == flip[d.mid_he[m, 1]] for m in mids)
            parity = sum(int(flip[d.mid_he[m, 0]]) for m in mids)
            assert parity % 2 == len(pts)
        done += 1
    assert done


def test_hexagon_matches_coloring_bijection(hex_quad):
    cover = build_cover(hex_quad.domain, hex_quad.marks)
    col = {coloring_to_loops(hex_quad, Coloring.from_index(i, 1)).bits for i in range(2)}
    assert induced_set(cover) == col
    assert count_spinor_configs(cover) == 2


def test_boundary_cover_matches_coloring_bijection_on_random_domains():
    rng = np.random.default_rng(8)
    for _ in range(15):
        d = random_domain(int(rng.integers(1, 9)), int(rng.integers(1 << 30)))
        md = MarkedDomain(d, four_marks(d, int(rng.integers(6))))
        col = {coloring_to_loops(md, Coloring.from_index(i, d.n_faces)).bits
               for i in range(1 << d.n_faces)}
        assert induced_set(build_cover(d, md.marks)) == col


def test_complement_gives_same_configuration(tri3):
    cover = build_cover(tri3, interior_mids(tri3)[:2])
    for i in range(16):
        s = SpinorColoring.from_index(i, 4)
        assert spinor_to_loops(cover, s) == spinor_to_loops(cover, s.complement())


def test_two_interior_points(tri3):
    pts = interior_mids(tri3)[:2]
    cover = build_cover(tri3, pts)
    assert cover.absorbed == ()
    assert count_spinor_configs(cover) == 8
    for b in induced_set(cover):
        assert LoopConfig(tri3, b).has_boundary(pts)


def test_cut_independence():
    rng = np.random.default_rng(4)
    for _ in range(12):
        d = random_domain(int(rng.integers(4, 11)), int(rng.integers(1 << 30)))
        inner = interior_mids(d)
        if len(inner) < 2:
            continue
        pts = sorted(int(x) for x in rng.choice(inner + d.boundary_mids.tolist(), 4, replace=False))
        a = build_cover(d, pts)
        b = build_cover(d, pts, pairs=[(pts[0], pts[3]), (pts[1], pts[2])])
        assert induced_set(a) == induced_set(b)
        assert len(induced_set(a)) == 1 << d.n_faces


def test_invalid_branch_sets(tri3):
    with pytest.raises(InvalidBranchSet):
        build_cover(tri3, (0, 0))
    with pytest.raises(InvalidBranchSet):
        build_cover(tri3, (999,))
    with pytest.raises(InvalidBranchSet):
        build_cover(tri3, (0, 1, 2, 3), pairs=[(0, 1)])
    with pytest.raises(TooLarge):
        count_spinor_configs(build_cover(random_domain(8, 0), ()), cap=5)
