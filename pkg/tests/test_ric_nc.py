"""Incremental builders for non-crossing families, both bookkeeping variants."""

import math
import random
from fractions import Fraction
from itertools import combinations

import pytest

from hvd.cluster import hausdorff_distance_sq, make_cluster, make_family
from hvd.diagram import canonical_serialize, empty_hvd, finalize, insert_cluster, stats
from hvd.errors import PreconditionViolated
from hvd.fvd import build_fvd
from hvd.geom import circumcenter, pt, squared_distance
from hvd.oracle import sample_verify
from hvd.ric_nc import (
    HISTORY_ROOT,
    build_history,
    build_noncrossing,
    check_conflict_graph,
    check_conflict_roots,
    initial_conflicts,
    insert_noncrossing,
    skeleton_root_pos,
)


def far_pair(mirror=False):
    s = -1 if mirror else 1
    return make_family([
        make_cluster("A", [pt(0, 0)]),
        make_cluster("Q", [pt(10 * s, 0), pt(12 * s, 0)]),
    ])


def trio():
    return make_family([
        make_cluster("A", [pt(0, 0), pt(4, 0), pt(2, 3)]),
        make_cluster("B", [pt(20, 1), pt(24, 2), pt(22, 5), pt(21, 4)]),
        make_cluster("C", [pt(10, 20)]),
    ])


def disk_family(seed=11, k=8, per=4, spacing=64, radius=9):
    # lattice positions plus per-cluster rational jitter to stay clear of
    # cocircular coincidences
    rng = random.Random(seed)
    side = math.ceil(math.sqrt(k))
    clusters = []
    for i in range(k):
        cx = (i % side) * spacing
        cy = (i // side) * spacing
        den = 97 + 6 * i
        got = set()
        while len(got) < per:
            got.add((cx + rng.randint(-radius, radius),
                     cy + rng.randint(-radius, radius)))
        pts = [pt(Fraction(x) + Fraction(rng.randrange(1, 96), den),
                  Fraction(y) + Fraction(rng.randrange(1, 96), den))
               for x, y in sorted(got)]
        clusters.append(make_cluster(f"c{i:02d}", pts))
    return make_family(clusters)


def surround_family():
    # ring tight enough that the wide inner cluster owns nothing
    rng = random.Random(3)
    inner = make_cluster("inner", [pt(-50, -50), pt(50, -47), pt(3, 70)])
    out = [inner]
    for i in range(6):
        a = 2 * math.pi * i / 6
        cx = round(25 * math.cos(a)) + rng.randint(-3, 3)
        cy = round(25 * math.sin(a)) + rng.randint(-3, 3)
        dx, dy = 1 + (i % 2), 1 + ((i + 1) % 2)
        out.append(make_cluster(f"r{i}", [pt(cx, cy), pt(cx + dx, cy), pt(cx, cy + dy)]))
    return make_family(out)


def singleton_family(seed=13, k=8, spread=40):
    rng = random.Random(seed)
    got = set()
    while len(got) < k:
        got.add((rng.randint(-spread, spread), rng.randint(-spread, spread)))
    return make_family([make_cluster(f"s{i}", [pt(x, y)])
                        for i, (x, y) in enumerate(sorted(got))])


def classic_voronoi_vertices(sites):
    verts = set()
    for a, b, c in combinations(sites, 3):
        cc = circumcenter(a, b, c)
        if cc is None:
            continue
        r2 = squared_distance(cc, a)
        if any(squared_distance(cc, p) < r2 for p in sites):
            continue
        if sum(1 for p in sites if squared_distance(cc, p) == r2) == 3:
            verts.add(cc)
    return verts


# -- initial conflicts ------------------------------------------------------

def test_far_singleton_whole_skeleton_active():
    F = far_pair()
    H = empty_hvd(F)
    insert_cluster(H, F.by_id("A"))
    CG = initial_conflicts(H, "A")
    conf = CG.by_cluster["Q"]
    assert conf.root.at_infinity
    assert conf.root == skeleton_root_pos(H.fvds["Q"])
    assert conf.root.point.x == 11
    assert H.ranges[conf.range_id].owner_key[0] == "A"
    assert CG.arcs() == 1 and not CG.dead
    check_conflict_roots(H, CG)


def test_mirrored_instance_mirrored_root():
    F = far_pair(mirror=True)
    H = empty_hvd(F)
    insert_cluster(H, F.by_id("A"))
    CG = initial_conflicts(H, "A")
    root = CG.by_cluster["Q"].root
    assert root.at_infinity and root.point.x == -11


def test_initial_conflicts_need_one_cluster_diagram():
    F = far_pair()
    H = empty_hvd(F)
    insert_cluster(H, F.by_id("A"))
    insert_cluster(H, F.by_id("Q"))
    with pytest.raises(PreconditionViolated):
        initial_conflicts(H, "A")


def test_seeded_initial_roots_exact():
    F = disk_family(seed=19, k=8, per=4)
    first = sorted(c.id for c in F)[0]
    H = empty_hvd(F)
    insert_cluster(H, F.by_id(first))
    CG = initial_conflicts(H, first)
    assert len(CG.by_cluster) + len(CG.dead) == 7
    for cid, conf in CG.by_cluster.items():
        root = conf.root
        if root.at_infinity:
            assert root == skeleton_root_pos(H.fvds[cid])
            continue
        df_q = hausdorff_distance_sq(root.point, F.by_id(cid))
        df_1 = hausdorff_distance_sq(root.point, F.by_id(first))
        assert df_q == df_1 or root == skeleton_root_pos(H.fvds[cid])


# -- conflict-graph construction -------------------------------------------

def test_two_singletons_either_order():
    F = make_family([make_cluster("A", [pt(0, 0)]), make_cluster("B", [pt(10, 0)])])
    a, _ = build_noncrossing(F, seed=0, debug=True)
    b, _ = build_noncrossing(F, seed=1, debug=True)
    direct = empty_hvd(F)
    insert_cluster(direct, F.by_id("A"))
    insert_cluster(direct, F.by_id("B"))
    assert canonical_serialize(a) == canonical_serialize(b) == canonical_serialize(direct)


def test_surround_cluster_marked_empty_and_never_revisited():
    F = surround_family()
    order = [c.id for c in F]
    random.Random(2).shuffle(order)
    H = empty_hvd(F)
    CG = None
    seen_dead = set()
    for cid in order:
        if CG is None:
            insert_cluster(H, F.by_id(cid))
            CG = initial_conflicts(H, cid)
        else:
            insert_noncrossing(H, CG, F.by_id(cid), debug=True)
        assert not (seen_dead & set(CG.by_cluster)), "dead cluster resurrected"
        seen_dead |= CG.dead
    assert "inner" in CG.dead
    s = stats(H)
    assert s.empty_clusters == ["inner"]
    assert b"cluster inner 3 empty" in canonical_serialize(H)
    rep = sample_verify(H, F, 1200, seed=5)
    assert rep.ok()


def test_seeded_16_cluster_family_verifies():
    F = disk_family(seed=23, k=16, per=4)
    H, counters = build_noncrossing(F, seed=4)
    assert finalize(H).euler_ok
    rep = sample_verify(H, F, 2000, seed=8)
    assert rep.ok()
    assert counters.created_ranges >= len(H.ranges)


def test_singleton_family_matches_classic_voronoi():
    F = singleton_family(seed=13, k=8)
    H, _ = build_noncrossing(F, seed=6, debug=True)
    fin = finalize(H)
    pure = {v for v, k in zip(fin.vertices, fin.vertex_kinds) if k.kind == "pure"}
    sites = [c.hull[0] for c in F]
    assert pure == classic_voronoi_vertices(sites)


def test_conflict_bounds_hold_every_step():
    F = disk_family(seed=31, k=8, per=5)
    order = [c.id for c in F]
    random.Random(7).shuffle(order)
    H = empty_hvd(F)
    CG = None
    for cid in order:
        if CG is None:
            insert_cluster(H, F.by_id(cid))
            CG = initial_conflicts(H, cid)
        else:
            insert_noncrossing(H, CG, F.by_id(cid), debug=True)
        check_conflict_graph(CG, len(F))
        check_conflict_roots(H, CG)
        pending = {c.id for c in F} - set(H.inserted) - CG.dead
        assert set(CG.by_cluster) <= pending
        assert CG.arcs() <= len(F)


def test_skeleton_edge_drop_budget():
    F = disk_family(seed=23, k=16, per=4)
    _, counters = build_noncrossing(F, seed=12)
    budget = sum(len(build_fvd(c).edges) for c in F)
    assert counters.totals()["N"] <= budget


def test_ten_seed_permutation_invariance():
    for F in (trio(), disk_family(seed=37, k=6, per=4)):
        blobs = {canonical_serialize(build_noncrossing(F, seed=s)[0])
                 for s in range(10)}
        assert len(blobs) == 1


# -- history-graph variant --------------------------------------------------

def test_history_two_clusters_single_level():
    F = far_pair()
    H, HG, _ = build_history(F, seed=0, debug=True)
    root = HG.nodes[HISTORY_ROOT]
    assert root.deleted_at == 1 and root.children == HG.levels[1]
    assert set(HG.leaf_ids()) == set(H.ranges.keys())
    for rid, node in HG.nodes.items():
        if rid != HISTORY_ROOT:
            assert node.level in (1, 2)


def test_history_matches_conflict_graph_bytes():
    for F in (disk_family(seed=41, k=8, per=4), surround_family(), trio()):
        want = canonical_serialize(build_noncrossing(F, seed=0)[0])
        for s in (1, 5, 9):
            Hh, HG, _ = build_history(F, seed=s, debug=True)
            assert canonical_serialize(Hh) == want
            assert set(HG.leaf_ids()) == set(Hh.ranges.keys())


def test_history_levels_strictly_increase():
    F = disk_family(seed=23, k=16, per=4)
    _, HG, counters = build_history(F, seed=3)
    for node in HG.nodes.values():
        for ch in node.children:
            assert HG.nodes[ch].level > node.level
    assert HG.max_out_degree() >= 1
    assert counters.totals()["K"] >= 0


def test_history_surround_empty_matches():
    F = surround_family()
    Hh, _, counters = build_history(F, seed=2, debug=True)
    assert stats(Hh).empty_clusters == ["inner"]
    assert canonical_serialize(Hh) == canonical_serialize(build_noncrossing(F, seed=8)[0])
    assert counters.totals()["D"] == 1


def test_empty_and_single_cluster_builds():
    H, counters = build_noncrossing(make_family([]), seed=0)
    assert canonical_serialize(H) == b"hvd-diagram v1\nclusters 0\nvertices 0\nedges 0\nranges 0\n"
    assert counters.steps == []

    F = make_family([make_cluster("A", [pt(0, 0), pt(6, 0), pt(3, 5)])])
    Hh, HG, _ = build_history(F, seed=0)
    direct = empty_hvd(F)
    insert_cluster(direct, F.by_id("A"))
    assert canonical_serialize(Hh) == canonical_serialize(direct)
    assert set(HG.leaf_ids()) == set(Hh.ranges.keys())
