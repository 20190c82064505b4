"""Incremental builder for families whose clusters may cross."""

import random
from fractions import Fraction

import pytest

from hvd.cluster import hausdorff_distance_sq, make_cluster, make_family
from hvd.diagram import (
    canonical_serialize,
    cluster_face_components,
    contains,
    empty_hvd,
    finalize,
    insert_cluster,
    stats,
)
from hvd.geom import pt, squared_distance
from hvd.oracle import (
    brute_force_hvd_pair,
    count_crossings_bruteforce,
    sample_verify,
)
from hvd.ric_nc import InstrumentationCounters, build_noncrossing
from hvd.ric_x import (
    P_POS,
    build_arbitrary,
    check_conflict_store,
    check_owner_stores,
    check_vertex_lists,
    find_exit_point,
    initial_conflicts_arbitrary,
    insert_arbitrary,
    owner_store,
    update_conflicts_type1,
    _chain,
    _face_kind,
)
from test_ric_nc import (
    classic_voronoi_vertices,
    disk_family,
    singleton_family,
    surround_family,
    trio,
)


def axis_pair():
    P = make_cluster("P", [pt(-2, 0), pt(2, 0)])
    Q = make_cluster("Q", [pt(0, -2), pt(0, 2)])
    return make_family([P, Q])


def jittered_cross_pair(seed):
    rng = random.Random(seed)

    def j(d=101):
        return Fraction(rng.randrange(1, d - 1), d)

    P = make_cluster("P", [pt(-2 + j(), j()), pt(2 + j(), j())])
    Q = make_cluster("Q", [pt(j(), -2 + j()), pt(j(), 2 + j())])
    return make_family([P, Q])


def mixed_family(seed):
    # one crossing pair, a disjoint triangle, a far pair, one singleton
    rng = random.Random(seed)

    def j(d=97):
        return Fraction(rng.randrange(1, d - 1), d)

    P = make_cluster("P", [pt(-15 + j(), j()), pt(15 + j(), j())])
    Q = make_cluster("Q", [pt(j(), -15 + j()), pt(j(), 15 + j())])
    A = make_cluster("A", [pt(70 + j(), j()), pt(74 + j(), 3 + j()),
                           pt(72 + j(), 6 + j())])
    B = make_cluster("B", [pt(-60 + j(), 50 + j()), pt(-55 + j(), 54 + j())])
    S = make_cluster("S", [pt(40 + j(), -45 + j())])
    return make_family([P, Q, A, B, S])


def build_in_order(F, order, debug=True):
    """Drive insert_arbitrary with an explicit insertion order."""
    H = empty_hvd(F)
    CGX = None
    for cid in order:
        C = F.by_id(cid)
        if CGX is None:
            insert_cluster(H, C)
            CGX = initial_conflicts_arbitrary(H, cid)
        else:
            insert_arbitrary(H, CGX, C, debug=debug)
        check_conflict_store(H, CGX)
    return H, CGX


# -- whole-run differentials ------------------------------------------------

def test_single_cluster_build_is_plain_fvd():
    F = make_family([make_cluster("A", [pt(0, 0), pt(6, 0), pt(3, 5)])])
    H, counters = build_arbitrary(F, seed=0, debug=True)
    direct = empty_hvd(F)
    insert_cluster(direct, F.by_id("A"))
    assert canonical_serialize(H) == canonical_serialize(direct)
    assert counters.created_conflicts == 0


def test_noncrossing_families_match_noncrossing_builder():
    corpus = [
        trio(),
        disk_family(seed=11, k=8, per=4),
        disk_family(seed=5, k=12, per=5),
        surround_family(),
        singleton_family(seed=14),
    ]
    for F in corpus:
        want = canonical_serialize(build_noncrossing(F, seed=0)[0])
        for s in (0, 3):
            H, counters = build_arbitrary(F, seed=s, debug=True)
            assert canonical_serialize(H) == want
            assert len(counters.list_loads) == len(F)


def test_twenty_seeded_noncrossing_instances():
    # broad sweep without the debug reclipping, bytes only
    for i in range(20):
        F = disk_family(seed=100 + i, k=6, per=3, spacing=48, radius=7)
        want = canonical_serialize(build_noncrossing(F, seed=0)[0])
        H, _ = build_arbitrary(F, seed=i % 5, debug=False)
        assert canonical_serialize(H) == want


def test_axis_crossing_pair_faces_both_orders():
    # the symmetric pair splits P into two faces; Q keeps two as well
    F = axis_pair()
    want = brute_force_hvd_pair(F.by_id("P"), F.by_id("Q"))
    for order in (["P", "Q"], ["Q", "P"]):
        H, _ = build_in_order(F, order)
        got = {cid: len(cluster_face_components(H, cid)) for cid in ("P", "Q")}
        assert got == want


def test_jittered_crossing_pairs_match_oracles():
    for seed in (1, 2, 3):
        F = jittered_cross_pair(seed)
        P, Q = F.by_id("P"), F.by_id("Q")
        assert count_crossings_bruteforce(P, Q) == 2
        want = brute_force_hvd_pair(P, Q)
        blobs = set()
        for order in (["P", "Q"], ["Q", "P"]):
            H, _ = build_in_order(F, order)
            got = {cid: len(cluster_face_components(H, cid))
                   for cid in ("P", "Q")}
            assert got == want
            assert stats(H).m_observed == 2
            assert sample_verify(H, F, 2000, seed=7).ok()
            blobs.add(canonical_serialize(H))
        assert len(blobs) == 1


def test_mixed_families_order_invariant():
    for fs in (1, 2, 3):
        F = mixed_family(fs)
        blobs = set()
        for s in range(5):
            H, counters = build_arbitrary(F, seed=s, debug=True)
            blobs.add(canonical_serialize(H))
            assert sample_verify(H, F, 1500, seed=fs).ok()
        assert len(blobs) == 1


def test_counters_recorded_per_step():
    F = mixed_family(1)
    H, counters = build_arbitrary(F, seed=2, debug=False)
    assert len(counters.steps) == len(F)
    assert len(counters.list_loads) == len(F)
    totals = counters.totals()
    assert totals["A"] > 0 and totals["V"] > 0
    assert counters.created_conflicts > 0
    for _, load, live in counters.list_loads:
        assert load >= 0 and live >= 0


# -- conflict relocation across one insertion -------------------------------

def snapshot_lists(CGX):
    out = {}
    for (rid, cid), conf in CGX.by_pair.items():
        out.setdefault(cid, []).extend(
            (m.param, m.point, m.kind) for m in conf.members)
    return {cid: sorted(v) for cid, v in out.items()}


def test_far_insertion_leaves_conflicts_unchanged():
    P = make_cluster("P", [pt(-4, 0), pt(4, 1)])
    Q = make_cluster("Q", [pt(1, 9), pt(3, 12)])
    C = make_cluster("C", [pt(500, 480), pt(505, 485)])
    F = make_family([P, Q, C])
    H = empty_hvd(F)
    insert_cluster(H, P)
    CGX = initial_conflicts_arbitrary(H, "P")
    before = snapshot_lists(CGX)["Q"]
    insert_arbitrary(H, CGX, C, debug=True)
    after = snapshot_lists(CGX)["Q"]
    assert after == before


def test_swallowed_region_drops_conflicts_and_counts_l():
    # the ring erases the wide inner cluster; pending X watches throughout
    ring = surround_family()
    X = make_cluster("X", [pt(200, 205), pt(206, 199)])
    F = make_family(list(ring) + [X])
    order = ["inner", "r0", "r1", "r2", "r3", "r4", "r5", "X"]
    H = empty_hvd(F)
    insert_cluster(H, F.by_id("inner"))
    CGX = initial_conflicts_arbitrary(H, "inner")
    assert any(cid == "X" for _, cid in CGX.by_pair)
    counters = InstrumentationCounters()
    for cid in order[1:]:
        insert_arbitrary(H, CGX, F.by_id(cid),
                         counters=counters, debug=True)
        check_conflict_store(H, CGX)
        assert all(rid in H.ranges for (rid, _) in CGX.by_pair)
    assert H.region_empty("inner")
    assert counters.totals()["L"] > 0
    assert sample_verify(H, F, 2000, seed=5).ok()


def test_relocated_spans_match_fresh_recomputation():
    F = mixed_family(1)
    order = [c.id for c in F]
    random.Random(3).shuffle(order)
    H, CGX = build_in_order(F, order)
    check_vertex_lists(H, CGX)
    check_owner_stores(H, CGX)


def test_owner_stores_tile_the_chain():
    F = mixed_family(2)
    order = [c.id for c in F]
    H = empty_hvd(F)
    insert_cluster(H, F.by_id(order[0]))
    CGX = initial_conflicts_arbitrary(H, order[0])
    for cid in order[1:3]:
        insert_arbitrary(H, CGX, F.by_id(cid), debug=True)
    seen = set()
    for (rid, cid) in CGX.by_pair:
        key = (H.ranges[rid].owner_key, cid)
        if key in seen:
            continue
        seen.add(key)
        store = owner_store(CGX, key[0], cid)
        assert store.members == sorted(store.members, key=lambda m: m.param)
        for i in range(1, len(store.spans)):
            assert store.spans[i - 1][2] <= store.spans[i][1]
    assert seen


def test_pending_cluster_with_emptied_region_inserts_as_noop():
    ring = surround_family()
    order = ["r0", "r1", "r2", "r3", "r4", "r5", "inner"]
    H, CGX = build_in_order(ring, order)
    assert H.region_empty("inner")
    assert "inner" in H.inserted
    want = canonical_serialize(build_noncrossing(ring, seed=8)[0])
    assert canonical_serialize(H) == want


# -- walks into the new region ----------------------------------------------

def test_empty_transition_walk_adds_nothing():
    F = axis_pair()
    H = empty_hvd(F)
    insert_cluster(H, F.by_id("P"))
    CGX = initial_conflicts_arbitrary(H, "P")
    before = dict(CGX.by_pair)
    walked = update_conflicts_type1(H, CGX, F.by_id("Q"), F.by_id("P"),
                                    [], [], debug=True)
    assert walked == {}
    assert CGX.by_pair == before


def test_single_branch_carries_two_endpoints():
    A = make_cluster("A", [pt(0, 0), pt(5, 1)])
    C = make_cluster("C", [pt(40, 0), pt(44, 2)])
    Q = make_cluster("Q", [pt(21, 30), pt(24, 34)])
    F = make_family([A, C, Q])
    H = empty_hvd(F)
    insert_cluster(H, A)
    CGX = initial_conflicts_arbitrary(H, "A")
    insert_arbitrary(H, CGX, C, debug=True)
    new_rids = {rid for rid, rng in H.ranges.items()
                if rng.owner_key[0] == "C"}
    branches = [conf for (rid, cid), conf in CGX.by_pair.items()
                if cid == "Q" and rid in new_rids]
    assert branches
    clean = [c for c in branches
             if len(c.intervals) == 1
             and c.intervals[0][0] != c.intervals[0][1]
             and c.intervals[0][1] is not P_POS]
    assert clean
    for conf in clean:
        loose = [m for m in conf.members if not m.mixed]
        assert len(loose) <= 2


def test_exit_points_agree_with_stored_lists():
    seen_kinds = set()
    states = [
        (disk_family(seed=11, k=8, per=4), 4),
        (mixed_family(1), 3),
        (singleton_family(seed=14), 5),
    ]
    for F, upto in states:
        order = [c.id for c in F]
        random.Random(1).shuffle(order)
        H = empty_hvd(F)
        insert_cluster(H, F.by_id(order[0]))
        CGX = initial_conflicts_arbitrary(H, order[0])
        for cid in order[1:upto]:
            insert_arbitrary(H, CGX, F.by_id(cid), debug=True)
        for (rid, cid), conf in sorted(CGX.by_pair.items()):
            p = conf.owner_key[1]
            Qc = F.by_id(cid)
            chain = _chain(CGX, p, Qc)
            rng = H.ranges[rid]
            face = H.faces[rng.face_id]
            owner = F.by_id(conf.owner_key[0])
            for a, b in conf.intervals:
                prm, z, kind = find_exit_point(
                    H, CGX, rng, a, p, Qc, chain, [(a, b)], debug=True)
                assert prm == b
                if kind == "inf":
                    assert b is P_POS
                    continue
                seen_kinds.add(kind)
                if kind == "top":
                    assert squared_distance(z, p) == hausdorff_distance_sq(z, Qc)
                    assert _face_kind(face, z) == "top"
                elif kind == "skel":
                    others = [q for q in owner.hull if q != p]
                    assert any(squared_distance(z, q) == squared_distance(z, p)
                               for q in others)
                elif kind == "side":
                    sharers = [r for r in H.ranges.values()
                               if r.face_id == rng.face_id]
                    hits = sum(1 for r in sharers
                               if any(contains(piece, z) for piece in r.pieces))
                    assert hits >= 2
    assert {"side", "top", "skel"} <= seen_kinds


# -- singleton reduction ----------------------------------------------------

def test_all_singletons_reduce_to_classic_voronoi():
    F = singleton_family(seed=14)
    H, _ = build_arbitrary(F, seed=2, debug=True)
    fin = finalize(H)
    pure = {v for v, k in zip(fin.vertices, fin.vertex_kinds)
            if k.kind == "pure"}
    assert pure == classic_voronoi_vertices([c.hull[0] for c in F])
    assert stats(H).m_observed == 0
