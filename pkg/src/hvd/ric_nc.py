"""Incremental construction for pairwise non-crossing clusters.

Two bookkeeping schemes drive the same carving engine.  The conflict
graph keeps, for every uninserted cluster, the single position where its
farthest skeleton first enters territory the current diagram would cede
to it; the history graph records every range ever created and
rediscovers that position by a root-to-leaf descent.  Both orders of
work end in the same canonical subdivision, so their serializations are
byte-identical.

A skeleton position is either a finite point or the symbolic far end of
an unbounded skeleton edge (anchor plus outward direction).  All
comparisons at such symbolic positions are resolved exactly: the leading
term compares minimum inner products, and on a leading-term tie the
bounded parts of the asymptotic distance profiles decide.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .chains import contains, contains_at_infinity, from_halfplanes, line_point_at, plane
from .cluster import Cluster, ClusterFamily
from .diagram import (
    Hvd,
    InsertionOutcome,
    empty_hvd,
    insert_cluster,
    locate_at_infinity,
    locate_in_owner,
)
from .errors import DegenerateInput, PreconditionViolated, TieOnBoundary
from .fvd import Fvd, build_fvd, farthest_point_scan, segment_query
from .geom import (
    C_CLOSER,
    Q_CLOSER,
    Point,
    Scalar,
    compare_farthest_at_infinity,
    squared_distance,
)

__all__ = [
    "SkelPos",
    "Conflict",
    "ConflictGraph",
    "StepCounters",
    "InstrumentationCounters",
    "HistoryNode",
    "HistoryGraph",
    "HISTORY_ROOT",
    "skeleton_root_pos",
    "find_entry",
    "initial_conflicts",
    "insert_noncrossing",
    "build_noncrossing",
    "check_conflict_graph",
    "check_conflict_roots",
    "new_history",
    "history_descend_insert",
    "build_history",
]


class SkelPos(NamedTuple):
    """A position on a cluster's farthest skeleton.

    Finite positions carry the point itself.  The symbolic position at
    the far end of an unbounded edge carries a finite anchor on that
    edge plus the outward direction.  `edge` indexes Fvd.edges (None for
    a single-site skeleton) and `down` names the end of that edge that
    points away from the skeleton root.
    """

    point: Point
    inf_dir: Optional[tuple] = None
    edge: Optional[int] = None
    down: Optional[int] = None

    @property
    def at_infinity(self) -> bool:
        return self.inf_dir is not None


@dataclass(frozen=True)
class Conflict:
    range_id: int
    root: SkelPos
    cluster_id: str


@dataclass
class ConflictGraph:
    by_range: dict = field(default_factory=dict)  # rid -> set of cluster ids
    by_cluster: dict = field(default_factory=dict)  # cid -> Conflict
    dead: set = field(default_factory=set)  # permanently empty regions

    def arcs(self) -> int:
        return len(self.by_cluster)


@dataclass
class StepCounters:
    cluster_id: str
    R: int = 0  # conflicts deleted
    N: int = 0  # skeleton edges dropped out of active subtrees
    D: int = 0  # active subtrees that became empty
    K: int = 0  # root changes during a history descent
    A: int = 0  # conflicts created plus deleted (arbitrary-cluster variant)
    L: int = 0  # mixed list entries discarded with old conflicts (arbitrary)
    V: int = 0  # total list size over the new region's conflicts (arbitrary)


@dataclass
class InstrumentationCounters:
    steps: list = field(default_factory=list)
    created_ranges: int = 0
    created_conflicts: int = 0
    # conflicts the closing sweep found that no walk had seeded
    # (arbitrary-cluster variant only, stays 0 elsewhere)
    sweep_added: int = 0
    # (step index, total live list entries, live conflicts) samples, one per
    # insertion, taken after the conflict update settles
    list_loads: list = field(default_factory=list)

    def step(self, cluster_id: str) -> StepCounters:
        sc = StepCounters(cluster_id)
        self.steps.append(sc)
        return sc

    def totals(self) -> dict:
        out = {
            "created_ranges": self.created_ranges,
            "created_conflicts": self.created_conflicts,
            "sweep_added": self.sweep_added,
        }
        for name in ("R", "N", "D", "K", "A", "L", "V"):
            out[name] = sum(getattr(sc, name) for sc in self.steps)
        return out


# ---------------------------------------------------------------------------
# exact comparisons at skeleton positions


def _df2(y: Point, pts):
    return max(squared_distance(y, p) for p in pts)


def _sign(a, b) -> int:
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def _far_const(anchor: Point, d, pts):
    # among the points that set the leading term, the largest bounded part
    m = min(d[0] * p[0] + d[1] * p[1] for p in pts)
    return max(
        squared_distance(anchor, p)
        for p in pts
        if d[0] * p[0] + d[1] * p[1] == m
    )


def _cmp_at_infinity(anchor: Point, d, a_pts, b_pts) -> int:
    """Sign of df(., A) - df(., B) far out along anchor + t*d."""
    lead = compare_farthest_at_infinity(d, a_pts, b_pts)
    if lead == C_CLOSER:
        return -1
    if lead == Q_CLOSER:
        return 1
    return _sign(_far_const(anchor, d, a_pts), _far_const(anchor, d, b_pts))


def _cmp_pos(pos: SkelPos, a_pts, b_pts) -> int:
    """-1 when A is Hausdorff-closer at the position, +1 for B, 0 on a tie."""
    if pos.at_infinity:
        return _cmp_at_infinity(pos.point, pos.inf_dir, a_pts, b_pts)
    return _sign(_df2(pos.point, a_pts), _df2(pos.point, b_pts))


def _march_until(base: Point, d, win_pts, lose_pts) -> Point:
    """First dyadic point along the ray where `win_pts` strictly wins.

    The caller guarantees the win holds in the limit, so doubling the
    parameter terminates.
    """
    t = Scalar(1)
    for _ in range(512):
        q = Point(base.x + t * d[0], base.y + t * d[1])
        if _df2(q, win_pts) < _df2(q, lose_pts):
            return q
        t *= 2
    raise PreconditionViolated("ray comparison failed to stabilize")


# ---------------------------------------------------------------------------
# rooted walk over a farthest skeleton


def _edge_vertex(se, end):
    return se.seg.start() if end == 0 else se.seg.end()


def _edge_out_dir(se, end):
    return se.seg.inf_dir_start() if end == 0 else se.seg.inf_dir_end()


def _edge_anchor(se) -> Point:
    for end in (0, 1):
        v = _edge_vertex(se, end)
        if v is not None:
            return v
    return line_point_at(se.seg.line, Scalar(0))


def skeleton_root_pos(fvd: Fvd) -> SkelPos:
    """Canonical walk start: the root's unbounded end, or the lone site."""
    if fvd.root is None:
        return SkelPos(fvd.vertices[0])
    se = fvd.edges[fvd.root.edge]
    return SkelPos(
        _edge_anchor(se), fvd.root_direction(), fvd.root.edge, 1 - fvd.root.end
    )


def _cross_on_edge(fvd_q: Fvd, fvd_rival: Fvd, ei: int, exit_end: int,
                   near: SkelPos, far_v: Optional[Point]) -> SkelPos:
    """Equidistant point on edge `ei` between a losing near position and a
    winning far end (far_v None means the unbounded end wins)."""
    Q = fvd_q.cluster
    qpts = list(Q.hull)
    rpts = list(fvd_rival.cluster.hull)
    se = fvd_q.edges[ei]
    if far_v is None:
        base = near.point if not near.at_infinity else _edge_anchor(se)
        u = _march_until(base, _edge_out_dir(se, exit_end), qpts, rpts)
    else:
        u = far_v
    if near.at_infinity:
        v = _march_until(near.point, near.inf_dir, rpts, qpts)
    else:
        v = near.point
    z = segment_query(fvd_rival, None, u, v, Q)
    return SkelPos(z, None, ei, exit_end)


def find_entry(fvd_q: Fvd, fvd_rival: Fvd, start: SkelPos,
               drops: Optional[list] = None) -> Optional[SkelPos]:
    """First position at or below `start` where the skeleton's cluster holds
    its own against a single rival.

    Walks the skeleton away from the root.  Fully lost edges are counted
    into `drops` (a one-element sink list).  None means the whole
    subtree below `start` is lost to the rival.
    """
    qpts = list(fvd_q.cluster.hull)
    rpts = list(fvd_rival.cluster.hull)
    c0 = _cmp_pos(start, qpts, rpts)
    if c0 == 0:
        raise DegenerateInput("skeleton walk start is equidistant", (start.point,))
    dropped = 0
    found = None
    if c0 < 0:
        found = start
    elif start.edge is not None:
        queue = deque([(start.edge, 1 - start.down, start)])
        while queue:
            ei, enter, near = queue.popleft()
            se = fvd_q.edges[ei]
            exit_end = 1 - enter
            far_v = _edge_vertex(se, exit_end)
            if far_v is None:
                fdir = _edge_out_dir(se, exit_end)
                cf = _cmp_at_infinity(_edge_anchor(se), fdir, qpts, rpts)
                if cf == 0:
                    raise DegenerateInput(
                        "tie at an unbounded skeleton end", (near.point,))
                if cf < 0:
                    found = _cross_on_edge(fvd_q, fvd_rival, ei, exit_end, near, None)
                    break
                dropped += 1
                continue
            cf = _sign(_df2(far_v, qpts), _df2(far_v, rpts))
            if cf == 0:
                raise DegenerateInput(
                    "skeleton vertex equidistant to both clusters", (far_v,))
            if cf < 0:
                found = _cross_on_edge(fvd_q, fvd_rival, ei, exit_end, near, far_v)
                break
            dropped += 1
            for ej in fvd_q.adjacency[far_v]:
                if ej == ei:
                    continue
                ent = 0 if _edge_vertex(fvd_q.edges[ej], 0) == far_v else 1
                queue.append((ej, ent, SkelPos(far_v, None, ej, 1 - ent)))
    if drops is not None:
        drops.append(dropped)
    return found


# ---------------------------------------------------------------------------
# conflict-graph bookkeeping


def _register(CG: ConflictGraph, rid: int, pos: SkelPos, qid: str) -> None:
    CG.by_cluster[qid] = Conflict(rid, pos, qid)
    CG.by_range.setdefault(rid, set()).add(qid)


def _unlink(CG: ConflictGraph, conf: Conflict) -> None:
    members = CG.by_range.get(conf.range_id)
    if members is not None:
        members.discard(conf.cluster_id)
        if not members:
            del CG.by_range[conf.range_id]


def _range_near(H: Hvd, pos: SkelPos, owner_cluster: Cluster):
    """Range of `owner_cluster` whose closure holds the position."""
    if pos.at_infinity:
        rng = locate_at_infinity(H, pos.point, pos.inf_dir)
        if rng.owner_key[0] != owner_cluster.id:
            raise PreconditionViolated(
                "position at infinity settled with a different cluster")
        return rng
    try:
        c_star, _ = farthest_point_scan(owner_cluster, pos.point, strict=True)
    except TieOnBoundary as exc:
        raise DegenerateInput(
            "conflict root lands on the owner's skeleton", (pos.point,)) from exc
    rng = locate_in_owner(H, (owner_cluster.id, c_star), pos.point)
    if rng is None:
        raise PreconditionViolated("conflict root escaped the owner's ranges")
    return rng


def _relocate_same_owner(H: Hvd, owner_key, pos: SkelPos):
    if pos.at_infinity:
        rng = locate_at_infinity(H, pos.point, pos.inf_dir)
        if rng.owner_key != owner_key:
            raise PreconditionViolated("surviving owner lost its unbounded side")
        return rng
    rng = locate_in_owner(H, owner_key, pos.point)
    if rng is None:
        raise PreconditionViolated("conflict root escaped the owner's ranges")
    return rng


def initial_conflicts(H: Hvd, first_id: str,
                      counters: Optional[InstrumentationCounters] = None) -> ConflictGraph:
    """Conflict graph of the one-cluster diagram against every other cluster."""
    if list(H.inserted) != [first_id]:
        raise PreconditionViolated("initial conflicts need the one-cluster diagram")
    CG = ConflictGraph()
    first = H.cluster(first_id)
    fvd1 = H.fvds[first_id]
    sc = None
    if counters is not None:
        sc = counters.steps[-1] if counters.steps else counters.step(first_id)
    for C in sorted(H.family, key=lambda c: c.id):
        if C.id == first_id:
            continue
        if C.id not in H.fvds:
            H.fvds[C.id] = build_fvd(C)
        drops = []
        pos = find_entry(H.fvds[C.id], fvd1, skeleton_root_pos(H.fvds[C.id]), drops)
        if sc is not None:
            sc.N += drops[0]
        if pos is None:
            CG.dead.add(C.id)
            if sc is not None:
                sc.D += 1
            continue
        rng = _range_near(H, pos, first)
        _register(CG, rng.rid, pos, C.id)
        if counters is not None:
            counters.created_conflicts += 1
    return CG


def insert_noncrossing(H: Hvd, CG: ConflictGraph, C: Cluster,
                       counters: Optional[InstrumentationCounters] = None,
                       debug: bool = False) -> InsertionOutcome:
    """One insertion step driven by the conflict graph."""
    counters = counters if counters is not None else InstrumentationCounters()
    sc = counters.step(C.id)
    own = CG.by_cluster.pop(C.id, None)
    if own is None:
        CG.dead.add(C.id)
        return insert_cluster(H, C, seed_ranges=[])
    _unlink(CG, own)

    # owner points of every conflicted range, snapshotted before carving
    owner_of = {rid: H.ranges[rid].owner_key for rid in CG.by_range}
    out = insert_cluster(H, C, seed_ranges=[own.range_id], debug=debug)
    counters.created_ranges += len(out.created_ranges)
    deleted_rids = [r.rid for r in out.deleted_ranges]
    if debug and own.range_id not in deleted_rids:
        raise AssertionError("seed range survived the insertion it triggered")

    moved = []
    for rid in deleted_rids:
        for qid in sorted(CG.by_range.pop(rid, ())):
            moved.append((rid, qid))
    sc.R = len(moved) + 1  # including the consumed conflict of C itself

    for rid, qid in moved:
        conf = CG.by_cluster.pop(qid)
        pos = conf.root
        p_key = owner_of[rid]
        cmp1 = _cmp_pos(pos, [p_key[1]], list(C.hull))
        if cmp1 == 0:
            raise DegenerateInput(
                "conflict root equidistant between owner and newcomer",
                (pos.point,))
        if cmp1 < 0:
            # the old owner keeps the root's surroundings; only the range moved
            rng = _relocate_same_owner(H, p_key, pos)
        else:
            drops = []
            z = find_entry(H.fvds[qid], H.fvds[C.id], pos, drops)
            sc.N += drops[0]
            if z is None:
                CG.dead.add(qid)
                sc.D += 1
                continue
            pos = z
            rng = _range_near(H, pos, C)
        _register(CG, rng.rid, pos, qid)
        counters.created_conflicts += 1

    if debug:
        check_conflict_roots(H, CG)
    check_conflict_graph(CG, len(H.family))
    return out


def build_noncrossing(family: ClusterFamily, seed: int = 0, debug: bool = False):
    """Full construction over a seed-determined insertion order.

    Returns the diagram and the per-step instrumentation counters.
    """
    order = [c.id for c in family]
    random.Random(seed).shuffle(order)
    H = empty_hvd(family)
    counters = InstrumentationCounters()
    CG = None
    for cid in order:
        C = family.by_id(cid)
        if CG is None:
            counters.step(cid)
            out = insert_cluster(H, C, debug=debug)
            counters.created_ranges += len(out.created_ranges)
            CG = initial_conflicts(H, cid, counters)
        else:
            insert_noncrossing(H, CG, C, counters, debug=debug)
        check_conflict_graph(CG, len(family))
    return H, counters


def check_conflict_graph(CG: ConflictGraph, k: int) -> None:
    """Structural bounds: one conflict per pending cluster, at most k arcs."""
    arcs = 0
    for rid, members in CG.by_range.items():
        for cid in members:
            conf = CG.by_cluster.get(cid)
            if conf is None or conf.range_id != rid:
                raise AssertionError(f"dangling arc {rid}:{cid}")
        arcs += len(members)
    if arcs != len(CG.by_cluster):
        raise AssertionError("arc tally out of sync with cluster conflicts")
    if arcs > k:
        raise AssertionError(f"{arcs} conflict arcs for {k} clusters")
    if CG.dead & set(CG.by_cluster):
        raise AssertionError("dead cluster still holds a conflict")


def check_conflict_roots(H: Hvd, CG: ConflictGraph) -> None:
    """Exact per-conflict invariants: the root lies in its range's closure
    and is either equidistant to the range owner or the skeleton root."""
    for cid, conf in CG.by_cluster.items():
        rng = H.ranges.get(conf.range_id)
        if rng is None:
            raise AssertionError(f"conflict of {cid} points at a dead range")
        pos = conf.root
        fv = H.fvds[cid]
        if pos.at_infinity:
            if pos != skeleton_root_pos(fv):
                raise AssertionError(f"unanchored infinite root for {cid}")
            if not any(contains_at_infinity(pc, pos.inf_dir[0], pos.inf_dir[1])
                       for pc in rng.pieces):
                raise AssertionError(f"infinite root of {cid} left its range")
            continue
        if not any(contains(pc, pos.point) for pc in rng.pieces):
            raise AssertionError(f"root of {cid} left its range closure")
        if pos.edge is None:
            if pos.point != fv.vertices[0]:
                raise AssertionError(f"site root of {cid} moved")
        else:
            own = squared_distance(pos.point, rng.owner_key[1])
            far = _df2(pos.point, list(H.cluster(cid).hull))
            if own != far:
                raise AssertionError(f"root of {cid} is not equidistant")


# ---------------------------------------------------------------------------
# history-graph variant

HISTORY_ROOT = -1


@dataclass
class HistoryNode:
    rid: int
    level: int
    owner_key: Optional[tuple]
    pieces: list
    children: list = field(default_factory=list)
    deleted_at: Optional[int] = None
    deleter: Optional[str] = None


@dataclass
class HistoryGraph:
    nodes: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)

    def leaf_ids(self):
        return sorted(rid for rid, n in self.nodes.items()
                      if n.deleted_at is None and rid != HISTORY_ROOT)

    def max_out_degree(self) -> int:
        return max((len(n.children) for n in self.nodes.values()), default=0)


def new_history() -> HistoryGraph:
    HG = HistoryGraph()
    HG.nodes[HISTORY_ROOT] = HistoryNode(HISTORY_ROOT, 0, None, [plane()])
    HG.levels[0] = [HISTORY_ROOT]
    return HG


def _node_holds(node: HistoryNode, pos: SkelPos) -> bool:
    if pos.at_infinity:
        return any(contains_at_infinity(pc, pos.inf_dir[0], pos.inf_dir[1])
                   for pc in node.pieces)
    return any(contains(pc, pos.point) for pc in node.pieces)


def _node_holds_strict(node: HistoryNode, pos: SkelPos) -> bool:
    if pos.at_infinity:
        return any(contains_at_infinity(pc, pos.inf_dir[0], pos.inf_dir[1],
                                        strict=True) for pc in node.pieces)
    return any(contains(pc, pos.point, strict=True) for pc in node.pieces)


def _child_at(HG: HistoryGraph, candidates, pos: SkelPos) -> int:
    hits = [rid for rid in sorted(candidates) if _node_holds(HG.nodes[rid], pos)]
    if not hits:
        raise PreconditionViolated("descent position escaped every candidate")
    if len(hits) == 1:
        return hits[0]
    strict = [rid for rid in hits if _node_holds_strict(HG.nodes[rid], pos)]
    if len(strict) == 1:
        return strict[0]
    return hits[0]


def _pieces_touch(pa, pb) -> bool:
    for a in pa:
        la = [] if a.is_plane else list(a.lines())
        for b in pb:
            lb = [] if b.is_plane else list(b.lines())
            if not from_halfplanes(la + lb).is_empty:
                return True
    return False


def _extend_history(HG: HistoryGraph, H: Hvd, step: int,
                    out: InsertionOutcome, C: Cluster) -> None:
    created = []
    for rng in out.created_ranges:
        HG.nodes[rng.rid] = HistoryNode(rng.rid, step, rng.owner_key, rng.pieces)
        created.append(rng.rid)
    HG.levels[step] = sorted(created)
    if step == 1:
        root = HG.nodes[HISTORY_ROOT]
        root.children = list(HG.levels[1])
        root.deleted_at = 1
        root.deleter = C.id
        return
    for rng in out.deleted_ranges:
        node = HG.nodes[rng.rid]
        node.deleted_at = step
        node.deleter = C.id
        node.children = [r2 for r2 in HG.levels[step]
                         if _pieces_touch(node.pieces, HG.nodes[r2].pieces)]


def history_descend_insert(H: Hvd, HG: HistoryGraph, C: Cluster,
                           counters: Optional[InstrumentationCounters] = None,
                           debug: bool = False) -> InsertionOutcome:
    """Insert a cluster by walking the history graph root to leaf."""
    counters = counters if counters is not None else InstrumentationCounters()
    sc = counters.step(C.id)
    step = len(H.inserted) + 1
    if not H.inserted:
        out = insert_cluster(H, C, debug=debug)
        counters.created_ranges += len(out.created_ranges)
        _extend_history(HG, H, step, out, C)
        return out

    if C.id not in H.fvds:
        H.fvds[C.id] = build_fvd(C)
    fv = H.fvds[C.id]
    x = skeleton_root_pos(fv)
    moved = False  # becomes True once x is an equidistant crossing point
    node = HG.nodes[HISTORY_ROOT]
    while node.deleted_at is not None:
        ell = node.deleted_at
        deleter = H.cluster(node.deleter)
        if node.rid == HISTORY_ROOT:
            stay = False
        else:
            c1 = _cmp_pos(x, list(C.hull), list(deleter.hull))
            if c1 == 0:
                raise DegenerateInput(
                    "descent root equidistant to newcomer and deleter",
                    (x.point,))
            stay = c1 < 0
        if stay:
            cand = [r for r in node.children
                    if HG.nodes[r].owner_key[0] == node.owner_key[0]]
            if not moved:
                # the untouched skeleton root can sit strictly inside the
                # newcomer's future region; there the covering range may
                # switch owners without the root moving
                if not any(_node_holds(HG.nodes[r], x) for r in cand):
                    cand = node.children
            nxt = _child_at(HG, cand, x)
        else:
            drops = []
            z = find_entry(fv, H.fvds[deleter.id], x, drops)
            sc.N += drops[0]
            if z is None:
                sc.D += 1
                out = insert_cluster(H, C, seed_ranges=[])
                counters.created_ranges += len(out.created_ranges)
                return out
            if z != x:
                sc.K += 1
                moved = True
            x = z
            cand = [r for r in HG.levels[ell]
                    if HG.nodes[r].owner_key[0] == deleter.id]
            nxt = _child_at(HG, cand, x)
        if HG.nodes[nxt].level <= node.level:
            raise AssertionError("history descent failed to advance a level")
        node = HG.nodes[nxt]

    out = insert_cluster(H, C, seed_ranges=[node.rid], debug=debug)
    counters.created_ranges += len(out.created_ranges)
    _extend_history(HG, H, step, out, C)
    return out


def build_history(family: ClusterFamily, seed: int = 0, debug: bool = False):
    """Full construction with the history graph.

    Returns the diagram, the history graph, and the counters.
    """
    order = [c.id for c in family]
    random.Random(seed).shuffle(order)
    H = empty_hvd(family)
    HG = new_history()
    counters = InstrumentationCounters()
    for cid in order:
        history_descend_insert(H, HG, family.by_id(cid), counters, debug=debug)
    return H, HG, counters
