"""Incremental construction for cluster families whose members may cross.

When hulls cross, a cluster's future region can fall apart into several
faces, so the single-root bookkeeping of the non-crossing variant is not
enough.  This variant keeps one conflict per (diagram range, pending
cluster) pair.  Inside a range with owner point p the pending cluster Q
matters exactly where the dominance chain of p against Q (the boundary
of the set where Q overtakes p, a single open convex polyline that is
angularly monotone around p) meets the range closure.  A conflict stores
the chain parameter spans over the range plus the ordered vertex list
seen there; insertions update conflicts by walking the chains through
the carved remnants instead of re-clipping the whole diagram.

Chain positions are exact (edge index, line parameter) pairs ordered
along the chain's clockwise travel around its owner.
"""
from __future__ import annotations

import random
from bisect import insort
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional

from .chains import (
    _clip_interval,
    contains,
    intersect_lines,
    line_param_of,
    line_point_at,
    line_through,
)
from .cluster import Cluster, ClusterFamily, make_cluster
from .diagram import (
    SKEL,
    Hvd,
    InsertionOutcome,
    Range,
    empty_hvd,
    insert_cluster,
    k_region,
)
from .errors import DegenerateInput, PreconditionViolated
from .fvd import BisectorChain, bisector_point_cluster, build_fvd, segment_query
from .geom import C_CLOSER, Point, Scalar, compare_farthest_at_infinity, squared_distance
from .ric_nc import InstrumentationCounters, StepCounters, _df2, _march_until

__all__ = [
    "XMember",
    "XConflict",
    "TransitionPoint",
    "ConflictGraphX",
    "OwnerConflictStore",
    "initial_conflicts_arbitrary",
    "insert_arbitrary",
    "update_conflicts_type1",
    "update_conflicts_type2",
    "find_exit_point",
    "build_arbitrary",
    "vertex_list_bruteforce",
    "owner_store",
    "check_conflict_store",
    "check_owner_stores",
    "check_vertex_lists",
    "total_list_load",
    "P_NEG",
    "P_POS",
]


# ---------------------------------------------------------------------------
# chain parameters

P_NEG = (-1, 0)
P_POS = (1 << 60, 0)


def _canon(chain: BisectorChain, prm):
    """Junctions are always addressed as the end of the earlier edge."""
    i, t = prm
    if i > 0:
        e = chain.edges[i]
        if e.t0 is not None and t == e.t0:
            return (i - 1, chain.edges[i - 1].t1)
    return prm


def _param_point(chain: BisectorChain, prm) -> Point:
    i, t = prm
    return line_point_at(chain.edges[i].line, t)


def _param_on_chain(chain: BisectorChain, w: Point):
    for i, e in enumerate(chain.edges):
        if e.line.eval_at(w) != 0:
            continue
        t = line_param_of(e.line, w)
        if e.t0 is not None and t < e.t0:
            continue
        if e.t1 is not None and t > e.t1:
            continue
        return _canon(chain, (i, t))
    return None


def _sample_between(chain: BisectorChain, a, b) -> Point:
    """A chain point strictly between two parameters (a < b required)."""
    if a == P_NEG:
        i = 0
        lo = None
    else:
        i, lo = a
        e = chain.edges[i]
        # a junction parameter leaves nothing on its own edge
        if i + 1 < len(chain.edges) and e.t1 is not None and lo == e.t1:
            i += 1
            lo = chain.edges[i].t0
    if b != P_POS and b[0] == i:
        hi = b[1]
    else:
        hi = chain.edges[i].t1
    if lo is None and hi is None:
        t = Scalar(0)
    elif lo is None:
        t = hi - 1
    elif hi is None:
        t = lo + 1
    else:
        if not lo < hi:
            raise PreconditionViolated("empty parameter gap")
        t = (lo + hi) / 2
    return line_point_at(chain.edges[i].line, t)


# ---------------------------------------------------------------------------
# span arithmetic on chain parameters


def _merge_spans(spans):
    out: List[tuple] = []
    for lo, hi in sorted(spans):
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def _intersect_spans(A, B):
    out = []
    i = j = 0
    while i < len(A) and j < len(B):
        lo = max(A[i][0], B[j][0])
        hi = min(A[i][1], B[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if A[i][1] < B[j][1]:
            i += 1
        else:
            j += 1
    return out


def _complement_within(lo, hi, subs):
    """[lo, hi] minus already-sorted subs; keeps positive-length parts only."""
    out = []
    cur = lo
    for a, b in subs:
        if a > cur:
            out.append((cur, a))
        if b > cur:
            cur = b
    if cur < hi:
        out.append((cur, hi))
    return out


def _in_spans(spans, prm) -> bool:
    return any(lo <= prm <= hi for lo, hi in spans)


def _push_span(lst, span):
    insort(lst, span)


# ---------------------------------------------------------------------------
# conflict records


class XMember(NamedTuple):
    """One vertex-list entry: a chain position plus what sits there.

    `kind` is 'vertex' for an interior chain vertex, 'skel' for a list
    endpoint on the owner's skeleton (both mixed), 'side' for a sight-line
    crossing and 'top' for a region-boundary crossing (not mixed).
    """

    param: tuple
    point: Point
    kind: str

    @property
    def mixed(self) -> bool:
        return self.kind in ("vertex", "skel")


@dataclass(frozen=True)
class XConflict:
    range_id: int
    cluster_id: str
    owner_key: tuple
    intervals: tuple  # merged ascending (lo, hi) parameter spans
    members: tuple  # XMember entries ascending by param

    def span(self):
        return (self.intervals[0][0], self.intervals[-1][1])


class TransitionPoint(NamedTuple):
    """Crossing of a pending cluster's future boundary with the newcomer's."""

    point: Point
    cluster_id: str
    source_rid: int


@dataclass
class ConflictGraphX:
    by_range: dict = field(default_factory=dict)  # rid -> set of cluster ids
    by_cluster: dict = field(default_factory=dict)  # cid -> set of rids
    by_pair: dict = field(default_factory=dict)  # (rid, cid) -> XConflict
    chains: dict = field(default_factory=dict)  # (owner point, cid) -> chain
    probes: dict = field(default_factory=dict)  # owner point -> 1-point cluster
    dead: set = field(default_factory=set)

    def conflicts_of(self, cid: str) -> list:
        return [self.by_pair[(rid, cid)]
                for rid in sorted(self.by_cluster.get(cid, ()))]


def _chain(CGX: ConflictGraphX, p: Point, Q: Cluster) -> BisectorChain:
    key = (p, Q.id)
    ch = CGX.chains.get(key)
    if ch is None:
        ch = bisector_point_cluster(p, Q)
        CGX.chains[key] = ch
    return ch


def _probe(CGX: ConflictGraphX, p: Point) -> Cluster:
    c = CGX.probes.get(p)
    if c is None:
        c = make_cluster("~probe", (p,))
        CGX.probes[p] = c
    return c


def _add_conflict(CGX: ConflictGraphX, conf: XConflict):
    CGX.by_range.setdefault(conf.range_id, set()).add(conf.cluster_id)
    CGX.by_cluster.setdefault(conf.cluster_id, set()).add(conf.range_id)
    CGX.by_pair[(conf.range_id, conf.cluster_id)] = conf


def _drop_conflict(CGX: ConflictGraphX, conf: XConflict):
    del CGX.by_pair[(conf.range_id, conf.cluster_id)]
    s = CGX.by_range[conf.range_id]
    s.discard(conf.cluster_id)
    if not s:
        del CGX.by_range[conf.range_id]
    s = CGX.by_cluster[conf.cluster_id]
    s.discard(conf.range_id)
    if not s:
        del CGX.by_cluster[conf.cluster_id]


# ---------------------------------------------------------------------------
# clipping a chain against convex pieces


def _edge_in_convex(edge, region):
    """Parameter window of one chain edge inside a convex region, or None."""
    if region.is_empty:
        return None
    if region.is_plane:
        return (edge.t0, edge.t1)
    e = edge
    for ln in region.lines():
        res = _clip_interval(e, ln)
        if res is None:
            return None
        a, b, _ = res
        if a is not None and b is not None and a > b:
            return None
        e = replace(e, t0=a, t1=b)
    return (e.t0, e.t1)


def _chain_in_convex(chain: BisectorChain, region):
    spans = []
    for i, e in enumerate(chain.edges):
        r = _edge_in_convex(e, region)
        if r is None:
            continue
        a, b = r
        lo = P_NEG if a is None else _canon(chain, (i, a))
        hi = (i, b) if b is not None else P_POS
        spans.append((lo, hi))
    return _merge_spans(spans)


def _chain_in_pieces(chain: BisectorChain, pieces):
    spans = []
    for piece in pieces:
        spans.extend(_chain_in_convex(chain, piece))
    return _merge_spans(spans)


def _boundary_labels(rng: Range, w: Point):
    """Labels of every piece edge passing through a point of the range."""
    labs = []
    for piece in rng.pieces:
        for e in piece.edges():
            if e.line.eval_at(w) != 0:
                continue
            t = line_param_of(e.line, w)
            if e.t0 is not None and t < e.t0:
                continue
            if e.t1 is not None and t > e.t1:
                continue
            if e.label is not None:
                labs.append(e.label)
    return labs


def _face_kind(face, w: Point) -> Optional[str]:
    """Kind of a point on the face's outer boundary, None if interior.

    Carve leftovers make edge labels unreliable (seams keep region labels,
    swallowed-neighbor borders keep cut labels), so the outer boundary's
    position decides and labels only tell skeleton from region boundary.
    """
    hit = False
    skel = False
    for e in face.boundary:
        if e.line.eval_at(w) != 0:
            continue
        t = line_param_of(e.line, w)
        if e.t0 is not None and t < e.t0:
            continue
        if e.t1 is not None and t > e.t1:
            continue
        hit = True
        if isinstance(e.label, tuple) and e.label and e.label[0] == SKEL:
            skel = True
    if not hit:
        return None
    return "skel" if skel else "top"


def _end_kind_lenient(face, rng: Range, w: Point) -> str:
    """Like _end_kind but tolerates interior stops (old-cut leftovers)."""
    kind = _face_kind(face, w)
    if kind is not None:
        return kind
    return "side" if _boundary_labels(rng, w) else "stop"


def _end_kind(face, rng: Range, w: Point) -> str:
    kind = _end_kind_lenient(face, rng, w)
    if kind == "stop":
        raise PreconditionViolated("list endpoint misses the range boundary",
                                  (w,))
    return kind


def _members_for(face, chain: BisectorChain, rng: Range, spans) -> tuple:
    mem = []
    nj = len(chain.vertices)
    for lo, hi in spans:
        if lo != P_NEG:
            w = _param_point(chain, lo)
            mem.append(XMember(lo, w, _end_kind(face, rng, w)))
        for j in range(nj):
            pj = (j, chain.edges[j].t1)
            if lo < pj < hi:
                mem.append(XMember(pj, chain.vertices[j], "vertex"))
        if hi != P_POS and hi != lo:
            w = _param_point(chain, hi)
            mem.append(XMember(hi, w, _end_kind(face, rng, w)))
    return tuple(mem)


def _clip_conflict(H: Hvd, CGX: ConflictGraphX, rng: Range,
                   Q: Cluster) -> Optional[XConflict]:
    p = rng.owner_key[1]
    ch = _chain(CGX, p, Q)
    if ch.empty:
        return None
    spans = _chain_in_pieces(ch, rng.pieces)
    if not spans:
        return None
    face = H.faces[rng.face_id]
    return XConflict(rng.rid, Q.id, rng.owner_key, tuple(spans),
                     _members_for(face, ch, rng, spans))


def vertex_list_bruteforce(H: Hvd, rid: int, Q: Cluster) -> Optional[XConflict]:
    """Fresh-chain recomputation of one conflict, cache-free."""
    rng = H.ranges[rid]
    scratch = ConflictGraphX()
    return _clip_conflict(H, scratch, rng, Q)


# ---------------------------------------------------------------------------
# unified per-owner view


@dataclass(frozen=True)
class OwnerConflictStore:
    """All conflicts of one (owner point, pending cluster) pair, united.

    `members` is the merged vertex list with shared boundary entries
    deduplicated; `spans` lists (range id, lo, hi) per surviving chain
    interval, tiling the list without overlap.  A range shows up once per
    interval: the chain can leave a range and come back to it later.
    """

    owner_key: tuple
    cluster_id: str
    members: tuple
    spans: tuple  # ((rid, lo, hi), ...)


def owner_store(CGX: ConflictGraphX, owner_key, cid: str) -> OwnerConflictStore:
    confs = [c for c in CGX.by_pair.values()
             if c.owner_key == owner_key and c.cluster_id == cid]
    spans = sorted((lo, hi, c.range_id) for c in confs
                   for lo, hi in c.intervals)
    members: List[XMember] = []
    for m in sorted((m for c in confs for m in c.members)):
        if members and members[-1].param == m.param:
            continue
        members.append(m)
    return OwnerConflictStore(owner_key, cid, tuple(members),
                              tuple((rid, lo, hi) for lo, hi, rid in spans))


def check_owner_stores(H: Hvd, CGX: ConflictGraphX):
    """Per-owner spans must be ordered and overlap in at most one endpoint."""
    keys = sorted({(c.owner_key, c.cluster_id) for c in CGX.by_pair.values()},
                  key=lambda kc: (kc[0][0], kc[0][1], kc[1]))
    for owner_key, cid in keys:
        st = owner_store(CGX, owner_key, cid)
        for i in range(1, len(st.spans)):
            _, _, hi_prev = st.spans[i - 1]
            _, lo_cur, _ = st.spans[i]
            if lo_cur < hi_prev:
                raise AssertionError(
                    f"overlapping spans for owner {owner_key} vs {cid}")
        for i in range(1, len(st.members)):
            if not st.members[i - 1].param < st.members[i].param:
                raise AssertionError(
                    f"unified list out of order for owner {owner_key} vs {cid}")
        for m in st.members:
            if not any(lo <= m.param <= hi for _, lo, hi in st.spans):
                raise AssertionError(
                    f"list entry outside every span for owner {owner_key} vs {cid}")


def total_list_load(CGX: ConflictGraphX):
    """(live list entries, live conflicts) across the whole store."""
    return (sum(len(c.members) for c in CGX.by_pair.values()),
            len(CGX.by_pair))


def _sample_load(counters: Optional[InstrumentationCounters],
                 CGX: ConflictGraphX):
    if counters is None:
        return
    entries, confs = total_list_load(CGX)
    counters.list_loads.append((len(counters.steps) - 1, entries, confs))


# ---------------------------------------------------------------------------
# initial state


def initial_conflicts_arbitrary(H: Hvd, first_id: str,
                                counters: Optional[InstrumentationCounters] = None
                                ) -> ConflictGraphX:
    """Conflicts of the one-cluster diagram against every other cluster."""
    if list(H.inserted) != [first_id]:
        raise PreconditionViolated("initial conflicts need the one-cluster diagram")
    CGX = ConflictGraphX()
    ranges = sorted(H.ranges.values(), key=lambda r: r.rid)
    for Q in sorted(H.family, key=lambda c: c.id):
        if Q.id == first_id:
            continue
        if Q.id not in H.fvds:
            H.fvds[Q.id] = build_fvd(Q)
        got = False
        for rng in ranges:
            conf = _clip_conflict(H, CGX, rng, Q)
            if conf is not None:
                _add_conflict(CGX, conf)
                got = True
                if counters is not None:
                    counters.created_conflicts += 1
        if not got:
            # nothing to overtake now means nothing to overtake ever
            CGX.dead.add(Q.id)
    _sample_load(counters, CGX)
    return CGX


# ---------------------------------------------------------------------------
# exits from a range


def _feature_dirs(rng: Range, p: Point):
    dirs = []
    for piece in rng.pieces:
        if piece.is_plane:
            return None
        for e in piece.edges():
            for t, at_start in ((e.t0, True), (e.t1, False)):
                if t is None:
                    dirs.append(e.inf_dir_start() if at_start else e.inf_dir_end())
                else:
                    w = line_point_at(e.line, t)
                    d = (w.x - p.x, w.y - p.y)
                    if d != (0, 0):
                        dirs.append(d)
    return dirs


def _rightmost_dir(rng: Range, p: Point):
    """Clockwise-extreme direction of the range from its owner, if defined.

    Sound only when every direction fits in an open half plane, which holds
    whenever the owner has company in its cluster (the owner's cell is
    convex and does not contain the owner).  Returns None otherwise.
    """
    dirs = _feature_dirs(rng, p)
    if not dirs:
        return None
    m = dirs[0]
    for d in dirs[1:]:
        if m[0] * d[1] - m[1] * d[0] < 0:
            m = d
    for d in dirs:
        cr = m[0] * d[1] - m[1] * d[0]
        if cr < 0 or (cr == 0 and m[0] * d[0] + m[1] * d[1] < 0):
            return None
    return m


def _range_chain_crossings(rng: Range, chain: BisectorChain):
    """Raw chain-edge by piece-edge crossings, as (param, point) pairs."""
    out: Dict[tuple, Point] = {}
    for i, ce in enumerate(chain.edges):
        for piece in rng.pieces:
            if piece.is_plane:
                continue
            for be in piece.edges():
                w = intersect_lines(ce.line, be.line)
                if w is None:
                    continue
                t = line_param_of(ce.line, w)
                if ce.t0 is not None and t < ce.t0:
                    continue
                if ce.t1 is not None and t > ce.t1:
                    continue
                u = line_param_of(be.line, w)
                if be.t0 is not None and u < be.t0:
                    continue
                if be.t1 is not None and u > be.t1:
                    continue
                out[_canon(chain, (i, t))] = w
    return out


def _exit_candidates(rng: Range, chain: BisectorChain, x_prm, spans):
    """Boundary crossings and list stops ahead of x, ascending by param."""
    cands = {prm: w for prm, w in _range_chain_crossings(rng, chain).items()
             if prm > x_prm and _in_spans(spans, prm)}
    for lo, hi in spans:
        for prm in (lo, hi):
            if prm in (P_NEG, P_POS) or prm <= x_prm:
                continue
            w = _param_point(chain, prm)
            if any(contains(piece, w) for piece in rng.pieces):
                cands[prm] = w
    return sorted(cands.items())


def _span_end_set(spans):
    return {prm for span in spans for prm in span}


def _exit_by_scan(face, rng: Range, x_prm, chain: BisectorChain, spans):
    """First true departure of the chain from the range closure after x.

    Candidate crossings sitting on seams interior to the range are skipped
    by sampling the chain just beyond each one.
    """
    cands = _exit_candidates(rng, chain, x_prm, spans)
    ends = _span_end_set(spans)
    for idx, (prm, w) in enumerate(cands):
        if prm in ends:
            return (prm, w, _end_kind_lenient(face, rng, w))
        bound = None
        for lo, hi in spans:
            if lo <= prm <= hi:
                bound = hi
                break
        if idx + 1 < len(cands) and cands[idx + 1][0] < bound:
            bound = cands[idx + 1][0]
        if bound == prm:
            return (prm, w, _end_kind_lenient(face, rng, w))
        s = _sample_between(chain, prm, bound)
        if not any(contains(piece, s) for piece in rng.pieces):
            return (prm, w, _end_kind_lenient(face, rng, w))
    return (P_POS, None, "inf")


def _limit_gap_sign(d, p: Point, Q: Cluster) -> int:
    """Sign of d(.,p)^2 - df(.,Q)^2 far out along direction d."""
    side = compare_farthest_at_infinity(d, (p,), Q.hull)
    if side == 0:
        raise DegenerateInput("boundary edge runs out in a tied direction")
    return -1 if side == C_CLOSER else 1


def _finite_stand_in(e, at_start: bool, p: Point, Q: Cluster) -> Point:
    """Replace an unbounded fragment end by a far point with the limit sign."""
    d = e.inf_dir_start() if at_start else e.inf_dir_end()
    anchor = e.end() if at_start else e.start()
    if anchor is None:
        anchor = line_point_at(e.line, Scalar(0))
    if _limit_gap_sign(d, p, Q) < 0:
        return _march_until(anchor, d, (p,), Q.hull)
    return _march_until(anchor, d, Q.hull, (p,))


def _boundary_fragments(face, rng: Range):
    """Face outer-boundary parts within one range's closure."""
    frags = []
    for e in face.boundary:
        for piece in rng.pieces:
            r = _edge_in_convex(e, piece)
            if r is None:
                continue
            a, b = r
            if a is not None and b is not None and a == b:
                continue
            frags.append(replace(e, t0=a, t1=b))
    return frags


def _top_exit(H: Hvd, CGX: ConflictGraphX, rng: Range, x_prm, p: Point,
              Q: Cluster, chain: BisectorChain, spans, debug: bool):
    """Crossing with the range's region boundary, solved on the boundary edge."""
    if Q.id not in H.fvds:
        H.fvds[Q.id] = build_fvd(Q)

    def gap(w):
        return squared_distance(w, p) - _df2(w, Q.hull)

    best = None
    for e in _boundary_fragments(H.faces[rng.face_id], rng):
        w0 = e.start() if e.t0 is not None else _finite_stand_in(e, True, p, Q)
        w1 = e.end() if e.t1 is not None else _finite_stand_in(e, False, p, Q)
        g0, g1 = gap(w0), gap(w1)
        if g0 == 0:
            z = w0
        elif g1 == 0:
            z = w1
        elif (g0 < 0) == (g1 < 0):
            continue
        else:
            u, v = (w0, w1) if g0 < 0 else (w1, w0)
            z = segment_query(H.fvds[Q.id], None, u, v, _probe(CGX, p))
        prm = _param_on_chain(chain, z)
        if prm is None or prm <= x_prm or not _in_spans(spans, prm):
            continue
        # a zero at a fragment end may be a touch, not a departure
        bound = prm
        for lo, hi in spans:
            if lo <= prm <= hi:
                bound = hi
                break
        if bound != prm:
            s = _sample_between(chain, prm, bound)
            if any(contains(piece, s) for piece in rng.pieces):
                continue
        if best is None or prm < best[0]:
            best = (prm, z)
    if best is None:
        raise PreconditionViolated("no region-boundary crossing ahead",
                                  (_param_point(chain, x_prm) if x_prm not in
                                   (P_NEG, P_POS) else p,))
    return (best[0], best[1], "top")


def find_exit_point(H: Hvd, CGX: ConflictGraphX, rng: Range, x_prm, p: Point,
                    Q: Cluster, chain: BisectorChain, spans,
                    debug: bool = False):
    """Where the chain, entered at x, first leaves one range's closure.

    Returns (param, point, kind): 'side' continues in the owner's next
    range over, 'top' leaves through the region boundary, 'skel' ends the
    surviving portion on the owner's skeleton, 'inf' runs off to infinity.
    The structured route shoots the clockwise-extreme ray of the range
    from the owner; it applies whenever the range spans less than a half
    turn, which fails only for single-point owners, handled by the
    exhaustive scan.  `spans` is the chain's surviving parameter domain.
    """
    m = _rightmost_dir(rng, p)
    face = H.faces[rng.face_id]
    if m is None:
        return _exit_by_scan(face, rng, x_prm, chain, spans)
    check = _exit_by_scan(face, rng, x_prm, chain, spans) if debug else None

    rline = line_through(p, Point(p.x + m[0], p.y + m[1]))
    y = None
    for i, e in enumerate(chain.edges):
        w = intersect_lines(e.line, rline)
        if w is None:
            continue
        t = line_param_of(e.line, w)
        if e.t0 is not None and t < e.t0:
            continue
        if e.t1 is not None and t > e.t1:
            continue
        if (w.x - p.x) * m[0] + (w.y - p.y) * m[1] < 0:
            continue
        prm = _canon(chain, (i, t))
        if prm <= x_prm or not _in_spans(spans, prm):
            continue
        if y is None or prm < y[0]:
            y = (prm, w)

    if y is None:
        # surviving portion stops before the far side of the wedge
        t_best = None
        for prm in sorted(_span_end_set(spans)):
            if prm in (P_NEG, P_POS) or prm <= x_prm:
                continue
            w = _param_point(chain, prm)
            d = (w.x - p.x, w.y - p.y)
            if m[0] * d[1] - m[1] * d[0] < 0:
                continue
            t_best = (prm, w)
            break
        if t_best is None:
            out = (P_POS, None, "inf")
        elif any(contains(piece, t_best[1]) for piece in rng.pieces):
            out = (t_best[0], t_best[1], _end_kind_lenient(face, rng, t_best[1]))
        else:
            out = _top_exit(H, CGX, rng, x_prm, p, Q, chain, spans, debug)
    elif any(contains(piece, y[1]) for piece in rng.pieces):
        out = (y[0], y[1], _end_kind_lenient(face, rng, y[1]))
    else:
        out = _top_exit(H, CGX, rng, x_prm, p, Q, chain, spans, debug)

    if check is not None and out[:1] != check[:1]:
        raise AssertionError(
            f"exit disagreement: ray gives {out[0]}, scan gives {check[0]}")
    return out


# ---------------------------------------------------------------------------
# conflict updates around one insertion


def update_conflicts_type2(H: Hvd, CGX: ConflictGraphX, conf: XConflict,
                           Q: Cluster, C: Cluster, remnant_pool, kcache,
                           sink, trans, sc: StepCounters, debug: bool = False):
    """Relocate one conflict of a carved-up range onto the remnants.

    The chain portion is split into parts the newcomer swallowed and parts
    that survive; crossing points between the two become transition points,
    surviving parts are walked across the owner's remnant ranges and their
    parameter spans accumulate in `sink[rid]`.  Mixed list entries inside
    the swallowed parts count as discarded.
    """
    p = conf.owner_key[1]
    ch = _chain(CGX, p, Q)
    K = kcache.get(p)
    if K is None:
        K = kcache[p] = k_region(p, C)
    grabbed = _chain_in_convex(ch, K)
    pool = remnant_pool.get(conf.owner_key, [])

    for lo, hi in conf.intervals:
        inside = _intersect_spans(grabbed, [(lo, hi)])
        active = _complement_within(lo, hi, inside)
        for a, b in inside:
            for prm in (a, b):
                if prm in (P_NEG, P_POS):
                    continue
                w = _param_point(ch, prm)
                if squared_distance(w, p) == _df2(w, C.hull):
                    trans.setdefault(w, TransitionPoint(w, Q.id, conf.range_id))
        for mmb in conf.members:
            if mmb.mixed and lo <= mmb.param <= hi:
                if not any(a <= mmb.param <= b for a, b in active):
                    sc.L += 1
        if debug:
            for a, b in inside:
                if a < b:
                    s = _sample_between(ch, a, b)
                    assert _df2(s, C.hull) <= squared_distance(s, p), \
                        "swallowed part not actually swallowed"
        for a, b in active:
            if a == b:
                continue
            if debug:
                s = _sample_between(ch, a, b)
                assert _df2(s, C.hull) >= squared_distance(s, p), \
                    "surviving part lies inside the grab"
            _walk_active(H, CGX, ch, p, Q, pool, a, b, sink, debug)


def _locate_in(pool, s: Point) -> Optional[Range]:
    fallback = None
    for rng in sorted(pool, key=lambda r: r.rid):
        for piece in rng.pieces:
            if contains(piece, s, strict=True):
                return rng
            if fallback is None and contains(piece, s):
                fallback = rng
    return fallback


def _next_crossing(pool, chain: BisectorChain, cur, b):
    """Earliest piece-edge crossing of the chain after cur, up to b."""
    best = None
    for rng in pool:
        for prm in _range_chain_crossings(rng, chain):
            if cur < prm <= b and (best is None or prm < best):
                best = prm
    return best


def _walk_active(H: Hvd, CGX: ConflictGraphX, ch: BisectorChain, p: Point,
                 Q: Cluster, pool, a, b, sink, debug: bool):
    cur = a
    guard = 0
    while True:
        guard += 1
        if guard > 64 + 8 * max(1, len(pool)):
            raise PreconditionViolated("relocation walk failed to terminate")
        # the chunk up to the next crossing is crossing-free, so a sample
        # there pins down the range the chain runs through from cur on
        lim = _next_crossing(pool, ch, cur, b)
        s = _sample_between(ch, cur, b if lim is None else lim)
        rng = _locate_in(pool, s)
        if rng is None:
            raise PreconditionViolated("surviving chain part escaped the remnants",
                                      (s,))
        z_prm, z_pt, _kind = find_exit_point(H, CGX, rng, cur, p, Q, ch,
                                             [(a, b)], debug)
        if z_prm > b:
            raise PreconditionViolated("exit beyond the surviving part")
        _push_span(sink.setdefault(rng.rid, []), (cur, z_prm))
        if z_prm >= b:
            break
        cur = z_prm


def update_conflicts_type1(H: Hvd, CGX: ConflictGraphX, Q: Cluster, C: Cluster,
                           trans, pool, debug: bool = False):
    """Branch walk through the newcomer's region from the crossing points.

    Hops range to range along the chain of each range owner, collecting
    parameter spans per range id.  Branches that never touch the region
    boundary at a finite point stay invisible here; the exhaustive pass in
    insert_arbitrary supplies them.
    """
    walked: Dict[int, list] = {}
    pend = dict(trans)
    guard = 0
    while pend:
        z = min(pend)
        pend.pop(z)
        ent = _branch_entry(CGX, Q, pool, z, None)
        if ent is None:
            continue
        rng, ch, span, fwd = ent
        while True:
            guard += 1
            if guard > 256 + 16 * max(1, len(pool)):
                raise PreconditionViolated("branch walk failed to terminate")
            _push_span(walked.setdefault(rng.rid, []), span)
            w_prm = span[1] if fwd else span[0]
            if w_prm in (P_NEG, P_POS):
                break
            w = _param_point(ch, w_prm)
            ent = _branch_entry(CGX, Q, pool, w, rng.rid)
            if ent is None:
                # no continuation: the branch hit the region boundary
                pend.pop(w, None)
                break
            rng, ch, span, fwd = ent
    return walked


def _branch_entry(CGX: ConflictGraphX, Q: Cluster, pool, w: Point,
                  exclude: Optional[int]):
    for rng in sorted(pool, key=lambda r: r.rid):
        if rng.rid == exclude:
            continue
        if not any(contains(piece, w) for piece in rng.pieces):
            continue
        ch = _chain(CGX, rng.owner_key[1], Q)
        if ch.empty:
            continue
        prm = _param_on_chain(ch, w)
        if prm is None:
            continue
        for span in _chain_in_pieces(ch, rng.pieces):
            lo, hi = span
            if lo == prm and hi != prm:
                return rng, ch, span, True
            if hi == prm and lo != prm:
                return rng, ch, span, False
    return None


# ---------------------------------------------------------------------------
# the insertion itself


def insert_arbitrary(H: Hvd, CGX: ConflictGraphX, C: Cluster,
                     counters: Optional[InstrumentationCounters] = None,
                     debug: bool = False) -> InsertionOutcome:
    """Carve the newcomer's region and rebuild every conflict it touches."""
    cnt = counters if counters is not None else InstrumentationCounters()
    sc = cnt.step(C.id)

    if C.id in CGX.dead:
        out = insert_cluster(H, C, seed_ranges=[], debug=debug)
        if not out.new_region_empty:
            raise PreconditionViolated("cluster marked dead grew a region")
        _sample_load(cnt, CGX)
        return out

    mine = CGX.conflicts_of(C.id)
    if not mine:
        raise PreconditionViolated(f"no conflicts recorded for {C.id}")
    out = insert_cluster(H, C, seed_ranges=[c.range_id for c in mine],
                         debug=debug)
    cnt.created_ranges += len(out.created_ranges)

    for conf in mine:
        _drop_conflict(CGX, conf)
        sc.A += 1
        sc.L += sum(1 for m in conf.members if m.mixed)
    for key in [k for k in CGX.chains if k[1] == C.id]:
        del CGX.chains[key]

    if out.new_region_empty:
        CGX.dead.add(C.id)
        _sample_load(cnt, CGX)
        return out

    deleted_rids = {r.rid for r in out.deleted_ranges}
    created = sorted(out.created_ranges, key=lambda r: r.rid)
    new_pool = [r for r in created if r.owner_key[0] == C.id]
    remnant_pool: Dict[tuple, list] = {}
    for r in created:
        if r.owner_key[0] != C.id:
            remnant_pool.setdefault(r.owner_key, []).append(r)

    affected: Dict[str, list] = {}
    for rid in sorted(deleted_rids):
        for cid in sorted(CGX.by_range.get(rid, ())):
            affected.setdefault(cid, []).append(CGX.by_pair[(rid, cid)])

    kcache: Dict[Point, object] = {}
    transitions: Dict[str, dict] = {}
    relocated: Dict[str, dict] = {}
    for cid in sorted(affected):
        Q = H.family.by_id(cid)
        sink = relocated.setdefault(cid, {})
        tr = transitions.setdefault(cid, {})
        for conf in affected[cid]:
            update_conflicts_type2(H, CGX, conf, Q, C, remnant_pool, kcache,
                                   sink, tr, sc, debug=debug)

    for cid in sorted(affected):
        for conf in affected[cid]:
            _drop_conflict(CGX, conf)
            sc.A += 1
        Q = H.family.by_id(cid)
        for rid in sorted(relocated.get(cid, ())):
            rng = H.ranges[rid]
            spans = _merge_spans(relocated[cid][rid])
            if debug:
                fresh = _clip_conflict(H, CGX, rng, Q)
                assert fresh is not None and list(fresh.intervals) == spans, \
                    f"relocated spans disagree with a fresh clip on range {rid}"
            ch = _chain(CGX, rng.owner_key[1], Q)
            conf = XConflict(rid, cid, rng.owner_key, tuple(spans),
                             _members_for(H.faces[rng.face_id], ch, rng, spans))
            _add_conflict(CGX, conf)
            sc.A += 1
            cnt.created_conflicts += 1

    walk_spans: Dict[str, dict] = {}
    for cid in sorted(transitions):
        if transitions[cid]:
            Q = H.family.by_id(cid)
            walk_spans[cid] = update_conflicts_type1(H, CGX, Q, C,
                                                     transitions[cid],
                                                     new_pool, debug=debug)

    inserted = set(H.inserted)
    pending = [c.id for c in sorted(H.family, key=lambda c: c.id)
               if c.id not in inserted and c.id not in CGX.dead]
    for cid in pending:
        Q = H.family.by_id(cid)
        got = walk_spans.get(cid, {})
        for rng in new_pool:
            conf = _clip_conflict(H, CGX, rng, Q)
            walked = got.get(rng.rid)
            if conf is None:
                if walked:
                    raise AssertionError(
                        f"branch walk invented a conflict on range {rng.rid}")
                continue
            if walked is None or _merge_spans(walked) != list(conf.intervals):
                # a branch with no finite boundary crossing has no seed;
                # the clip supplies it and the counter keeps it visible
                cnt.sweep_added += 1
            _add_conflict(CGX, conf)
            sc.A += 1
            sc.V += len(conf.members)
            cnt.created_conflicts += 1

    for cid in pending:
        if not CGX.by_cluster.get(cid):
            CGX.dead.add(cid)

    _sample_load(cnt, CGX)
    if debug:
        check_vertex_lists(H, CGX)
        check_owner_stores(H, CGX)
    return out


def build_arbitrary(family: ClusterFamily, seed: int = 0, debug: bool = False):
    """Full construction over a seed-determined insertion order.

    Returns the diagram and the per-step instrumentation counters.  Works
    for any family; on pairwise non-crossing input the result is the same
    canonical subdivision the non-crossing variant produces.
    """
    order = [c.id for c in family]
    random.Random(seed).shuffle(order)
    H = empty_hvd(family)
    counters = InstrumentationCounters()
    CGX = None
    for cid in order:
        C = family.by_id(cid)
        if CGX is None:
            counters.step(cid)
            out = insert_cluster(H, C, debug=debug)
            counters.created_ranges += len(out.created_ranges)
            CGX = initial_conflicts_arbitrary(H, cid, counters)
        else:
            insert_arbitrary(H, CGX, C, counters, debug=debug)
        check_conflict_store(H, CGX)
    return H, counters


# ---------------------------------------------------------------------------
# consistency checks


def check_conflict_store(H: Hvd, CGX: ConflictGraphX):
    """Structural coherence of the store; raises AssertionError on damage."""
    inserted = set(H.inserted)
    for (rid, cid), conf in CGX.by_pair.items():
        if rid not in H.ranges:
            raise AssertionError(f"conflict on retired range {rid}")
        if cid in inserted:
            raise AssertionError(f"inserted cluster {cid} still in conflict")
        if cid in CGX.dead:
            raise AssertionError(f"dead cluster {cid} still in conflict")
        if H.ranges[rid].owner_key != conf.owner_key:
            raise AssertionError(f"conflict owner drifted on range {rid}")
        if conf.range_id != rid or conf.cluster_id != cid:
            raise AssertionError("conflict filed under the wrong key")
        if cid not in CGX.by_range.get(rid, ()):
            raise AssertionError("range index out of sync")
        if rid not in CGX.by_cluster.get(cid, ()):
            raise AssertionError("cluster index out of sync")
        for i in range(1, len(conf.intervals)):
            if not conf.intervals[i - 1][1] < conf.intervals[i][0]:
                raise AssertionError(f"unmerged spans on range {rid}")
        for i in range(1, len(conf.members)):
            if not conf.members[i - 1].param < conf.members[i].param:
                raise AssertionError(f"list out of order on range {rid}")
    # the chain meets one convex piece's boundary at most twice (the chain
    # is concave seen from the owner, the piece is convex); a range peeled
    # into two clip groups can take two per group
    for (rid, cid), conf in CGX.by_pair.items():
        loose = [m for m in conf.members if not m.mixed]
        if len(loose) <= 2:
            continue
        rng = H.ranges[rid]
        npieces = len(rng.pieces)
        if len(loose) > 2 * npieces:
            raise AssertionError(
                f"{len(loose)} boundary entries on one list "
                f"(range {rid} vs {cid}, {npieces} pieces)")
        exclusive = [0] * npieces
        for m in loose:
            hits = [i for i in range(npieces)
                    if contains(rng.pieces[i], m.point)]
            if not hits:
                raise AssertionError(
                    f"list member off its range (range {rid} vs {cid})")
            if len(hits) == 1:
                exclusive[hits[0]] += 1
        if any(c > 2 for c in exclusive):
            raise AssertionError(
                f"{max(exclusive)} boundary entries on one clip group "
                f"(range {rid} vs {cid})")
    for rid, cids in CGX.by_range.items():
        for cid in cids:
            if (rid, cid) not in CGX.by_pair:
                raise AssertionError("dangling range index entry")
    for cid, rids in CGX.by_cluster.items():
        for rid in rids:
            if (rid, cid) not in CGX.by_pair:
                raise AssertionError("dangling cluster index entry")


def check_vertex_lists(H: Hvd, CGX: ConflictGraphX):
    """Every stored conflict equals a fresh clip of its chain and range."""
    for (rid, cid) in sorted(CGX.by_pair):
        conf = CGX.by_pair[(rid, cid)]
        fresh = _clip_conflict(H, CGX, H.ranges[rid], H.family.by_id(cid))
        if fresh is None:
            raise AssertionError(f"stored conflict vanished on reclip ({rid}, {cid})")
        if fresh.intervals != conf.intervals or fresh.members != conf.members:
            raise AssertionError(f"stored conflict drifted on ({rid}, {cid})")
    # no conflict may be missing either
    inserted = set(H.inserted)
    for Q in sorted(H.family, key=lambda c: c.id):
        if Q.id in inserted or Q.id in CGX.dead:
            continue
        for rng in sorted(H.ranges.values(), key=lambda r: r.rid):
            fresh = _clip_conflict(H, CGX, rng, Q)
            if fresh is not None and (rng.rid, Q.id) not in CGX.by_pair:
                raise AssertionError(
                    f"missing conflict on range {rng.rid} vs {Q.id}")
