"""Maintained Hausdorff Voronoi subdivision with visibility-refined ranges.

State is a partition of the plane into convex pieces grouped by owner point.
Derived structure (faces, ranges, vertices, bytes) is a function of the
current cluster *set* alone, never of insertion order: faces are recovered
set-theoretically by cancelling seams between pieces, and the range
refinement cuts each face along sight lines from its owner.  That is what
makes differential runs across construction algorithms byte-identical.

Edge labels are small tuples describing the neighbor across the edge:
("skel", q) for a boundary against another point of the same cluster,
("bh", cid, q) against point q of cluster cid, ("vis", p) for a sight-line
cut belonging to owner p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cmp_to_key
from typing import Optional

from .chains import (
    Chain,
    ConvexRegion,
    bisector_line,
    clip,
    contains,
    from_halfplanes,
    line_key,
    line_param_of,
    line_point_at,
    line_through,
    plane,
    primitive_dir,
)
from .cluster import Cluster, ClusterFamily, hausdorff_distance_sq, is_crossing_mixed_vertex
from .errors import DegenerateInput, PreconditionViolated, TieOnBoundary
from .fvd import build_fvd
from .geom import Point, Scalar, squared_distance

SKEL = "skel"
BH = "bh"
VIS = "vis"


# ---------------------------------------------------------------------------
# vertex taxonomy


@dataclass(frozen=True)
class VertexKind:
    kind: str  # "pure" | "mixed" | "farthest" | "visibility"
    cluster: Optional[str] = None
    crossing: Optional[bool] = None

    def text(self) -> str:
        if self.kind == "mixed":
            return f"mixed {self.cluster} " + ("crossing" if self.crossing else "plain")
        if self.kind == "farthest":
            return f"farthest {self.cluster}"
        return self.kind


PURE = VertexKind("pure")
VISIBILITY = VertexKind("visibility")


def mixed_kind(cluster_id: str, crossing: bool) -> VertexKind:
    return VertexKind("mixed", cluster_id, crossing)


def farthest_kind(cluster_id: str) -> VertexKind:
    return VertexKind("farthest", cluster_id)


def classify_vertex(v: Point, defining) -> VertexKind:
    """Kind of a diagram vertex from its defining (cluster, point) pairs.

    `defining` is an iterable of (Cluster, Point).  Fewer than three distinct
    points means the vertex exists only because of a sight-line cut.
    """
    sites = []
    seen = set()
    for cl, p in defining:
        if (cl.id, p) not in seen:
            seen.add((cl.id, p))
            sites.append((cl, p))
    pts = {p for _, p in sites}
    if len(pts) < 3:
        return VISIBILITY
    if len(pts) > 3:
        raise DegenerateInput("vertex with more than three defining points", (v, sorted(pts)))
    clusters = {}
    for cl, p in sites:
        clusters.setdefault(cl.id, (cl, []))[1].append(p)
    if len(clusters) == 3:
        return PURE
    if len(clusters) == 1:
        (cid,) = clusters
        return farthest_kind(cid)
    if len(clusters) != 2:
        raise PreconditionViolated("vertex needs one to three defining clusters")
    (ca, pa), (cb, pb) = clusters.values()
    if len(pa) == 2 and len(pb) == 1:
        own, own_pts, rival, rival_pt = ca, pa, cb, pb[0]
    elif len(pb) == 2 and len(pa) == 1:
        own, own_pts, rival, rival_pt = cb, pb, ca, pa[0]
    else:
        raise PreconditionViolated("mixed vertex needs a 2+1 point split")
    flag = is_crossing_mixed_vertex(v, own, own_pts[0], own_pts[1], rival, rival_pt)
    return mixed_kind(own.id, flag)


# ---------------------------------------------------------------------------
# exact interval bounds; tuples so None-infinities compare exactly

_NEG = (0, 0)
_POS = (2, 0)


def _lob(v):
    return _NEG if v is None else (1, v)


def _hib(v):
    return _POS if v is None else (1, v)


def _unb(b):
    return b[1] if b[0] == 1 else None


def _overlap(a1, b1, a2, b2):
    """Positive-length intersection of two intervals, or None."""
    lo = max(_lob(a1), _lob(a2))
    hi = min(_hib(b1), _hib(b2))
    if lo < hi:
        return _unb(lo), _unb(hi)
    return None


def _subtract(lo, hi, cuts):
    """Interval minus a list of intervals; positive-length survivors."""
    clipped = []
    for a, b in cuts:
        ov = _overlap(lo, hi, a, b)
        if ov is not None:
            clipped.append(ov)
    clipped.sort(key=lambda iv: (_lob(iv[0]), _hib(iv[1])))
    out = []
    cur = _lob(lo)
    for a, b in clipped:
        la, hb = _lob(a), _hib(b)
        if cur < la:
            out.append((_unb(cur), a))
        if hb > cur:
            cur = hb
    if cur < _hib(hi):
        out.append((_unb(cur), hi))
    return out


def _canon_interval(line, t0, t1):
    """Interval of an edge in the orientation-free parameterization of its line."""
    ukey, flipped = line_key(line)
    if flipped:
        lo = None if t1 is None else -t1
        hi = None if t0 is None else -t0
    else:
        lo, hi = t0, t1
    return ukey, flipped, lo, hi


def _own_interval(flipped, lo, hi):
    """Back from canonical params to the edge's own orientation."""
    if flipped:
        return (None if hi is None else -hi), (None if lo is None else -lo)
    return lo, hi


# ---------------------------------------------------------------------------
# structural records


@dataclass
class Face:
    fid: int
    owner_key: tuple  # (cluster_id, Point)
    pieces: list
    boundary: list  # BEdge fragments, owner orientation, seams cancelled
    chains: list  # stitched Chain objects over `boundary`
    corners: list  # finite junction points, in chain order
    key: tuple
    range_ids: list = field(default_factory=list)
    slits: list = field(default_factory=list)  # [(p, corner)] sight cuts that split nothing


@dataclass
class Range:
    rid: int
    owner_key: tuple
    face_id: int
    pieces: list
    tag: tuple  # canonical wedge tag within the face
    defining: Optional[frozenset] = None  # filled by finalize

    def key(self, face_key):
        return (face_key, self.tag)


@dataclass
class OwnerState:
    cluster_id: str
    point: Point
    singleton: bool
    pieces: list = field(default_factory=list)
    face_ids: list = field(default_factory=list)
    _bbox: object = None  # lazily cached float bbox

    @property
    def key(self):
        return (self.cluster_id, self.point)

    def empty(self) -> bool:
        return not self.pieces


@dataclass
class Counters:
    insertions: int = 0
    created_ranges: int = 0
    deleted_ranges: int = 0
    created_faces: int = 0
    deleted_faces: int = 0
    face_tests: int = 0
    per_insertion: list = field(default_factory=list)


@dataclass
class InsertionOutcome:
    cluster_id: str
    affected_owners: list
    deleted_ranges: list
    created_ranges: list
    deleted_faces: list
    created_faces: list
    new_region_empty: bool
    tested_faces: int


@dataclass
class Hvd:
    family: ClusterFamily
    inserted: list = field(default_factory=list)
    owners: dict = field(default_factory=dict)  # (cid, Point) -> OwnerState
    faces: dict = field(default_factory=dict)  # fid -> Face
    ranges: dict = field(default_factory=dict)  # rid -> Range
    fvds: dict = field(default_factory=dict)
    edge_index: dict = field(default_factory=dict)  # ukey -> {fid: [(side, lo, hi)]}
    counters: Counters = field(default_factory=Counters)
    version: int = 0
    _next_fid: int = 0
    _next_rid: int = 0
    _locator: object = None
    _final: object = None

    def cluster(self, cid: str) -> Cluster:
        return self.family.by_id(cid)

    def owner_states(self, cid: str):
        return [st for st in self.owners.values() if st.cluster_id == cid]

    def region_empty(self, cid: str) -> bool:
        return all(st.empty() for st in self.owner_states(cid))

    def all_ranges(self):
        return list(self.ranges.values())

    def face_of_range(self, rid: int) -> Face:
        return self.faces[self.ranges[rid].face_id]


def empty_hvd(family: ClusterFamily) -> Hvd:
    return Hvd(family=family)


# ---------------------------------------------------------------------------
# small geometric helpers


def _clip_by(piece: ConvexRegion, lines_labels) -> ConvexRegion:
    cur = piece
    for ln, lab in lines_labels:
        cur = clip(cur, ln, lab)
        if cur.is_empty:
            break
    return cur


def k_region(p: Point, C: Cluster) -> ConvexRegion:
    """Where every point of C is at least as close as p is; convex, possibly empty.

    Inserting C steals exactly this part of p's region.
    """
    lines = [bisector_line(c, p) for c in C.hull]
    labels = [(BH, C.id, c) for c in C.hull]
    return from_halfplanes(lines, labels)


def _split_piece(piece: ConvexRegion, klines):
    """(piece ∩ K, staircase pieces of piece ∖ K); disjoint interiors."""
    outs = []
    cur = piece
    for ln, lab in klines:
        out = clip(cur, ln.reversed(), lab)
        if not out.is_empty:
            outs.append(out)
        cur = clip(cur, ln, lab)
        if cur.is_empty:
            break
    return cur, outs


def _relabel_stolen(piece: ConvexRegion, new_cid: str, src_key) -> ConvexRegion:
    src_cid, src_pt = src_key
    chains = []
    for ch in piece.chains:
        edges = []
        for e in ch.edges:
            lab = e.label
            if isinstance(lab, tuple) and lab and lab[0] == BH and lab[1] == new_cid:
                lab = (BH, src_cid, src_pt)
            edges.append(replace(e, label=lab))
        chains.append(Chain(edges, ch.closed))
    return ConvexRegion(chains=chains, is_plane=piece.is_plane, is_empty=piece.is_empty)


def _ray_eventually_inside(piece: ConvexRegion, origin: Point, d) -> bool:
    """Whether origin + t*d lies in the piece for all large t (boundary allowed)."""
    if piece.is_plane:
        return True
    if piece.is_empty:
        return False
    for ln in piece.lines():
        v = ln.eval_dir(d[0], d[1])
        if v > 0:
            return False
        if v == 0 and ln.eval_at(origin) > 0:
            return False
    return True


def _prim_dir_between(p: Point, v: Point):
    dx = Scalar(v[0] - p[0])
    dy = Scalar(v[1] - p[1])
    dn = int(dx.denominator)
    dm = int(dy.denominator)
    g = math.gcd(dn, dm)
    l = dn // g * dm
    return primitive_dir(int(dx.numerator) * (l // dn), int(dy.numerator) * (l // dm))


def _half(d) -> int:
    return 0 if (d[1] > 0 or (d[1] == 0 and d[0] > 0)) else 1


def _ang_cmp(d1, d2) -> int:
    h1, h2 = _half(d1), _half(d2)
    if h1 != h2:
        return -1 if h1 < h2 else 1
    cr = d1[0] * d2[1] - d1[1] * d2[0]
    if cr > 0:
        return -1
    if cr < 0:
        return 1
    return 0


def _sorted_dirs(dirs):
    return sorted(set(dirs), key=cmp_to_key(_ang_cmp))


def _pt_plus(p: Point, d) -> Point:
    return Point(p[0] + d[0], p[1] + d[1])


# ---------------------------------------------------------------------------
# face recovery: cancel seams between disjoint pieces, group, stitch


class _UF:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _merge_fragments(chain: Chain) -> Chain:
    """Fuse consecutive same-line fragments, but only under an identical label."""
    es = chain.edges
    if len(es) < 2:
        return chain
    out = []
    for e in es:
        if out and out[-1].line == e.line and out[-1].label == e.label \
                and out[-1].t1 == e.t0:
            out[-1] = replace(out[-1], t1=e.t1)
        else:
            out.append(e)
    if chain.closed and len(out) > 1 and out[0].line == out[-1].line \
            and out[0].label == out[-1].label and out[-1].t1 == out[0].t0:
        out[0] = replace(out[-1], t1=out[0].t1)
        out.pop()
    return Chain(out, chain.closed)


def _stitch_loose(fragments):
    """Assemble oriented fragments into chains, tolerating shared endpoints.

    Face boundaries can pinch at a degenerate vertex; resolve by preferring,
    at each junction, the continuation that has not been used yet.
    """
    from .chains import stitch

    try:
        return stitch(fragments)
    except PreconditionViolated as exc:
        raise DegenerateInput("face boundary pinches or dead-ends", str(exc))


def _faces_from_pieces(pieces):
    """Group disjoint convex pieces into faces; return per-face structure.

    A seam is a positive-length interval shared, with opposite orientations,
    by two pieces on one line.  Seams cancel; what survives is the face
    boundary.  Output entries: dict(piece_idx, boundary, chains, key).
    """
    if not pieces:
        return []
    if len(pieces) == 1 and pieces[0].is_plane:
        return [{
            "pieces": [pieces[0]],
            "boundary": [],
            "chains": [],
            "key": ("plane",),
        }]

    recs = []  # (piece_idx, BEdge, ukey, flipped, lo, hi)
    by_line = {}
    for idx, piece in enumerate(pieces):
        for e in piece.edges():
            ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
            rec = (idx, e, ukey, flipped, lo, hi)
            recs.append(rec)
            by_line.setdefault(ukey, []).append(rec)

    uf = _UF(len(pieces))
    fragments_of = {i: [] for i in range(len(pieces))}
    for ukey, rows in by_line.items():
        for rec in rows:
            idx, e, _, flipped, lo, hi = rec
            cuts = []
            for other in rows:
                if other[3] == flipped:
                    continue
                ov = _overlap(lo, hi, other[4], other[5])
                if ov is not None:
                    cuts.append(ov)
                    uf.union(idx, other[0])
            for a, b in _subtract(lo, hi, cuts):
                t0, t1 = _own_interval(flipped, a, b)
                fragments_of[idx].append(replace(e, t0=t0, t1=t1))

    groups = {}
    for idx in range(len(pieces)):
        groups.setdefault(uf.find(idx), []).append(idx)

    faces = []
    for members in groups.values():
        frags = [f for i in members for f in fragments_of[i]]
        chains = [_merge_fragments(c) for c in _stitch_loose(frags)]
        boundary = [e for c in chains for e in c.edges]
        key_rows = []
        for e in boundary:
            ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
            key_rows.append((ukey, flipped, _lob(lo), _hib(hi), _label_key(e.label)))
        faces.append({
            "pieces": [pieces[i] for i in members],
            "boundary": boundary,
            "chains": chains,
            "key": tuple(sorted(key_rows)),
        })
    return faces


def _label_key(lab):
    if not isinstance(lab, tuple) or not lab:
        return ("?",)
    if lab[0] == BH:
        return (BH, lab[1], lab[2][0], lab[2][1])
    if lab[0] == SKEL:
        return (SKEL, "", lab[1][0], lab[1][1])
    if lab[0] == VIS:
        return (VIS, "", lab[1][0], lab[1][1])
    return ("?",)


def _face_corners(chains):
    """Finite junction points between consecutive boundary edges."""
    corners = []
    for ch in chains:
        es = ch.edges
        n = len(es)
        if n == 0:
            continue
        last = n if ch.closed else n - 1
        for i in range(last):
            p = es[i].end()
            if p is not None:
                corners.append(p)
    return corners


# ---------------------------------------------------------------------------
# visibility refinement of one face


def _segment_hits_face(p: Point, v: Point, pieces) -> bool:
    """Whether the open segment (p, v) meets the face with positive length."""
    for piece in pieces:
        if piece.is_plane:
            return True
        lo, hi = Scalar(0), Scalar(1)
        ok = True
        for ln in piece.lines():
            base = ln.eval_at(p)
            slope = ln.eval_at(v) - base
            if slope == 0:
                if base > 0:
                    ok = False
                    break
            else:
                t = Scalar(-base) / slope
                if slope > 0:
                    if t < hi:
                        hi = t
                else:
                    if t > lo:
                        lo = t
            if lo >= hi:
                ok = False
                break
        if ok and lo < hi and lo < 1:
            return True
    return False


def _vis_line(a: Point, b: Point, p: Point):
    return line_through(a, b), (VIS, p)


def _decompose_face(face: dict, owner_key) -> tuple:
    """Cut one face along sight lines from its owner; returns (range specs, slits).

    Each far corner v (the open segment from the owner into the face has
    positive length) contributes the cut; near corners, where the segment
    only touches, cut nothing.  Inside an owner's own cell this is a fan.
    """
    cid, p = owner_key
    pieces = face["pieces"]
    corners = _face_corners(face["chains"])
    far = [v for v in set(corners) if v != p and _segment_hits_face(p, v, pieces)]
    if not far:
        return [{"pieces": pieces, "tag": ("all",)}], []

    p_inside = any(contains(piece, p) for piece in pieces)
    dirs = _sorted_dirs(_prim_dir_between(p, v) for v in far)

    if p_inside and len(dirs) == 1:
        # a single sight segment does not split the face
        d = dirs[0]
        best = max(
            (v for v in far if _prim_dir_between(p, v) == d),
            key=lambda v: squared_distance(p, v),
        )
        return [{"pieces": pieces, "tag": ("all",)}], [(p, best)]

    specs = []
    if p_inside:
        m = len(dirs)
        for i in range(m):
            da, db = dirs[i], dirs[(i + 1) % m]
            cross = da[0] * db[1] - da[1] * db[0]
            dot = da[0] * db[0] + da[1] * db[1]
            cut_a = _vis_line(p, _pt_plus(p, da), p)
            cut_b = _vis_line(_pt_plus(p, db), p, p)
            got = []
            if cross > 0 or (cross == 0 and dot < 0):
                for piece in pieces:
                    r = _clip_by(piece, [cut_a, cut_b])
                    if not r.is_empty:
                        got.append(r)
            else:
                # wedge wider than a halfplane: peel the complement in two steps
                keep_b = _vis_line(p, _pt_plus(p, db), p)
                for piece in pieces:
                    r = _clip_by(piece, [cut_b])
                    if not r.is_empty:
                        got.append(r)
                for piece in pieces:
                    r = _clip_by(piece, [keep_b, cut_a])
                    if not r.is_empty:
                        got.append(r)
            if got:
                specs.append({"pieces": got, "tag": ("c", da, db)})
        return specs, []

    # owner outside the face: directions fit in a half-turn, but the sorted
    # cycle may wrap across the +x axis; restart it after the wide gap
    m = len(dirs)
    if m > 1:
        split = 0
        for i in range(m):
            da, db = dirs[i], dirs[(i + 1) % m]
            cross = da[0] * db[1] - da[1] * db[0]
            dot = da[0] * db[0] + da[1] * db[1]
            if cross < 0 or (cross == 0 and dot < 0):
                split = (i + 1) % m
                break
        dirs = dirs[split:] + dirs[:split]
    first = _vis_line(_pt_plus(p, dirs[0]), p, p)
    got = [r for piece in pieces if not (r := _clip_by(piece, [first])).is_empty]
    if got:
        specs.append({"pieces": got, "tag": ("lt", dirs[0])})
    for i in range(m - 1):
        da, db = dirs[i], dirs[i + 1]
        cut_a = _vis_line(p, _pt_plus(p, da), p)
        cut_b = _vis_line(_pt_plus(p, db), p, p)
        got = [r for piece in pieces if not (r := _clip_by(piece, [cut_a, cut_b])).is_empty]
        if got:
            specs.append({"pieces": got, "tag": ("mid", da, db)})
    last = _vis_line(p, _pt_plus(p, dirs[-1]), p)
    got = [r for piece in pieces if not (r := _clip_by(piece, [last])).is_empty]
    if got:
        specs.append({"pieces": got, "tag": ("gt", dirs[-1])})
    return specs, []


def visibility_decompose(face_pieces, owner_cluster_id: str, p: Point):
    """Public wrapper: ranges of one star-shaped face seen from its owner p.

    Returns a list of piece-lists, one per output range, each convex when
    bounded.  Accepts the face as disjoint convex pieces.
    """
    faces = _faces_from_pieces(list(face_pieces))
    if len(faces) != 1:
        raise PreconditionViolated("pieces do not form a single connected face")
    specs, slits = _decompose_face(faces[0], (owner_cluster_id, p))
    return [spec["pieces"] for spec in specs], slits


# ---------------------------------------------------------------------------
# owner rebuild and the edge index


def _register_face(H: Hvd, owner: OwnerState, data: dict) -> Face:
    fid = H._next_fid
    H._next_fid += 1
    face = Face(
        fid=fid,
        owner_key=owner.key,
        pieces=data["pieces"],
        boundary=data["boundary"],
        chains=data["chains"],
        corners=_face_corners(data["chains"]),
        key=data["key"],
    )
    H.faces[fid] = face
    owner.face_ids.append(fid)
    for e in face.boundary:
        ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
        H.edge_index.setdefault(ukey, {}).setdefault(fid, []).append((flipped, lo, hi))
    specs, slits = _decompose_face(data, owner.key)
    face.slits = slits
    for spec in specs:
        rid = H._next_rid
        H._next_rid += 1
        rng = Range(rid=rid, owner_key=owner.key, face_id=fid,
                    pieces=spec["pieces"], tag=spec["tag"])
        H.ranges[rid] = rng
        face.range_ids.append(rid)
    return face


def _drop_face(H: Hvd, owner: OwnerState, fid: int):
    face = H.faces.pop(fid)
    owner.face_ids.remove(fid)
    for e in face.boundary:
        ukey, _, _, _ = _canon_interval(e.line, e.t0, e.t1)
        slot = H.edge_index.get(ukey)
        if slot is not None:
            slot.pop(fid, None)
            if not slot:
                H.edge_index.pop(ukey, None)
    dropped = []
    for rid in face.range_ids:
        dropped.append(H.ranges.pop(rid))
    return face, dropped


def _rebuild_owner(H: Hvd, owner: OwnerState, outcome_sink=None):
    """Recompute the owner's faces from its pieces, reusing unchanged ones."""
    owner._bbox = None
    new_data = _faces_from_pieces(owner.pieces)
    old_by_key = {}
    for fid in list(owner.face_ids):
        old_by_key.setdefault(H.faces[fid].key, []).append(fid)
    created, deleted, dropped_ranges, made_ranges = [], [], [], []
    keep = set()
    for data in new_data:
        olds = old_by_key.get(data["key"])
        if olds:
            fid = olds.pop()
            keep.add(fid)
            # same boundary, same owner: the face and its ranges survive as-is
            face = H.faces[fid]
            face.pieces = data["pieces"]
            continue
        face = _register_face(H, owner, data)
        created.append(face)
        made_ranges.extend(H.ranges[rid] for rid in face.range_ids)
    for fid in list(owner.face_ids):
        if fid in keep or any(H.faces[fid] is f for f in created):
            continue
        face, dropped = _drop_face(H, owner, fid)
        deleted.append(face)
        dropped_ranges.extend(dropped)
    if outcome_sink is not None:
        outcome_sink["created_faces"].extend(created)
        outcome_sink["deleted_faces"].extend(deleted)
        outcome_sink["created_ranges"].extend(made_ranges)
        outcome_sink["deleted_ranges"].extend(dropped_ranges)


# ---------------------------------------------------------------------------
# conservative reject test, then exact carving


def _pieces_bbox(pieces):
    """Conservative float box (x0, x1, y0, y1) covering the pieces.

    Axes with no finite sample, or reached by a ray, extend to infinity.
    """
    if not pieces:
        return None
    xs, ys = [], []
    ext = [False, False, False, False]  # -x +x -y +y
    for piece in pieces:
        if piece.is_plane:
            return (-math.inf, math.inf, -math.inf, math.inf)
        for e in piece.edges():
            for t, at_start in ((e.t0, True), (e.t1, False)):
                if t is None:
                    dx, dy = e.inf_dir_start() if at_start else e.inf_dir_end()
                    ext[0] |= dx < 0
                    ext[1] |= dx > 0
                    ext[2] |= dy < 0
                    ext[3] |= dy > 0
                else:
                    q = line_point_at(e.line, t)
                    xs.append(float(q[0]))
                    ys.append(float(q[1]))
    spread = max(map(abs, xs + ys), default=0.0)
    pad = 1e-6 * (1.0 + spread)
    x0 = -math.inf if (ext[0] or not xs) else min(xs) - pad
    x1 = math.inf if (ext[1] or not xs) else max(xs) + pad
    y0 = -math.inf if (ext[2] or not ys) else min(ys) - pad
    y1 = math.inf if (ext[3] or not ys) else max(ys) + pad
    return (x0, x1, y0, y1)


def _owner_bbox(owner: OwnerState):
    if owner._bbox is None:
        owner._bbox = _pieces_bbox(owner.pieces) or "empty"
    return owner._bbox


def _bbox_may_touch(owner: OwnerState, C: Cluster) -> bool:
    """False only when no point of the owner's region can be beaten by C."""
    bb = _owner_bbox(owner)
    if bb == "empty":
        return False
    x0, x1, y0, y1 = bb
    if math.isinf(x0) or math.isinf(x1) or math.isinf(y0) or math.isinf(y1):
        return True
    p = owner.point
    px, py = float(p[0]), float(p[1])
    corners = ((x0, y0), (x0, y1), (x1, y0), (x1, y1))
    maxd_p = max(math.hypot(cx - px, cy - py) for cx, cy in corners) + 1e-7
    for c in C.hull:
        cx, cy = float(c[0]), float(c[1])
        dx = max(x0 - cx, 0.0, cx - x1)
        dy = max(y0 - cy, 0.0, cy - y1)
        mind_c = math.hypot(dx, dy) - 1e-7
        if maxd_p < mind_c:
            return False
    return True


def _face_touches_k(face: Face, K: ConvexRegion) -> bool:
    klines = [(e.line, e.label) for e in K.edges()] if not K.is_plane else []
    for piece in face.pieces:
        if not _clip_by(piece, klines).is_empty:
            return True
    return False


def _neighbor_faces(H: Hvd, face: Face):
    out = set()
    for e in face.boundary:
        ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
        slot = H.edge_index.get(ukey, {})
        for fid, rows in slot.items():
            if fid == face.fid:
                continue
            for side, a, b in rows:
                if side != flipped and _overlap(lo, hi, a, b) is not None:
                    out.add(fid)
                    break
    return out


def _discover_affected(H: Hvd, C: Cluster, seed_faces, k_cache, tested):
    """BFS over face adjacency from seed faces; exact overlap tests."""
    affected = set()
    queue = list(seed_faces)
    seen = set(queue)
    while queue:
        fid = queue.pop()
        face = H.faces.get(fid)
        if face is None:
            continue
        owner_key = face.owner_key
        if owner_key not in k_cache:
            k_cache[owner_key] = k_region(owner_key[1], C)
        K = k_cache[owner_key]
        tested[0] += 1
        if K.is_empty or not _face_touches_k(face, K):
            continue
        affected.add(fid)
        for nfid in _neighbor_faces(H, face):
            if nfid not in seen:
                seen.add(nfid)
                queue.append(nfid)
    return affected


def _affected_bruteforce(H: Hvd, C: Cluster, k_cache, tested):
    affected = set()
    for owner in H.owners.values():
        if owner.empty() or not _bbox_may_touch(owner, C):
            continue
        if owner.key not in k_cache:
            k_cache[owner.key] = k_region(owner.point, C)
        K = k_cache[owner.key]
        if K.is_empty:
            continue
        for fid in owner.face_ids:
            tested[0] += 1
            if _face_touches_k(H.faces[fid], K):
                affected.add(fid)
    return affected


# ---------------------------------------------------------------------------
# insertion


def _cell_lines(C: Cluster, c: Point):
    return [(bisector_line(q, c), (SKEL, q)) for q in C.hull if q != c]


def _install_first(H: Hvd, C: Cluster, sink):
    for c in C.hull:
        owner = OwnerState(C.id, c, singleton=len(C.hull) == 1)
        if owner.singleton:
            owner.pieces = [plane()]
        else:
            cl = _cell_lines(C, c)
            cell = from_halfplanes([ln for ln, _ in cl], [lab for _, lab in cl])
            if cell.is_empty:
                raise DegenerateInput("hull point with empty farthest cell", c)
            owner.pieces = [cell]
        H.owners[owner.key] = owner
        _rebuild_owner(H, owner, sink)


def insert_cluster(H: Hvd, C: Cluster, seed_ranges=None, debug: bool = False) -> InsertionOutcome:
    """Carve the region of C out of the current diagram.

    `seed_ranges` (range ids) localizes the search for overwritten faces; a
    construction algorithm must provide at least one seed per face of the new
    region.  Without seeds every owner is scanned, which is always sound.
    """
    if C.id in set(H.inserted):
        raise PreconditionViolated(f"cluster {C.id} already inserted")
    sink = {"created_faces": [], "deleted_faces": [],
            "created_ranges": [], "deleted_ranges": []}
    H.version += 1
    H._locator = None
    H._final = None
    if C.id not in H.fvds:
        H.fvds[C.id] = build_fvd(C)

    if not H.inserted:
        _install_first(H, C, sink)
        H.inserted.append(C.id)
        out = InsertionOutcome(C.id, [], [], sink["created_ranges"], [],
                               sink["created_faces"], False, 0)
        _count(H, sink, 0)
        return out

    k_cache = {}
    tested = [0]
    if seed_ranges is None:
        affected = _affected_bruteforce(H, C, k_cache, tested)
    else:
        seeds = {H.ranges[rid].face_id for rid in seed_ranges if rid in H.ranges}
        affected = _discover_affected(H, C, seeds, k_cache, tested)
        if debug:
            brute = _affected_bruteforce(H, C, dict(), [0])
            if affected != brute:
                raise AssertionError(
                    f"seeded discovery missed faces: {sorted(brute - affected)}")

    by_owner = {}
    for fid in affected:
        by_owner.setdefault(H.faces[fid].owner_key, set()).add(fid)
    affected_owners = sorted(by_owner, key=lambda k: (k[0], k[1]))

    stolen = []  # (piece, src_owner_key)
    for key in affected_owners:
        owner = H.owners[key]
        K = k_cache[key]
        klines = [(e.line, e.label) for e in K.edges()]
        remnants = []
        hit = by_owner[key]
        for fid in owner.face_ids:
            face = H.faces[fid]
            if fid not in hit:
                # untouched face: keep its pieces as they are
                remnants.extend(face.pieces)
                continue
            for piece in face.pieces:
                inside, outs = _split_piece(piece, klines)
                if not inside.is_empty:
                    stolen.append((_relabel_stolen(inside, C.id, key), key))
                remnants.extend(outs)
        owner.pieces = remnants
        _rebuild_owner(H, owner, sink)

    for c in C.hull:
        owner = OwnerState(C.id, c, singleton=len(C.hull) == 1)
        lines = _cell_lines(C, c)
        for piece, _src in stolen:
            part = _clip_by(piece, lines)
            if not part.is_empty:
                owner.pieces.append(part)
        H.owners[owner.key] = owner
        _rebuild_owner(H, owner, sink)

    H.inserted.append(C.id)
    out = InsertionOutcome(
        C.id,
        affected_owners,
        sink["deleted_ranges"],
        sink["created_ranges"],
        sink["deleted_faces"],
        sink["created_faces"],
        not stolen,
        tested[0],
    )
    _count(H, sink, tested[0])
    if debug:
        check_region_skeletons(H)
    return out


def _count(H: Hvd, sink, tested):
    c = H.counters
    c.insertions += 1
    c.created_ranges += len(sink["created_ranges"])
    c.deleted_ranges += len(sink["deleted_ranges"])
    c.created_faces += len(sink["created_faces"])
    c.deleted_faces += len(sink["deleted_faces"])
    c.face_tests += tested
    c.per_insertion.append({
        "created_ranges": len(sink["created_ranges"]),
        "deleted_ranges": len(sink["deleted_ranges"]),
        "tested": tested,
    })


def trace_region_boundary(H: Hvd, C: Cluster, start: Point, debug: bool = False):
    """Insert C by tracing from a point on its new region's boundary.

    Returns the created faces owned by C.  Only the region component
    reachable from `start` is discovered by the trace; callers inserting a
    cluster whose region may disconnect must seed every component.
    """
    if not H.inserted:
        raise PreconditionViolated("nothing inserted yet; use insert_cluster")
    dC = hausdorff_distance_sq(start, C)
    best = min(hausdorff_distance_sq(start, H.cluster(cid)) for cid in H.inserted)
    if dC != best:
        raise PreconditionViolated("start point is not on the new region boundary")
    seeds = [r.rid for r in H.ranges.values()
             if any(contains(piece, start) for piece in r.pieces)]
    if not seeds:
        raise PreconditionViolated("start point lies in no current range")
    out = insert_cluster(H, C, seed_ranges=seeds, debug=debug)
    return [f for f in out.created_faces if f.owner_key[0] == C.id]


# ---------------------------------------------------------------------------
# point location


def _range_bbox(rng: Range):
    bb = _pieces_bbox(rng.pieces)
    if bb is None:
        return (-math.inf, math.inf, -math.inf, math.inf)
    return bb


class _Locator:
    def __init__(self, H: Hvd):
        self.version = H.version
        self.rows = []
        for rng in H.ranges.values():
            self.rows.append((_range_bbox(rng), rng))

    def candidates(self, q: Point):
        x, y = float(q[0]), float(q[1])
        for (x0, x1, y0, y1), rng in self.rows:
            if x0 <= x <= x1 and y0 <= y <= y1:
                yield rng


def point_locate(H: Hvd, q: Point):
    """(cluster id, owner point, range) whose closure holds q.

    Exact: the float boxes only preselect candidates.  A point on any edge
    of the subdivision raises TieOnBoundary.
    """
    if not H.inserted:
        raise PreconditionViolated("empty diagram")
    if H._locator is None or H._locator.version != H.version:
        H._locator = _Locator(H)
    hits = []
    for rng in H._locator.candidates(q):
        if any(contains(piece, q) for piece in rng.pieces):
            hits.append(rng)
            if len(hits) > 1:
                break
    if not hits:  # float preselection can only over-approximate; rescan to be sure
        for rng in H.ranges.values():
            if any(contains(piece, q) for piece in rng.pieces):
                hits.append(rng)
                if len(hits) > 1:
                    break
    if not hits:
        raise PreconditionViolated(f"point {q} in no range; diagram incomplete")
    if len(hits) > 1:
        raise TieOnBoundary("point lies on a subdivision edge", q)
    rng = hits[0]
    face = H.faces[rng.face_id]
    for p, v in face.slits:
        ln = line_through(p, v)
        if ln.eval_at(q) == 0:
            ta, tb = sorted((line_param_of(ln, p), line_param_of(ln, v)))
            tq = line_param_of(ln, q)
            if ta <= tq <= tb:
                raise TieOnBoundary("point lies on a sight-line edge", q)
    cid, p = rng.owner_key
    return cid, p, rng


def locate_at_infinity(H: Hvd, origin: Point, d):
    """The range that far points of the ray origin + t*d settle into."""
    hits = []
    for rng in H.ranges.values():
        if any(_ray_eventually_inside(piece, origin, d) for piece in rng.pieces):
            hits.append(rng)
    if not hits:
        raise PreconditionViolated("ray escapes every range")
    strict = []
    for rng in hits:
        for piece in rng.pieces:
            if piece.is_plane:
                strict.append(rng)
                break
            ok = all(
                ln.eval_dir(d[0], d[1]) < 0
                or (ln.eval_dir(d[0], d[1]) == 0 and ln.eval_at(origin) < 0)
                for ln in piece.lines()
            )
            if ok and _ray_eventually_inside(piece, origin, d):
                strict.append(rng)
                break
    if len(strict) == 1:
        return strict[0]
    if len(hits) == 1:
        return hits[0]
    raise DegenerateInput("ray at infinity lies on a diagram edge", (origin, d))


def locate_in_owner(H: Hvd, owner_key, y: Point):
    """Range of one owner containing y, by angular bisection around the owner.

    Falls back to a linear check when y sits on a cut or the face has no
    angular structure.
    """
    cid, p = owner_key
    owner = H.owners.get(owner_key)
    if owner is None:
        return None
    if y != p:
        dy = _prim_dir_between(p, y)
    else:
        dy = None
    for fid in owner.face_ids:
        face = H.faces[fid]
        tags = [(H.ranges[rid].tag, rid) for rid in face.range_ids]
        ordered = [t for t in tags if t[0][0] == "mid"]
        if dy is not None and ordered:
            lo, hi = 0, len(ordered)
            while lo < hi:
                midi = (lo + hi) // 2
                da = ordered[midi][0][1]
                if _ang_cmp(dy, da) < 0:
                    hi = midi
                else:
                    lo = midi + 1
            order_hint = [ordered[i][1] for i in (max(lo - 1, 0), min(lo, len(ordered) - 1))]
        else:
            order_hint = []
        for rid in order_hint + [t[1] for t in tags]:
            rng = H.ranges[rid]
            if any(contains(piece, y) for piece in rng.pieces):
                return rng
    return None


# ---------------------------------------------------------------------------
# finalized view: split edges, vertices with kinds, Euler, stats, bytes


@dataclass
class FinalEdge:
    ukey: tuple
    lo: object
    hi: object
    sides: list  # owner keys (cluster_id, point), one or two, sorted
    kind: str  # "skel" | "bh" | "vis"

    def endpoints(self):
        line = _line_from_ukey(self.ukey)
        a = ("inf", _neg_dir(line)) if self.lo is None else ("v", line_point_at(line, self.lo))
        b = ("inf", _pos_dir(line)) if self.hi is None else ("v", line_point_at(line, self.hi))
        return a, b


def _line_from_ukey(ukey):
    from .chains import Line

    return Line(*ukey)


def _pos_dir(line):
    return primitive_dir(*line.direction())


def _neg_dir(line):
    dx, dy = line.direction()
    return primitive_dir(-dx, -dy)


@dataclass
class Finalized:
    version: int
    vertices: list  # sorted Points
    vertex_kinds: list  # parallel VertexKind list
    edges: list  # FinalEdge
    euler_ok: bool
    v_index: dict
    range_boundaries: dict = field(default_factory=dict)  # rid -> fragments


@dataclass
class DiagramStats:
    vertices_by_kind: dict
    edges: int
    faces: int
    ranges: int
    m_observed: int
    per_region_faces: dict
    empty_clusters: list
    total: int


def _range_boundary(rng: Range):
    """Outer boundary fragments of one range (internal seams cancelled)."""
    faces = _faces_from_pieces(rng.pieces)
    out = []
    for f in faces:
        out.extend(f["boundary"])
    return out


def finalize(H: Hvd) -> Finalized:
    """Split edges at all vertices, classify vertices, check Euler's formula."""
    if H._final is not None and H._final.version == H.version:
        return H._final
    bcache = {}
    rows = {}  # ukey -> list of (side, lo, hi, owner_key, label)
    for rng in H.ranges.values():
        bcache[rng.rid] = _range_boundary(rng)
        for e in bcache[rng.rid]:
            ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
            rows.setdefault(ukey, []).append((flipped, lo, hi, rng.owner_key, e.label))
    for face in H.faces.values():
        for p, v in face.slits:
            ln = line_through(p, v)
            ukey, flipped, lo, hi = _canon_interval(
                ln, *sorted((line_param_of(ln, p), line_param_of(ln, v))))
            rows.setdefault(ukey, []).append((flipped, lo, hi, face.owner_key, (VIS, p)))
            rows.setdefault(ukey, []).append((not flipped, lo, hi, face.owner_key, (VIS, p)))

    edges = []
    for ukey, entries in sorted(rows.items()):
        params = set()
        for _, lo, hi, _, _ in entries:
            if lo is not None:
                params.add(lo)
            if hi is not None:
                params.add(hi)
        cuts = sorted(params)
        pieces = {}
        for side, lo, hi, owner_key, label in entries:
            marks = [t for t in cuts if (lo is None or t > lo) and (hi is None or t < hi)]
            bounds = [lo] + marks + [hi]
            for a, b in zip(bounds[:-1], bounds[1:]):
                if a is not None and b is not None and a >= b:
                    continue
                pieces.setdefault((_lob(a), _hib(b)), []).append((owner_key, label))
        for (la, hb), sides in sorted(pieces.items()):
            lo, hi = _unb(la), _unb(hb)
            owners = {ok for ok, _ in sides}
            labels = [lab for _, lab in sides]
            if any(isinstance(l, tuple) and l and l[0] == VIS for l in labels):
                kind = VIS
            else:
                cids = {ok[0] for ok in owners}
                kind = SKEL if len(cids) == 1 else BH
            edges.append(FinalEdge(ukey, lo, hi, sorted(owners, key=_owner_sort), kind))

    has_ray = False
    incid = {}
    for fe in edges:
        a, b = fe.endpoints()
        for tok in (a, b):
            if tok[0] == "inf":
                has_ray = True
            else:
                incid.setdefault(tok[1], set()).update(fe.sides)
    vertices = sorted(incid.keys())
    v_index = {p: i for i, p in enumerate(vertices)}
    kinds = []
    for p in vertices:
        owners = incid[p]
        defining = [(H.cluster(cid), pt) for cid, pt in owners]
        kinds.append(classify_vertex(p, defining))

    V = len(vertices) + (1 if has_ray else 0)
    E = len(edges)
    F = len(H.ranges)
    euler_ok = (V - E + F == 2) if E else (len(vertices) == 0 and F <= 1)

    fin = Finalized(H.version, vertices, kinds, edges, euler_ok, v_index, bcache)
    H._final = fin
    _fill_defining(H, fin)
    return fin


def _owner_sort(ok):
    return (ok[0], ok[1][0], ok[1][1])


def _fill_defining(H: Hvd, fin: Finalized):
    for rng in H.ranges.values():
        mine = set()
        for e in fin.range_boundaries.get(rng.rid, ()):
            lab = e.label
            if isinstance(lab, tuple) and lab and lab[0] == BH:
                mine.add(lab[1])
        rng.defining = frozenset(mine)


def cluster_face_components(H: Hvd, cid: str):
    """Faces of one cluster glued across its own skeleton; list of face-id sets."""
    owner_faces = [fid for st in H.owner_states(cid) for fid in st.face_ids]
    if not owner_faces:
        return []
    idx = {fid: i for i, fid in enumerate(owner_faces)}
    uf = _UF(len(owner_faces))
    glue = {i: [] for i in range(len(owner_faces))}
    for fid in owner_faces:
        face = H.faces[fid]
        for e in face.boundary:
            lab = e.label
            if not (isinstance(lab, tuple) and lab and lab[0] == SKEL):
                continue
            ukey, flipped, lo, hi = _canon_interval(e.line, e.t0, e.t1)
            for ofid, rows in H.edge_index.get(ukey, {}).items():
                if ofid == fid or ofid not in idx:
                    continue
                if H.faces[ofid].owner_key[0] != cid:
                    continue
                for side, a, b in rows:
                    if side != flipped:
                        ov = _overlap(lo, hi, a, b)
                        if ov is not None:
                            uf.union(idx[fid], idx[ofid])
                            glue[idx[fid]].append((ukey, ov))
    comps = {}
    for fid in owner_faces:
        comps.setdefault(uf.find(idx[fid]), []).append(fid)
    out = []
    for root, members in comps.items():
        segs = []
        for fid in members:
            segs.extend(glue[idx[fid]])
        out.append({"faces": set(members), "glue": segs})
    return out


def check_region_skeletons(H: Hvd):
    """Every face of every nonempty region meets its cluster's skeleton in one piece.

    Raises AssertionError with a witness on the first violation.  Intended
    for debug runs after each insertion.
    """
    for cid in H.inserted:
        cluster = H.cluster(cid)
        comps = cluster_face_components(H, cid)
        if len(cluster.hull) == 1:
            p = cluster.hull[0]
            for comp in comps:
                ok = any(
                    contains(piece, p)
                    for fid in comp["faces"]
                    for piece in H.faces[fid].pieces
                )
                assert ok, f"singleton {cid}: a face avoids its own site {p}"
            continue
        for comp in comps:
            if len(comp["faces"]) == 1 and not comp["glue"]:
                fid = next(iter(comp["faces"]))
                raise AssertionError(
                    f"region face of {cid} (face {fid}) misses the cluster skeleton")
            segs = comp["glue"]
            if not segs:
                continue
            # connectivity of the glue intervals through shared endpoints
            pts = []
            for ukey, (a, b) in segs:
                line = _line_from_ukey(ukey)
                pa = None if a is None else line_point_at(line, a)
                pb = None if b is None else line_point_at(line, b)
                pts.append((pa, pb))
            n = len(segs)
            uf = _UF(n)
            for i in range(n):
                for j in range(i + 1, n):
                    if segs[i][0] == segs[j][0]:
                        ov = _overlap(segs[i][1][0], segs[i][1][1],
                                      segs[j][1][0], segs[j][1][1])
                        if ov is not None or _touching(segs[i][1], segs[j][1]):
                            uf.union(i, j)
                            continue
                    ends_i = {p for p in pts[i] if p is not None}
                    ends_j = {p for p in pts[j] if p is not None}
                    if ends_i & ends_j:
                        uf.union(i, j)
            roots = {uf.find(i) for i in range(n)}
            assert len(roots) == 1, (
                f"region face of {cid} meets its skeleton in {len(roots)} components")


def _touching(iv1, iv2):
    a1, b1 = iv1
    a2, b2 = iv2
    return (b1 is not None and a2 is not None and b1 == a2) or \
        (b2 is not None and a1 is not None and b2 == a1)


def stats(H: Hvd) -> DiagramStats:
    fin = finalize(H)
    by_kind = {"pure": 0, "mixed": 0, "farthest": 0, "visibility": 0}
    m = 0
    for k in fin.vertex_kinds:
        by_kind[k.kind] += 1
        if k.kind == "mixed" and k.crossing:
            m += 1
    per_region = {}
    for cid in H.inserted:
        per_region[cid] = len(cluster_face_components(H, cid))
    empties = sorted(cid for cid in H.inserted if H.region_empty(cid))
    total = len(fin.vertices) + len(fin.edges) + len(H.ranges)
    return DiagramStats(
        vertices_by_kind=by_kind,
        edges=len(fin.edges),
        faces=len(H.faces),
        ranges=len(H.ranges),
        m_observed=m,
        per_region_faces=per_region,
        empty_clusters=empties,
        total=total,
    )


def canonical_serialize(H: Hvd) -> bytes:
    """Deterministic text form; identical for any insertion order of one set."""
    from .geom import format_scalar as fs

    fin = finalize(H) if H.inserted else None
    out = ["hvd-diagram v1"]
    out.append(f"clusters {len(H.inserted)}")
    for cid in sorted(H.inserted):
        cluster = H.cluster(cid)
        mark = " empty" if H.region_empty(cid) else ""
        out.append(f"cluster {cid} {len(cluster.hull)}{mark}")
    if fin is None:
        out.append("vertices 0")
        out.append("edges 0")
        out.append("ranges 0")
        return ("\n".join(out) + "\n").encode()

    out.append(f"vertices {len(fin.vertices)}")
    for i, p in enumerate(fin.vertices):
        out.append(f"v {i} {fs(p[0])} {fs(p[1])} {fin.vertex_kinds[i].text()}")

    def tok(t):
        if t[0] == "v":
            return (0, fin.v_index[t[1]], "", "")
        d = t[1]
        return (1, 0, f"{d[0]}/{d[1]}", "")

    def tok_text(t):
        if t[0] == "v":
            return str(fin.v_index[t[1]])
        return f"inf {t[1][0]}/{t[1][1]}"

    erows = []
    for fe in fin.edges:
        a, b = fe.endpoints()
        if tok(b) < tok(a):
            a, b = b, a
        owners = " ".join(
            f"{ok[0]}:{fs(ok[1][0])},{fs(ok[1][1])}" for ok in fe.sides)
        erows.append((tok(a), tok(b), fe.kind, owners,
                      f"e {tok_text(a)} {tok_text(b)} {fe.kind} {owners}"))
    erows.sort()
    out.append(f"edges {len(erows)}")
    out.extend(r[4] for r in erows)

    rrows = []
    for rng in H.ranges.values():
        ids = set()
        infs = set()
        for e in fin.range_boundaries.get(rng.rid) or _range_boundary(rng):
            for q, t in ((e.start(), e.t0), (e.end(), e.t1)):
                if q is not None:
                    if q in fin.v_index:
                        ids.add(fin.v_index[q])
            if e.t0 is None:
                infs.add(e.inf_dir_start())
            if e.t1 is None:
                infs.add(e.inf_dir_end())
        cid, p = rng.owner_key
        body = " ".join(str(i) for i in sorted(ids))
        inf_body = " ".join(f"inf {d[0]}/{d[1]}" for d in sorted(infs))
        parts = [x for x in (body, inf_body) if x]
        rrows.append((cid, fs(p[0]), fs(p[1]), " ".join(parts)))
    rrows.sort()
    out.append(f"ranges {len(rrows)}")
    out.extend(f"r {cid} {px} {py} {rest}".rstrip() for cid, px, py, rest in rrows)
    return ("\n".join(out) + "\n").encode()
