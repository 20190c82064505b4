"""Farthest-point Voronoi diagram of a single cluster.

The skeleton is a tree (a line for two sites, a point for one); every hull
point owns one unbounded convex region.  A centroid decomposition of the
skeleton seeds the walk-based queries.  Everything here is exact rational
and immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .chains import (
    BEdge,
    ConvexRegion,
    bisector_line,
    from_halfplanes,
    primitive_dir,
)
from .cluster import Cluster, farthest_witnesses, hausdorff_distance_sq, make_cluster
from .errors import DegenerateInput, PreconditionViolated, TieOnBoundary
from .geom import Point, Scalar, squared_distance

__all__ = [
    "Fvd",
    "SkelEdge",
    "RootRef",
    "pick_skeleton_root",
    "CentroidNode",
    "CentroidTree",
    "BisectorChain",
    "region_where_farthest",
    "build_fvd",
    "build_centroid_tree",
    "centroid_depth",
    "farthest_point_query",
    "farthest_point_scan",
    "segment_query",
    "segment_query_scan",
    "bisector_point_cluster",
]


class SkelEdge(NamedTuple):
    seg: BEdge
    owners: tuple  # (Point, Point), lexicographically sorted


class RootRef(NamedTuple):
    """One unbounded end of a skeleton edge, the symbolic root at infinity."""

    edge: int
    end: int  # 0 = the t0 side, 1 = the t1 side


@dataclass(frozen=True, eq=False)
class Fvd:
    cluster: Cluster
    regions: dict  # hull Point -> ConvexRegion where that point is farthest
    edges: tuple  # SkelEdge
    vertices: tuple  # finite skeleton vertices; the site itself for |C| = 1
    adjacency: dict  # vertex Point -> tuple of incident edge indices
    root: Optional[RootRef]

    def root_direction(self):
        if self.root is None:
            return None
        se = self.edges[self.root.edge]
        return se.seg.inf_dir_start() if self.root.end == 0 else se.seg.inf_dir_end()


def region_where_farthest(p: Point, others) -> ConvexRegion:
    """Locus where p is at least as far away as every point of `others`.

    This is the farthest-point region of p in the diagram of {p} plus the
    others; empty iff p is not a vertex of the joint convex hull.  Edge
    labels name the contesting point across each boundary piece.
    """
    lines, labels = [], []
    for q in others:
        if q == p:
            raise PreconditionViolated("point listed among its own rivals")
        lines.append(bisector_line(q, p))
        labels.append(q)
    return from_halfplanes(lines, labels)


def build_fvd(cluster: Cluster, require_general_position: bool = True) -> Fvd:
    """Exact farthest-point diagram of the cluster's hull.

    A skeleton vertex of degree above three means four sites lie on a
    common circle; that is rejected by default.  Passing
    require_general_position=False keeps the (still exact) diagram with
    the higher-degree vertex instead.
    """
    hull = cluster.hull
    if len(hull) == 1:
        c = hull[0]
        return Fvd(cluster, {c: ConvexRegion(is_plane=True)}, (), (c,), {}, None)

    regions = {}
    for c in hull:
        reg = region_where_farthest(c, [q for q in hull if q != c])
        if reg.is_empty:
            raise DegenerateInput("farthest region vanished", (c,))
        regions[c] = reg

    edges = []
    for c in hull:
        for e in regions[c].edges():
            q = e.label
            if c < q:
                edges.append(SkelEdge(e, (c, q)))

    degree = {}
    for se in edges:
        for endpoint in (se.seg.start(), se.seg.end()):
            if endpoint is not None:
                degree[endpoint] = degree.get(endpoint, 0) + 1
    if require_general_position:
        for vtx, deg in degree.items():
            if deg != 3:
                owners = sorted({o for se in edges for o in se.owners
                                 if vtx in (se.seg.start(), se.seg.end())})
                raise DegenerateInput(
                    "cocircular sites: skeleton vertex of degree %d" % deg,
                    tuple(owners))

    verts = tuple(sorted(degree))
    adjacency = {v: tuple(i for i, se in enumerate(edges)
                          if v in (se.seg.start(), se.seg.end()))
                 for v in verts}
    return Fvd(cluster, regions, tuple(edges), verts, adjacency,
               pick_skeleton_root(edges))


def pick_skeleton_root(edges) -> Optional[RootRef]:
    best = None
    for i, se in enumerate(edges):
        ends = []
        if se.seg.t0 is None:
            ends.append((se.seg.inf_dir_start(), 0))
        if se.seg.t1 is None:
            ends.append((se.seg.inf_dir_end(), 1))
        for d, end in ends:
            key = (se.owners, tuple(d))
            if best is None or key < best[0]:
                best = (key, RootRef(i, end))
    return None if best is None else best[1]


# -- centroid decomposition ------------------------------------------------


class CentroidNode(NamedTuple):
    vertex: Point
    children: tuple


@dataclass(frozen=True)
class CentroidTree:
    root: Optional[CentroidNode]


def build_centroid_tree(fvd: Fvd) -> CentroidTree:
    if len(fvd.cluster.hull) < 2:
        raise PreconditionViolated("centroid tree needs at least two sites")
    adj = {v: [] for v in fvd.vertices}
    for se in fvd.edges:
        a, b = se.seg.start(), se.seg.end()
        if a is not None and b is not None:
            adj[a].append(b)
            adj[b].append(a)
    return CentroidTree(decompose_tree(list(fvd.vertices), adj))


def decompose_tree(verts, adj) -> Optional[CentroidNode]:
    """Centroid decomposition of the subtree induced by `verts`.

    Works on any abstract tree given as vertex list + adjacency mapping.
    """
    if not verts:
        return None
    vs = set(verts)
    order, parent = _dfs(sorted(vs)[0], adj, vs)
    size = {v: 1 for v in vs}
    for v in reversed(order[1:]):
        size[parent[v]] += size[v]
    n = len(vs)
    centroid = None
    for v in sorted(vs):
        worst = n - size[v]
        for u in adj[v]:
            if u in vs and parent.get(u) == v:
                worst = max(worst, size[u])
        if 2 * worst <= n:
            centroid = v
            break
    assert centroid is not None
    children = []
    for u in sorted(adj[centroid]):
        if u in vs:
            comp = _component(u, centroid, adj, vs)
            children.append(decompose_tree(comp, adj))
    return CentroidNode(centroid, tuple(children))


def _dfs(root, adj, vs):
    order, parent, stack = [], {}, [root]
    seen = {root}
    while stack:
        v = stack.pop()
        order.append(v)
        for u in adj[v]:
            if u in vs and u not in seen:
                seen.add(u)
                parent[u] = v
                stack.append(u)
    return order, parent


def _component(start, removed, adj, vs):
    comp, stack, seen = [], [start], {start, removed}
    while stack:
        v = stack.pop()
        comp.append(v)
        for u in adj[v]:
            if u in vs and u not in seen:
                seen.add(u)
                stack.append(u)
    return comp


def centroid_depth(tree: CentroidTree) -> int:
    def go(node):
        if node is None:
            return 0
        return 1 + max((go(ch) for ch in node.children), default=0)

    return go(tree.root)


# -- point queries ---------------------------------------------------------


def _seed_owner(fvd: Fvd, ctree: Optional[CentroidTree]):
    if ctree is not None and ctree.root is not None:
        eid = fvd.adjacency[ctree.root.vertex][0]
        return fvd.edges[eid].owners[0]
    return fvd.cluster.hull[0]


def farthest_point_query(fvd: Fvd, ctree: Optional[CentroidTree], t: Point,
                         strict: bool = True):
    """Owner hull point farthest from t, plus the squared distance.

    Walks the diagram cells from a centroid-seeded start; the distance to
    the current owner strictly increases, so the walk ends in at most one
    step per hull point.  Exact tie on a cell boundary raises
    TieOnBoundary when a strict owner is required.
    """
    hull = fvd.cluster.hull
    if len(hull) == 1:
        return hull[0], squared_distance(t, hull[0])
    cur = _seed_owner(fvd, ctree)
    for _ in range(len(hull) + 1):
        reg = fvd.regions[cur]
        worst_val = None
        worst_label = None
        ties = set()
        for e in reg.edges():
            v = e.line.eval_at(t)
            if v > 0 and (worst_val is None or v > worst_val):
                worst_val, worst_label = v, e.label
            elif v == 0:
                ties.add(e.label)
        if worst_label is None:
            d = squared_distance(t, cur)
            if ties:
                if strict:
                    raise TieOnBoundary("farthest owner tied",
                                        (t, cur) + tuple(sorted(ties)))
                return min({cur} | ties), d
            return cur, d
        cur = worst_label
    raise PreconditionViolated("cell walk failed to settle")


def farthest_point_scan(cluster, t: Point, strict: bool = True):
    """Linear argmax over the hull; reference twin of the walk query."""
    ws = farthest_witnesses(t, cluster)
    d = hausdorff_distance_sq(t, cluster)
    if len(ws) > 1 and strict:
        raise TieOnBoundary("farthest owner tied", (t,) + tuple(sorted(ws)))
    return min(ws), d


def _edge_owner_pair(u: Point, v: Point, C: Cluster):
    """Owner pair of the skeleton edge of C that carries segment uv."""
    if len(C.hull) == 1:
        # one-point cluster: the whole plane is its only cell
        return C.hull[0], C.hull[0]
    wu = set(farthest_witnesses(u, C))
    wv = set(farthest_witnesses(v, C))
    common = wu & wv
    mid = Point((u.x + v.x) / 2, (u.y + v.y) / 2)
    common &= set(farthest_witnesses(mid, C))
    if len(common) < 2:
        raise PreconditionViolated(
            "segment does not lie on a single skeleton edge of the cluster")
    pair = sorted(common)
    return pair[0], pair[1]


def _affine_gap(u: Point, w, p: Point, c: Point):
    """d(x(t),p)^2 - d(x(t),c)^2 along x(t) = u + t*w as (A, B): A + B*t."""
    a = squared_distance(u, p) - squared_distance(u, c)
    b = 2 * (w[0] * (c.x - p.x) + w[1] * (c.y - p.y))
    return a, b


def _check_segment_pre(u, v, P, C):
    if not (hausdorff_distance_sq(u, C) < hausdorff_distance_sq(u, P)):
        raise PreconditionViolated("segment start is not on the cluster side")
    if not (hausdorff_distance_sq(v, C) > hausdorff_distance_sq(v, P)):
        raise PreconditionViolated("segment end is not on the rival side")


def segment_query(fvd_p: Fvd, ctree: Optional[CentroidTree], u: Point,
                  v: Point, C: Cluster) -> Point:
    """Point on uv equidistant (in the farthest sense) from P and C.

    uv must lie on one skeleton edge of C, with C strictly closer at u and
    strictly farther at v.  The squared-distance gap along uv is convex
    piecewise linear, so walking the cells of P's diagram along uv meets
    exactly one sign change; the crossing solves a linear equation.
    """
    P = fvd_p.cluster
    _check_segment_pre(u, v, P, C)
    ci, _ = _edge_owner_pair(u, v, C)
    w = (v.x - u.x, v.y - u.y)

    # owner at u, tie-broken toward the cell entered for t > 0
    cur = None
    cur_key = None
    for p in P.hull:
        key = (squared_distance(u, p), -(w[0] * p.x + w[1] * p.y))
        if cur_key is None or key > cur_key:
            cur, cur_key = p, key

    t_cur = Scalar(0)
    prev = None
    for _ in range(len(P.hull) + 2):
        a, b = _affine_gap(u, w, cur, ci)
        t_exit, nxt = None, None
        for e in fvd_p.regions[cur].edges():
            alpha = e.line.eval_dir(*w)
            if alpha <= 0:
                continue
            bound = -Scalar(e.line.eval_at(u)) / alpha
            if bound < t_cur or (bound == t_cur and e.label == prev):
                continue
            if t_exit is None or bound < t_exit:
                t_exit, nxt = bound, e.label
        t_stop = Scalar(1) if t_exit is None else min(t_exit, Scalar(1))
        if a + b * t_stop <= 0:
            t_star = -Scalar(a) / b
            return Point(u.x + t_star * w[0], u.y + t_star * w[1])
        if t_stop == 1:
            break
        t_cur, prev, cur = t_exit, cur, nxt
    raise PreconditionViolated("no equidistant point found on the segment")


def segment_query_scan(P: Cluster, u: Point, v: Point, C: Cluster) -> Point:
    """Breakpoint-enumeration twin of segment_query, structure-free.

    Collects every parameter where the farthest owner of P can change,
    finds the sign flip of the distance gap between consecutive
    breakpoints, then solves the linear equation on that piece.
    """
    _check_segment_pre(u, v, P, C)
    ci, _ = _edge_owner_pair(u, v, C)
    w = (v.x - u.x, v.y - u.y)
    hull = P.hull

    ts = {Scalar(0), Scalar(1)}
    for i, p in enumerate(hull):
        for q in hull[i + 1:]:
            a, b = _affine_gap(u, w, p, q)
            if b != 0:
                t = -Scalar(a) / b
                if 0 < t < 1:
                    ts.add(t)
    ts = sorted(ts)

    def gap(t):
        x = Point(u.x + t * w[0], u.y + t * w[1])
        return hausdorff_distance_sq(x, P) - hausdorff_distance_sq(x, C)

    lo = ts[0]
    for t in ts[1:]:
        g = gap(t)
        if g <= 0:
            if g == 0:
                return Point(u.x + t * w[0], u.y + t * w[1])
            tm = (lo + t) / 2
            x = Point(u.x + tm * w[0], u.y + tm * w[1])
            owner = max(hull, key=lambda p: squared_distance(x, p))
            a, b = _affine_gap(u, w, owner, ci)
            t_star = -Scalar(a) / b
            return Point(u.x + t_star * w[0], u.y + t_star * w[1])
        lo = t
    raise PreconditionViolated("no equidistant point found on the segment")


# -- point-vs-cluster bisector ---------------------------------------------


class BisectorChain(NamedTuple):
    """Oriented convex chain where d(., p) equals the cluster distance.

    The side where p is the farthest lies to the left of the edges.  When
    p falls inside the rival hull no such locus exists and `empty` is set.
    """

    edges: tuple
    vertices: tuple
    empty: bool


def bisector_point_cluster(p: Point, Q: Cluster) -> BisectorChain:
    if p in Q.hull:
        raise PreconditionViolated("point belongs to the cluster")
    merged = make_cluster("~merge", (p,) + Q.hull)
    if p not in merged.hull:
        return BisectorChain((), (), True)
    f = build_fvd(merged)
    reg = f.regions[p]
    chains = reg.chains
    if len(chains) != 1 or chains[0].closed:
        raise DegenerateInput("bisector is not a single open chain", (p,))
    edges = tuple(chains[0].edges)
    verts = tuple(e.end() for e in edges[:-1])
    return BisectorChain(edges, verts, False)
