"""Brute-force reference implementations.

Everything here is deliberately slow and auditable.  The farthest diagram
is rebuilt from pairwise bisector intervals, not by polygon clipping, so a
differential test against the fast builders exercises two unrelated code
paths.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .chains import BEdge, Chain, ConvexRegion, bisector_line, line_param_of
from .cluster import (
    Cluster,
    ClusterFamily,
    hausdorff_distance_sq,
    is_crossing_mixed_vertex,
    make_cluster,
)
from .errors import DegenerateInput, TieOnBoundary
from .fvd import Fvd, SkelEdge, pick_skeleton_root
from .geom import TIE, Point, Scalar, squared_distance

__all__ = [
    "SampleReport",
    "naive_nearest_cluster",
    "sample_verify",
    "brute_force_fvd",
    "brute_force_bisector",
    "count_crossings_bruteforce",
    "count_crossings_family",
    "brute_force_hvd_pair",
]


def naive_nearest_cluster(family: ClusterFamily, q: Point):
    """Cluster id minimizing the point-to-cluster distance, or TIE."""
    best = None
    best_d = None
    tied = False
    for c in family.clusters:
        d = hausdorff_distance_sq(q, c)
        if best_d is None or d < best_d:
            best, best_d, tied = c.id, d, False
        elif d == best_d:
            tied = True
    return TIE if tied else best


def _pair_interval(line, c: Point, q: Point, rivals):
    """Parameter interval of the line where both c and q are farthest."""
    ref = _line_ref(line)
    dx, dy = line.direction()
    lo, hi = None, None
    for r in rivals:
        a = squared_distance(ref, c) - squared_distance(ref, r)
        b = 2 * (dx * (r.x - c.x) + dy * (r.y - c.y))
        if b == 0:
            if a < 0:
                return None
        elif b > 0:
            t = -Scalar(a) / b
            if lo is None or t > lo:
                lo = t
        else:
            t = -Scalar(a) / b
            if hi is None or t < hi:
                hi = t
    if lo is not None and hi is not None and lo >= hi:
        return None
    return lo, hi


def _line_ref(line) -> Point:
    # any exact point on the line, derived from the coefficients alone
    if line.b != 0:
        return Point(Scalar(0), Scalar(-line.c, line.b))
    return Point(Scalar(-line.c, line.a), Scalar(0))


def brute_force_fvd(cluster: Cluster, require_general_position: bool = True) -> Fvd:
    """Farthest diagram via O(h^3) interval filtering on pair bisectors."""
    hull = cluster.hull
    if len(hull) == 1:
        c = hull[0]
        return Fvd(cluster, {c: ConvexRegion(is_plane=True)}, (), (c,), {}, None)

    edges = []
    for i, first in enumerate(hull):
        for second in hull[i + 1:]:
            a, b = sorted((first, second))
            line = bisector_line(b, a)
            rivals = [r for r in hull if r != a and r != b]
            iv = _pair_interval(line, a, b, rivals)
            if iv is None:
                continue
            lo, hi = iv
            # reparametrize onto the line's own reference point
            base = line_param_of(line, _line_ref(line))
            t0 = None if lo is None else lo + base
            t1 = None if hi is None else hi + base
            edges.append(SkelEdge(BEdge(line, t0, t1, b), (a, b)))

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

    regions = {c: _assemble_region(c, edges) for c in hull}
    verts = tuple(sorted(degree))
    adjacency = {v: tuple(i for i, se in enumerate(edges)
                          if v in (se.seg.start(), se.seg.end()))
                 for v in verts}
    return Fvd(cluster, regions, tuple(edges), verts, adjacency,
               pick_skeleton_root(edges))


def _oriented_for(owner: Point, se: SkelEdge) -> BEdge:
    """The skeleton edge as a boundary edge of `owner`'s region."""
    a, b = se.owners
    if owner == a:
        return se.seg
    rl = se.seg.line.reversed()
    t0 = None if se.seg.t1 is None else line_param_of(rl, se.seg.end())
    t1 = None if se.seg.t0 is None else line_param_of(rl, se.seg.start())
    return BEdge(rl, t0, t1, a)


def _assemble_region(owner: Point, edges) -> ConvexRegion:
    mine = [_oriented_for(owner, se) for se in edges if owner in se.owners]
    if not mine:
        raise DegenerateInput("farthest region vanished", (owner,))
    by_start = {}
    heads = []
    for e in mine:
        if e.t0 is None:
            heads.append(e)
        else:
            by_start[e.start()] = e
    if len(heads) != 1:
        raise DegenerateInput("farthest region boundary is not one open chain",
                              (owner,))
    path = [heads[0]]
    while path[-1].t1 is not None:
        nxt = by_start.pop(path[-1].end(), None)
        if nxt is None:
            break
        path.append(nxt)
    if by_start or path[-1].t1 is not None:
        raise DegenerateInput("farthest region boundary failed to chain",
                              (owner,))
    return ConvexRegion(chains=[Chain(path, closed=False)])


def brute_force_bisector(P: Cluster, Q: Cluster):
    """Chains of the Hausdorff bisector of two disjoint clusters.

    Straddling edges of the joint farthest diagram, grouped into maximal
    paths.  Every chain is unbounded at both ends.
    """
    merged = make_cluster(P.id + "+" + Q.id, P.hull + Q.hull)
    f = brute_force_fvd(merged)
    pset = set(P.hull)
    bh = [se for se in f.edges if (se.owners[0] in pset) != (se.owners[1] in pset)]

    incident = {}
    for idx, se in enumerate(bh):
        for endpoint in (se.seg.start(), se.seg.end()):
            if endpoint is not None:
                incident.setdefault(endpoint, []).append(idx)
    for endpoint, ids in incident.items():
        if len(ids) > 2:
            raise DegenerateInput("bisector self-intersects", (endpoint,))

    chains = []
    used = set()
    for idx, se in enumerate(bh):
        if idx in used:
            continue
        # walk to one unbounded end, then collect the full path
        cur = idx
        frontier = bh[cur].seg.start()
        for _ in range(len(bh) + 1):
            if frontier is None:
                break
            ids = [j for j in incident[frontier] if j != cur]
            if not ids:
                break
            cur = ids[0]
            a, b = bh[cur].seg.start(), bh[cur].seg.end()
            frontier = a if b == frontier else b
        else:
            raise DegenerateInput("bisector contains a cycle")
        stop = frontier
        path = [cur]
        used.add(cur)
        ends = [p for p in (bh[cur].seg.start(), bh[cur].seg.end())
                if p is not None and p != stop]
        frontier = ends[0] if ends else None
        while frontier is not None:
            ids = [j for j in incident[frontier] if j not in used]
            if not ids:
                break
            cur = ids[0]
            used.add(cur)
            path.append(cur)
            a, b = bh[cur].seg.start(), bh[cur].seg.end()
            frontier = a if b == frontier else b
        chains.append([bh[j] for j in path])
    return chains


def count_crossings_bruteforce(P: Cluster, Q: Cluster) -> int:
    """Crossing mixed vertices on the pair's Hausdorff bisector."""
    chains = brute_force_bisector(P, Q)
    pset = set(P.hull)
    seen = set()
    total = 0
    for chain in chains:
        for i in range(len(chain) - 1):
            shared = set(chain[i].owners) & set(chain[i + 1].owners)
            pts = set(chain[i].owners) | set(chain[i + 1].owners)
            if len(shared) != 1 or len(pts) != 3:
                raise DegenerateInput("malformed bisector vertex")
            ends_i = {chain[i].seg.start(), chain[i].seg.end()}
            ends_j = {chain[i + 1].seg.start(), chain[i + 1].seg.end()}
            (v,) = (ends_i & ends_j) - {None}
            if v in seen:
                continue
            seen.add(v)
            two_p = [p for p in pts if p in pset]
            if len(two_p) == 2:
                side, rival = P, Q
                ci, cj = two_p
                (pl,) = [p for p in pts if p not in pset]
            else:
                side, rival = Q, P
                ci, cj = [p for p in pts if p not in pset]
                (pl,) = two_p
            if is_crossing_mixed_vertex(v, side, ci, cj, rival, pl):
                total += 1
    return total


def count_crossings_family(family: ClusterFamily) -> int:
    total = 0
    cs = family.clusters
    for i, P in enumerate(cs):
        for Q in cs[i + 1:]:
            total += count_crossings_bruteforce(P, Q)
    return total


def brute_force_hvd_pair(P: Cluster, Q: Cluster) -> dict:
    """Face counts of each cluster's Hausdorff region, by cell merging.

    A point belongs to P's Hausdorff region exactly when the farthest
    point of P+Q from it lies in Q (the min-max flip), so P's faces are
    the connected groups of Q-owned farthest cells.
    """
    merged = make_cluster(P.id + "+" + Q.id, P.hull + Q.hull)
    # cell merging only reads edge adjacency, so cocircular quadruples
    # (degree-4 skeleton vertices) are harmless here
    f = brute_force_fvd(merged, require_general_position=False)

    def components(owned) -> int:
        parent = {c: c for c in owned}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for se in f.edges:
            a, b = se.owners
            if a in parent and b in parent:
                parent[find(a)] = find(b)
        return len({find(c) for c in owned})

    pset = set(P.hull)
    q_cells = [c for c in merged.hull if c not in pset]
    p_cells = [c for c in merged.hull if c in pset]
    return {P.id: components(q_cells), Q.id: components(p_cells)}


# -- sampling gate ---------------------------------------------------------


@dataclass
class SampleReport:
    samples: int
    mismatches: list = field(default_factory=list)
    boundary_skipped: int = 0

    def ok(self) -> bool:
        return not self.mismatches


def sample_verify(H, family: ClusterFamily, n: int, seed: int) -> SampleReport:
    """Compare n random point locations in H against the naive argmin."""
    import random

    from .diagram import point_locate

    xs = [p.x for c in family.clusters for p in c.hull]
    ys = [p.y for c in family.clusters for p in c.hull]
    if not xs:
        return SampleReport(0)
    cx, cy = (min(xs) + max(xs)) / 2, (min(ys) + max(ys)) / 2
    wx = max(max(xs) - min(xs), 1)
    wy = max(max(ys) - min(ys), 1)

    rng = random.Random(seed)
    rep = SampleReport(n)
    denom = 997  # prime keeps sample coordinates off the integer grid
    for _ in range(n):
        q = Point(cx + Scalar(rng.randrange(-denom, denom + 1), denom) * wx,
                  cy + Scalar(rng.randrange(-denom, denom + 1), denom) * wy)
        want = naive_nearest_cluster(family, q)
        if want is TIE:
            rep.boundary_skipped += 1
            continue
        try:
            got = point_locate(H, q)
        except TieOnBoundary:
            rep.boundary_skipped += 1
            continue
        except Exception as exc:  # noqa: BLE001 - any failure is a mismatch
            rep.mismatches.append((q, want, repr(exc)))
            continue
        if got[0] != want:
            rep.mismatches.append((q, want, got[0]))
    return rep
