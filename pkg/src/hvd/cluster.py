"""Clusters (convex-position point sets), families, and crossing predicates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateInput, DuplicateId, PreconditionViolated, SharedPoint
from .geom import COLLINEAR, LEFT, RIGHT, Point, orientation, squared_distance


@dataclass(frozen=True)
class Cluster:
    """A cluster is the vertex set of its convex hull, counterclockwise.

    The hull starts at the lexicographically smallest vertex so equal point
    sets always produce identical representations.
    """

    id: str
    hull: tuple

    def __len__(self):
        return len(self.hull)

    def __iter__(self):
        return iter(self.hull)

    def __hash__(self):
        return hash((self.id, self.hull))


@dataclass(frozen=True)
class ClusterFamily:
    clusters: tuple
    n: int
    k: int

    def __iter__(self):
        return iter(self.clusters)

    def __len__(self):
        return self.k

    def by_id(self, cid: str) -> Cluster:
        for c in self.clusters:
            if c.id == cid:
                return c
        raise KeyError(cid)


def convex_hull(points: Sequence[Point]) -> list:
    """Strict counterclockwise hull (collinear mid-edge points dropped)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and orientation(out[-2], out[-1], p) != RIGHT:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    hull.reverse()  # ccw
    # rotate so the lexicographically smallest vertex leads
    i = hull.index(min(hull))
    return hull[i:] + hull[:i]


def make_cluster(cid: str, points: Sequence[Point]) -> Cluster:
    if not points:
        raise PreconditionViolated("cluster needs at least one point")
    if len(set(points)) != len(points):
        seen = set()
        dup = next(p for p in points if p in seen or seen.add(p))
        raise DegenerateInput(f"duplicate point in cluster {cid!r}", (dup,))
    return Cluster(cid, tuple(convex_hull(points)))


def make_family(clusters: Sequence[Cluster], validate: bool = True) -> ClusterFamily:
    fam = ClusterFamily(tuple(clusters), sum(len(c) for c in clusters), len(clusters))
    if validate:
        validate_family(fam)
    return fam


def validate_family(family: ClusterFamily) -> None:
    ids = set()
    for c in family.clusters:
        if c.id in ids:
            raise DuplicateId(f"duplicate cluster id {c.id!r}")
        ids.add(c.id)
    owner = {}
    for c in family.clusters:
        for p in c.hull:
            if p in owner and owner[p] != c.id:
                raise SharedPoint(
                    f"clusters {owner[p]!r} and {c.id!r} share a point", (p,))
            owner[p] = c.id


def hausdorff_distance_sq(t: Point, cluster) -> object:
    """Squared farthest distance from t to the cluster."""
    pts = cluster.hull if isinstance(cluster, Cluster) else cluster
    return max(squared_distance(t, c) for c in pts)


def farthest_witnesses(t: Point, cluster) -> list:
    """All hull points attaining the farthest distance from t."""
    pts = cluster.hull if isinstance(cluster, Cluster) else cluster
    best = None
    out = []
    for c in pts:
        d = squared_distance(t, c)
        if best is None or d > best:
            best, out = d, [c]
        elif d == best:
            out.append(c)
    return out


def clusters_crossing(P: Cluster, Q: Cluster) -> dict:
    """Supporting-segment census of conv(P u Q); crossing iff more than two."""
    pset, qset = set(P.hull), set(Q.hull)
    both = pset & qset
    if both:
        raise DegenerateInput("clusters share a point", tuple(both))
    union = list(pset | qset)
    hull = convex_hull(union)
    if len(hull) == 1:
        return {"crossing": False, "supporting_segments": 0}
    # hull edges whose interior contains another input point are ambiguous
    hull_set = set(hull)
    interior_pts = [p for p in union if p not in hull_set]
    edges = _cyclic_edges(hull)
    for a, b in edges:
        for p in interior_pts:
            if orientation(a, b, p) == COLLINEAR and _between(a, b, p):
                raise DegenerateInput("point on a supporting segment", (a, b, p))
    count = 0
    for a, b in edges:
        if (a in pset) != (b in pset):
            count += 1
    return {"crossing": count > 2, "supporting_segments": count}


def _cyclic_edges(hull):
    if len(hull) == 2:
        return [(hull[0], hull[1]), (hull[1], hull[0])]
    return list(zip(hull, hull[1:] + hull[:1]))


def _between(a: Point, b: Point, p: Point) -> bool:
    """p strictly inside segment ab, assuming collinear."""
    if a == p or b == p:
        return False
    lo_x, hi_x = min(a.x, b.x), max(a.x, b.x)
    lo_y, hi_y = min(a.y, b.y), max(a.y, b.y)
    return lo_x <= p.x <= hi_x and lo_y <= p.y <= hi_y


def segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    """Proper crossing: interiors intersect in exactly one point."""
    o1, o2 = orientation(a, b, c), orientation(a, b, d)
    o3, o4 = orientation(c, d, a), orientation(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def is_crossing_mixed_vertex(v: Point, C: Cluster, c_i: Point, c_j: Point,
                             P: Cluster, p_l: Point) -> bool:
    """Does the mixed vertex v witness a crossing between C and P?

    True iff some p_r in P makes p_l-p_r cross c_i-c_j with all four
    endpoints on the hull of C u P.
    """
    if c_i == c_j:
        return False  # no diagonal on a singleton side
    d_i = squared_distance(v, c_i)
    if squared_distance(v, c_j) != d_i or squared_distance(v, p_l) != d_i:
        raise PreconditionViolated("vertex is not equidistant from its sites")
    hull = set(convex_hull(list(C.hull) + list(P.hull)))
    if not {c_i, c_j, p_l} <= hull:
        return False
    for p_r in P.hull:
        if p_r == p_l or p_r not in hull:
            continue
        if segments_cross(p_l, p_r, c_i, c_j):
            return True
    return False
