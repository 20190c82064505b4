"""Oriented lines, boundary edges, and exact convex-region clipping.

A Line is stored with integer coefficients (a, b, c), meaning the oriented
line a*x + b*y + c = 0 whose *inside* is the closed halfplane <= 0.  Its
travel direction is (-b, a), which keeps the inside on the left, so the
boundary of a convex region is a counterclockwise sequence of edges.

Edges are parametric: a sub-interval [t0, t1] of their line, where None
means the edge escapes to infinity on that side.  Points at infinity never
get coordinates; all comparisons against them reduce to sign tests on
directions.  Regions may be bounded (one closed chain), unbounded (one open
chain), strips (two open chains), a halfplane, the whole plane, or empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import gcd
from typing import NamedTuple, Optional

from .geom import Point, Scalar
from .errors import PreconditionViolated


class Line(NamedTuple):
    a: int
    b: int
    c: int

    def eval_at(self, p: Point):
        return self.a * p[0] + self.b * p[1] + self.c

    def eval_dir(self, dx, dy):
        """Sign proxy for eval far along (dx, dy): the linear part only."""
        return self.a * dx + self.b * dy

    def direction(self):
        """Travel direction (inside on the left)."""
        return (-self.b, self.a)

    def reversed(self):
        return Line(-self.a, -self.b, -self.c)


def make_line(a, b, c) -> Line:
    """Normalize rational coefficients to coprime integers, keeping orientation."""
    fa, fb, fc = Scalar(a), Scalar(b), Scalar(c)
    den = int(fa.denominator)
    for f in (fb, fc):
        d = int(f.denominator)
        den = den // gcd(den, d) * d
    ia = int(fa.numerator) * (den // int(fa.denominator))
    ib = int(fb.numerator) * (den // int(fb.denominator))
    ic = int(fc.numerator) * (den // int(fc.denominator))
    g = gcd(gcd(abs(ia), abs(ib)), abs(ic))
    if g == 0:
        raise PreconditionViolated("null line")
    if g > 1:
        ia, ib, ic = ia // g, ib // g, ic // g
    if ia == 0 and ib == 0:
        raise PreconditionViolated("line without direction")
    return Line(ia, ib, ic)


def bisector_line(p: Point, q: Point) -> Line:
    """Perpendicular bisector of pq, oriented so 'inside' (<= 0) is closer to p."""
    a = 2 * (q[0] - p[0])
    b = 2 * (q[1] - p[1])
    c = (p[0] * p[0] + p[1] * p[1]) - (q[0] * q[0] + q[1] * q[1])
    return make_line(a, b, c)


def line_through(p: Point, q: Point) -> Line:
    """Oriented line from p toward q (left side is 'inside')."""
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    return make_line(dy, -dx, -(dy * p[0] - dx * p[1]))


def line_key(line: Line):
    """Orientation-free canonical key plus a flag telling if we flipped."""
    a, b, c = line
    if a < 0 or (a == 0 and b < 0):
        return (-a, -b, -c), True
    return (a, b, c), False


def _ref_point(line: Line) -> Point:
    a, b, c = line
    if b != 0:
        return Point(Scalar(0), Scalar(-c, b))
    return Point(Scalar(-c, a), Scalar(0))


def line_point_at(line: Line, t) -> Point:
    r = _ref_point(line)
    return Point(r[0] - line.b * t, r[1] + line.a * t)


def line_param_of(line: Line, p: Point):
    """Parameter of a point assumed to lie on the line."""
    r = _ref_point(line)
    d2 = Scalar(line.a * line.a + line.b * line.b)
    return (-line.b * (p[0] - r[0]) + line.a * (p[1] - r[1])) / d2


def intersect_lines(l1: Line, l2: Line) -> Optional[Point]:
    det = l1.a * l2.b - l1.b * l2.a
    if det == 0:
        return None
    x = Scalar(l1.b * l2.c - l1.c * l2.b, det)
    y = Scalar(l1.c * l2.a - l1.a * l2.c, det)
    return Point(x, y)


def primitive_dir(dx, dy):
    """Reduce an integer direction to a canonical primitive vector."""
    g = gcd(abs(dx), abs(dy))
    return (dx // g, dy // g) if g else (0, 0)


@dataclass(frozen=True)
class BEdge:
    """A boundary edge: the part of `line` with parameter in [t0, t1].

    t0/t1 of None mean unbounded on that side.  `label` is opaque payload
    (ownership info) carried through clipping untouched.
    """

    line: Line
    t0: object = None  # Scalar or None
    t1: object = None
    label: object = None

    def start(self) -> Optional[Point]:
        return None if self.t0 is None else line_point_at(self.line, self.t0)

    def end(self) -> Optional[Point]:
        return None if self.t1 is None else line_point_at(self.line, self.t1)

    def inf_dir_start(self):
        """Direction of the infinite start end (points away from the chain)."""
        dx, dy = self.line.direction()
        return primitive_dir(-dx, -dy)

    def inf_dir_end(self):
        return primitive_dir(*self.line.direction())


@dataclass
class Chain:
    edges: list
    closed: bool

    def __iter__(self):
        return iter(self.edges)


@dataclass
class ConvexRegion:
    """Intersection of halfplanes with an explicit minimal boundary."""

    chains: list = field(default_factory=list)
    is_plane: bool = False
    is_empty: bool = False

    def edges(self):
        for ch in self.chains:
            yield from ch.edges

    def lines(self):
        return [e.line for ch in self.chains for e in ch.edges]

    def bounded(self) -> bool:
        return (not self.is_plane and not self.is_empty
                and all(ch.closed for ch in self.chains))

    def vertices(self):
        out = []
        for ch in self.chains:
            for e in ch.edges:
                if e.t0 is not None:
                    out.append(e.start())
            if not ch.closed and ch.edges and ch.edges[-1].t1 is not None:
                out.append(ch.edges[-1].end())
        # closed chains list every corner once via starts; open chains need
        # the final endpoint too, dedup in case of single-vertex wedges
        seen = set()
        uniq = []
        for p in out:
            if p not in seen:
                seen.add(p)
                uniq.append(p)
        return uniq


def plane() -> ConvexRegion:
    return ConvexRegion(is_plane=True)


def empty() -> ConvexRegion:
    return ConvexRegion(is_empty=True)


def halfplane(line: Line, label=None) -> ConvexRegion:
    return ConvexRegion(chains=[Chain([BEdge(line, None, None, label)], closed=False)])


def _clip_interval(edge: BEdge, cut: Line):
    """Intersect the edge's parameter interval with {cut <= 0}.

    Returns (t0, t1, changed_end) or None when nothing survives;
    changed_end is 'start', 'end', or None telling which endpoint was cut.
    """
    d = edge.line.direction()
    alpha = cut.a * d[0] + cut.b * d[1]
    beta = cut.eval_at(_ref_point(edge.line))
    t0, t1 = edge.t0, edge.t1
    if alpha == 0:
        return (t0, t1, None) if beta <= 0 else None
    tstar = Scalar(-beta) / alpha
    if alpha > 0:  # keep t <= tstar
        if t0 is not None and t0 >= tstar:
            return None
        if t1 is None or t1 > tstar:
            return (t0, tstar, "end")
        return (t0, t1, None)
    else:  # keep t >= tstar
        if t1 is not None and t1 <= tstar:
            return None
        if t0 is None or t0 < tstar:
            return (tstar, t1, "start")
        return (t0, t1, None)


def clip_line_by(line: Line, constraints, label=None) -> Optional[BEdge]:
    """Portion of `line` inside all constraint halfplanes, as one edge or None."""
    e = BEdge(line, None, None, label)
    for cut in constraints:
        res = _clip_interval(e, cut)
        if res is None:
            return None
        t0, t1, _ = res
        if t0 is not None and t1 is not None and t0 >= t1:
            return None
        e = replace(e, t0=t0, t1=t1)
    return e


def stitch(edges) -> list:
    """Assemble edges (already consistently oriented) into chains.

    Matching is by exact endpoint equality.  Open chains must terminate at
    infinity on both sides; anything else means the caller fed a broken
    boundary and gets an error.
    """
    if not edges:
        return []
    by_start = {}
    open_starts = []
    for e in edges:
        s = e.start()
        if s is None:
            open_starts.append(e)
        else:
            if s in by_start:
                raise PreconditionViolated(f"two boundary edges start at {s}")
            by_start[s] = e
    chains = []
    used = set()

    def follow(first):
        run = [first]
        used.add(id(first))
        while True:
            endp = run[-1].end()
            if endp is None:
                return Chain(run, closed=False)
            nxt = by_start.get(endp)
            if nxt is None:
                raise PreconditionViolated(f"boundary dead-ends at {endp}")
            if nxt is first:
                return Chain(run, closed=True)
            if id(nxt) in used:
                raise PreconditionViolated("boundary self-crosses")
            run.append(nxt)
            used.add(id(nxt))

    for e in open_starts:
        chains.append(follow(e))
    for e in edges:
        if id(e) not in used:
            chains.append(follow(e))
    return chains


def _merge_collinear(chain: Chain) -> Chain:
    """Fuse consecutive edges lying on the same line with touching intervals."""
    es = chain.edges
    if len(es) < 2:
        return chain
    out = []
    for e in es:
        if out and out[-1].line == e.line and out[-1].t1 == e.t0:
            out[-1] = replace(out[-1], t1=e.t1)
        else:
            out.append(e)
    if chain.closed and len(out) > 1 and out[0].line == out[-1].line \
            and out[-1].t1 == out[0].t0:
        out[0] = replace(out[-1], t1=out[0].t1)
        out.pop()
    return Chain(out, chain.closed)


def clip(region: ConvexRegion, cut: Line, label=None) -> ConvexRegion:
    """region intersected with the closed halfplane {cut <= 0}.

    Zero-area results collapse to the empty region: carving logic treats
    boundary tangency as no intersection.
    """
    if region.is_empty:
        return region
    if region.is_plane:
        return halfplane(cut, label)
    old_lines = []
    survivors = []
    touched = False
    for e in region.edges():
        old_lines.append(e.line)
        if e.line == cut:
            # identical halfplane already bounds the region
            return region
        if e.line == cut.reversed():
            return empty()
        res = _clip_interval(e, cut)
        if res is None:
            touched = True
            continue
        t0, t1, changed = res
        if t0 is not None and t1 is not None and t0 >= t1:
            touched = True
            continue
        if changed is not None:
            touched = True
        survivors.append(replace(e, t0=t0, t1=t1))
    # the cut line must be clipped against the *original* constraints:
    # survivors alone miss parallel cuts of unbounded regions
    new_edge = clip_line_by(cut, old_lines, label)
    if new_edge is not None and new_edge.t0 is not None \
            and new_edge.t1 is not None and new_edge.t0 >= new_edge.t1:
        new_edge = None
    if new_edge is None:
        if not touched:
            return region
        if not survivors:
            return empty()
    else:
        survivors.append(new_edge)
    chains = [_merge_collinear(c) for c in stitch(survivors)]
    # a closed chain needs at least 3 corners to enclose area
    chains = [c for c in chains if not (c.closed and len(c.edges) < 3)]
    if not chains:
        return empty()
    return ConvexRegion(chains=chains)


def from_halfplanes(lines, labels=None) -> ConvexRegion:
    reg = plane()
    for i, ln in enumerate(lines):
        reg = clip(reg, ln, None if labels is None else labels[i])
        if reg.is_empty:
            break
    return reg


def contains(region: ConvexRegion, p: Point, strict=False) -> bool:
    if region.is_plane:
        return True
    if region.is_empty:
        return False
    for ln in region.lines():
        v = ln.eval_at(p)
        if v > 0 or (strict and v == 0):
            return False
    return True


def contains_at_infinity(region: ConvexRegion, dx, dy, strict=False) -> bool:
    """Whether points far along (dx, dy) eventually stay inside the region."""
    if region.is_plane:
        return True
    if region.is_empty:
        return False
    for ln in region.lines():
        v = ln.eval_dir(dx, dy)
        if v > 0 or (strict and v == 0):
            return False
    return True


def interior_point(region: ConvexRegion) -> Point:
    """Some exact rational point strictly inside the region."""
    if region.is_empty:
        raise PreconditionViolated("empty region has no interior point")
    if region.is_plane:
        return Point(Scalar(0), Scalar(0))
    lines = region.lines()
    for e in region.edges():
        # midpoint of the edge's parameter interval, nudged inward
        if e.t0 is not None and e.t1 is not None:
            tm = (e.t0 + e.t1) / 2
        elif e.t0 is not None:
            tm = e.t0 + 1
        elif e.t1 is not None:
            tm = e.t1 - 1
        else:
            tm = Scalar(0)
        m = line_point_at(e.line, tm)
        nx, ny = -e.line.a, -e.line.b  # inward normal
        step = None
        ok = True
        for ln in lines:
            if ln == e.line:
                continue
            rate = ln.a * nx + ln.b * ny
            slack = -ln.eval_at(m)
            if slack <= 0:
                ok = False
                break
            if rate > 0:
                bound = slack / (2 * rate)
                step = bound if step is None else min(step, bound)
        if not ok:
            continue
        if step is None:
            step = Scalar(1)
        return Point(m[0] + nx * step, m[1] + ny * step)
    raise PreconditionViolated("could not find interior point")
