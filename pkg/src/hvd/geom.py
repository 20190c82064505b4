"""Exact rational scalars, points, and the predicates everything else builds on.

All coordinates are rational (``Scalar``).  Every construction in the package
(circumcenters, equidistant points on a line, halfplane corners) maps rational
inputs to rational outputs, so no operation here ever rounds.
"""

from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Optional

from .errors import CollinearInput, DegenerateOverlap, InputFormatError

try:
    from gmpy2 import mpq as Scalar
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    Scalar = Fraction

ZERO = Scalar(0)
ONE = Scalar(1)

LEFT = 1
RIGHT = -1
COLLINEAR = 0

C_CLOSER = 1
Q_CLOSER = -1
TIE = 0


def scalar(value) -> Scalar:
    """Coerce an int, Fraction, or Scalar to Scalar.  Floats are rejected."""
    if isinstance(value, float):
        raise TypeError("floats are not exact; pass a string, int, or rational")
    return Scalar(value)


def parse_scalar(text: str) -> Scalar:
    """Parse ``"5/4"``, ``"1.25"``, or ``"-3"`` into an exact Scalar."""
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/")
            return Scalar(int(num), int(den))
        return Scalar(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise InputFormatError(f"bad coordinate literal {text!r}") from exc


def format_scalar(value) -> str:
    """Canonical text form: ``p`` for integers, ``p/q`` otherwise."""
    f = Fraction(value)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


class Point(NamedTuple):
    x: Scalar
    y: Scalar

    def __str__(self):
        return f"({format_scalar(self.x)}, {format_scalar(self.y)})"


class Direction(NamedTuple):
    """An unnormalized direction vector; only signs and ratios matter."""

    dx: Scalar
    dy: Scalar

    def __str__(self):
        return f"<{format_scalar(self.dx)}, {format_scalar(self.dy)}>"


def pt(x, y) -> Point:
    return Point(scalar(x), scalar(y))


def squared_distance(a: Point, b: Point) -> Scalar:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def orientation(a: Point, b: Point, c: Point) -> int:
    """Sign of the cross product (b-a) x (c-a): LEFT, RIGHT, or COLLINEAR."""
    d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if d > 0:
        return LEFT
    if d < 0:
        return RIGHT
    return COLLINEAR


def circumcenter(a: Point, b: Point, c: Point) -> Point:
    """Exact center of the circle through three non-collinear points."""
    # Solve the two linear equidistance equations |t-a|^2=|t-b|^2=|t-c|^2.
    abx = 2 * (b[0] - a[0])
    aby = 2 * (b[1] - a[1])
    abc = (b[0] * b[0] - a[0] * a[0]) + (b[1] * b[1] - a[1] * a[1])
    acx = 2 * (c[0] - a[0])
    acy = 2 * (c[1] - a[1])
    acc = (c[0] * c[0] - a[0] * a[0]) + (c[1] * c[1] - a[1] * a[1])
    det = abx * acy - aby * acx
    if det == 0:
        raise CollinearInput("circumcenter of collinear points", (a, b, c))
    x = (abc * acy - aby * acc) / det
    y = (abx * acc - abc * acx) / det
    return Point(x, y)


def equidistant_on_segment(u: Point, v: Point, a: Point, b: Point) -> Optional[Point]:
    """The point of segment uv equidistant from a and b, if any.

    d(t,a)^2 - d(t,b)^2 is affine along the segment, so the answer is a single
    rational point or absent.  If the whole segment is equidistant the query is
    ill-posed and raises DegenerateOverlap.
    """
    if a == b:
        raise DegenerateOverlap("equidistant query with coincident sites", (a, b))
    fu = squared_distance(u, a) - squared_distance(u, b)
    fv = squared_distance(v, a) - squared_distance(v, b)
    if fu == 0 and fv == 0:
        raise DegenerateOverlap("segment lies on the bisector", (u, v, a, b))
    if fu == fv:
        return None  # segment parallel to the bisector, strictly off it
    t = fu / (fu - fv)
    if t < 0 or t > 1:
        return None
    return Point(u[0] + t * (v[0] - u[0]), u[1] + t * (v[1] - u[1]))


def compare_farthest_at_infinity(d: Direction, C, Q) -> int:
    """Which cluster is Hausdorff-closer far out along direction d.

    As t goes to infinity along d, df(t,X) grows like |t| - min_x <d,x>/|d|,
    so the cluster with the larger minimum inner product is closer.
    """
    mc = min(d[0] * p[0] + d[1] * p[1] for p in C)
    mq = min(d[0] * p[0] + d[1] * p[1] for p in Q)
    if mc > mq:
        return C_CLOSER
    if mc < mq:
        return Q_CLOSER
    return TIE
