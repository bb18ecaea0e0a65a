"""Neighbourhood construction and exact angular geometry.

All direction computations are done on primitive integer vectors with
cross-product comparisons; no floating point is used for any decision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key
from typing import Iterable, Optional, Sequence, Union

Site = tuple[int, int]

NAMED_MODELS = ("square", "triangular", "boxtimes", "diamond", "square4")


class ModelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Direction:
    """Primitive integer vector standing for a point of S^1 with rational slope."""

    x: int
    y: int

    def __post_init__(self):
        if self.x == 0 and self.y == 0:
            raise ValueError("zero vector is not a direction")
        if math.gcd(abs(self.x), abs(self.y)) != 1:
            raise ValueError(f"({self.x},{self.y}) is not primitive")

    @staticmethod
    def of(x: int, y: int) -> "Direction":
        """Reduce an arbitrary nonzero integer vector to its primitive direction."""
        g = math.gcd(abs(x), abs(y))
        if g == 0:
            raise ValueError("zero vector is not a direction")
        return Direction(x // g, y // g)

    def dot(self, site: Site) -> int:
        return self.x * site[0] + self.y * site[1]

    def cross(self, other: "Direction") -> int:
        return self.x * other.y - self.y * other.x

    def rot90(self) -> "Direction":
        """Counter-clockwise quarter turn."""
        return Direction(-self.y, self.x)

    def neg(self) -> "Direction":
        return Direction(-self.x, -self.y)

    def norm_sq(self) -> int:
        return self.x * self.x + self.y * self.y

    def as_tuple(self) -> Site:
        return (self.x, self.y)

    def __repr__(self):
        return f"Direction({self.x},{self.y})"


def _half(d: Direction) -> int:
    # 0 for angle in [0, pi), 1 for [pi, 2pi); sweep starts at (1,0)
    return 0 if (d.y > 0 or (d.y == 0 and d.x > 0)) else 1


def angular_cmp(u: Direction, v: Direction) -> int:
    """Compare two directions by angle from (1,0), counter-clockwise, exactly."""
    hu, hv = _half(u), _half(v)
    if hu != hv:
        return -1 if hu < hv else 1
    c = u.cross(v)
    if c > 0:
        return -1
    if c < 0:
        return 1
    return 0


def sort_by_angle(dirs: Iterable[Direction]) -> list[Direction]:
    return sorted(dirs, key=cmp_to_key(angular_cmp))


# ---------------------------------------------------------------------------
# Neighbourhood specifications
# ---------------------------------------------------------------------------

_SQUARE = frozenset({(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)})
_TRIANGULAR = _SQUARE | {(1, -1), (-1, 1)}
_BOXTIMES = frozenset((x, y) for x in (-1, 0, 1) for y in (-1, 0, 1))
_DIAMOND = frozenset({(1, 1), (-1, 1), (-1, -1), (1, -1)})

Threshold = Union[int, str]  # an explicit integer or the string "critical"


@dataclass(frozen=True)
class NeighbourhoodSpec:
    """Declarative description of a threshold model's neighbourhood."""

    kind: str  # "named" | "lp_ball" | "explicit"
    name: Optional[str] = None
    p: Optional[Union[Fraction, float]] = None  # Fraction or math.inf
    s: Optional[Fraction] = None
    offsets: Optional[tuple[Site, ...]] = None
    threshold: Threshold = "critical"

    @staticmethod
    def named(name: str) -> "NeighbourhoodSpec":
        if name not in NAMED_MODELS:
            raise ValueError(f"unknown named model {name!r}; choose from {NAMED_MODELS}")
        return NeighbourhoodSpec(kind="named", name=name)

    @staticmethod
    def lp_ball(p, s, threshold: Threshold = "critical") -> "NeighbourhoodSpec":
        p = math.inf if p in ("inf", math.inf) else Fraction(p)
        s = Fraction(s)
        if s <= 0:
            raise ValueError("scale s must be positive")
        if p is not math.inf and p < 1:
            raise ValueError("p must be >= 1 or inf")
        return NeighbourhoodSpec(kind="lp_ball", p=p, s=s, threshold=threshold)

    @staticmethod
    def explicit(offsets: Sequence[Site], threshold: Threshold) -> "NeighbourhoodSpec":
        return NeighbourhoodSpec(
            kind="explicit", offsets=tuple(sorted(set(map(tuple, offsets)))), threshold=threshold
        )

    def to_json(self) -> dict:
        if self.kind == "named":
            return {"kind": "named", "name": self.name}
        if self.kind == "lp_ball":
            p = "inf" if self.p is math.inf else str(self.p)
            return {"kind": "lp_ball", "p": p, "s": str(self.s), "threshold": self.threshold}
        return {"kind": "explicit", "offsets": [list(o) for o in self.offsets],
                "threshold": self.threshold}

    @staticmethod
    def from_json(obj: dict) -> "NeighbourhoodSpec":
        kind = obj["kind"]
        if kind == "named":
            return NeighbourhoodSpec.named(obj["name"])
        if kind == "lp_ball":
            return NeighbourhoodSpec.lp_ball(obj["p"], obj["s"], obj.get("threshold", "critical"))
        if kind == "explicit":
            return NeighbourhoodSpec.explicit(
                [tuple(o) for o in obj["offsets"]], obj["threshold"]
            )
        raise ValueError(f"unknown neighbourhood kind {kind!r}")


@dataclass(frozen=True)
class Neighbourhood:
    """A finite offset set with its infection threshold."""

    offsets: frozenset
    threshold: int
    name: str = "explicit"

    @property
    def radius_sq(self) -> int:
        """Square of the maximal Euclidean norm over the offsets."""
        return max(x * x + y * y for x, y in self.offsets)

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius_sq)

    @property
    def radius_ceil(self) -> int:
        r2 = self.radius_sq
        k = math.isqrt(r2)
        return k if k * k == r2 else k + 1

    def max_infectable(self) -> int:
        # (0,0) never helps an uninfected site
        return len(self.offsets) - (1 if (0, 0) in self.offsets else 0)


def _lp_member(p, s: Fraction, x: int, y: int) -> bool:
    # Continuum body scaled so its max Euclidean norm is exactly s:
    #   p <= 2 : farthest point of the lp ball of radius a sits on an axis -> a = s
    #   p = inf: farthest point is a corner -> half-width s/sqrt(2)
    ax, ay = abs(x), abs(y)
    if p == 1:
        return ax + ay <= s
    if p == 2:
        return x * x + y * y <= s * s
    if p is math.inf:
        m = max(ax, ay)
        return 2 * m * m <= s * s
    raise ValueError(
        "lp_ball supports p in {1, 2, inf}; other exponents have no exact lattice test here"
    )


def _symmetric(offsets: frozenset) -> bool:
    return all((-x, -y) in offsets for x, y in offsets) and all(
        (-y, x) in offsets for x, y in offsets
    )


def build_neighbourhood(spec: NeighbourhoodSpec) -> Neighbourhood:
    """Materialise a spec into an exact offset set with a resolved threshold."""
    if spec.kind == "named":
        table = {
            "square": (_SQUARE, 2),
            "triangular": (_TRIANGULAR, 3),
            "boxtimes": (_BOXTIMES, 4),
            "diamond": (_DIAMOND, 2),
        }
        if spec.name == "square4":
            offsets = frozenset(
                (x, y) for x in range(-4, 5) for y in range(-4, 5) if abs(x) + abs(y) <= 4
            )
            return Neighbourhood(offsets, 17, "square4")
        offsets, r = table[spec.name]
        return Neighbourhood(frozenset(offsets), r, spec.name)

    if spec.kind == "lp_ball":
        bound = int(spec.s) + 1
        offsets = frozenset(
            (x, y)
            for x in range(-bound, bound + 1)
            for y in range(-bound, bound + 1)
            if _lp_member(spec.p, spec.s, x, y)
        )
        if not offsets:
            raise ValueError("lp_ball scale too small: empty offset set")
        name = f"lp{'inf' if spec.p is math.inf else spec.p}_s{spec.s}"
        if spec.threshold == "critical":
            r = critical_threshold(offsets)
            lo, hi = spec.s * spec.s / 2, 2 * spec.s * spec.s
            if not lo <= r <= hi:
                msg = f"critical threshold {r} outside [s^2/2, 2s^2] = [{lo}, {hi}]"
                if spec.s >= 4:
                    raise AssertionError(msg)
                warnings.warn(msg + f" (s={spec.s} below the documented cutoff)", ModelWarning)
            return Neighbourhood(offsets, r, name)
        return _with_explicit_threshold(offsets, spec.threshold, name)

    if spec.kind == "explicit":
        offsets = frozenset(spec.offsets or ())
        if not offsets:
            raise ValueError("explicit offset set is empty")
        if spec.threshold == "critical":
            if not _symmetric(offsets):
                raise ValueError(
                    "critical threshold requires offsets symmetric under negation "
                    "and quarter turn; give an explicit threshold instead"
                )
            r = critical_threshold(offsets)
            return Neighbourhood(offsets, r, "explicit")
        return _with_explicit_threshold(offsets, spec.threshold, "explicit")

    raise ValueError(f"unknown spec kind {spec.kind!r}")


def _with_explicit_threshold(offsets: frozenset, r, name: str) -> Neighbourhood:
    r = int(r)
    nbhd = Neighbourhood(offsets, r, name)
    if r < 2:
        raise ValueError("threshold must be at least 2")
    if r > nbhd.max_infectable():
        raise ValueError(
            f"threshold {r} exceeds the {nbhd.max_infectable()} offsets that can "
            "ever be infected neighbours; no site could be infected"
        )
    return nbhd


# ---------------------------------------------------------------------------
# Critical thresholds and stability, by exact angular sweep
# ---------------------------------------------------------------------------


def negative_count(offsets: Iterable[Site], u: Direction) -> int:
    """|{x in K : <x,u> < 0}|, the open-half-plane count for direction u."""
    return sum(1 for o in offsets if u.dot(o) < 0)


def breakpoint_directions(offsets: Iterable[Site]) -> list[Direction]:
    """All directions perpendicular to some offset, sorted by angle.

    The half-plane count is constant on each open arc between consecutive
    breakpoints, so these are the only places where anything can change.
    """
    dirs = set()
    for x, y in offsets:
        if x == 0 and y == 0:
            continue
        dirs.add(Direction.of(-y, x))
        dirs.add(Direction.of(y, -x))
    return sort_by_angle(dirs)


def _arc_midpoint(a: Direction, b: Direction) -> Direction:
    # exact interior direction of the (< pi) arc from a to b; antipodal pairs
    # (possible only for degenerate single-offset sets) fall back to a quarter turn
    sx, sy = a.x + b.x, a.y + b.y
    if sx == 0 and sy == 0:
        return a.rot90()
    return Direction.of(sx, sy)


def critical_threshold(offsets: Iterable[Site]) -> int:
    """1 + min over directions of the strictly-negative-side count.

    The count on each open arc dominates the counts at its endpoints, so the
    minimum is attained at a breakpoint; evaluating all breakpoints exactly
    is therefore sufficient.
    """
    offsets = list(offsets)
    if not offsets:
        raise ValueError("empty offset set")
    bps = breakpoint_directions(offsets)
    if not bps:
        return 1  # only the origin: no direction sees a negative side
    return 1 + min(negative_count(offsets, d) for d in bps)


@dataclass(frozen=True)
class SweepEntry:
    """One piece of the circle: an isolated breakpoint or an open arc."""

    kind: str  # "point" | "arc"
    start: Direction
    end: Direction  # == start for points
    count: int
    stable: bool


@dataclass(frozen=True)
class StabilityReport:
    """Exact partition of S^1 into stable and unstable parts."""

    threshold: int
    entries: tuple  # cyclic sequence of SweepEntry, alternating point/arc

    @property
    def stable_points(self) -> frozenset:
        """Breakpoints that are stable while both adjacent arcs are unstable."""
        pts = []
        n = len(self.entries)
        for i, e in enumerate(self.entries):
            if e.kind != "point" or not e.stable:
                continue
            prev_arc = self.entries[(i - 1) % n]
            next_arc = self.entries[(i + 1) % n]
            if not prev_arc.stable and not next_arc.stable:
                pts.append(e.start)
        return frozenset(pts)

    @property
    def stable_arcs(self) -> tuple:
        """Maximal stable runs containing at least one arc.

        Each run is (start, start_inclusive, end, end_inclusive) in angular order.
        """
        n = len(self.entries)
        if n == 0:
            return ()
        if all(e.stable for e in self.entries):
            d = self.entries[0].start
            return ((d, True, d, True),)  # whole circle
        runs = []
        i = 0
        # rotate so index 0 is unstable
        first_unstable = next(i for i, e in enumerate(self.entries) if not e.stable)
        order = [self.entries[(first_unstable + k) % n] for k in range(n)]
        while i < n:
            if not order[i].stable:
                i += 1
                continue
            j = i
            while j < n and order[j].stable:
                j += 1
            run = order[i:j]
            if any(e.kind == "arc" for e in run):
                start, end = run[0], run[-1]
                runs.append(
                    (start.start, start.kind == "point", end.end, end.kind == "point")
                )
            i = j
        return tuple(runs)

    def count_at(self, u: Direction) -> int:
        for e in self.entries:
            if e.kind == "point" and e.start == u:
                return e.count
        # u lies strictly inside some arc; locate it by angular order
        for e in self.entries:
            if e.kind != "arc":
                continue
            if angular_cmp(e.start, u) < 0 and angular_cmp(u, e.end) < 0:
                return e.count
        # the arc wrapping past (1,0)
        for e in self.entries:
            if e.kind == "arc" and angular_cmp(e.end, e.start) < 0:
                if angular_cmp(e.start, u) < 0 or angular_cmp(u, e.end) < 0:
                    return e.count
        raise ValueError(f"direction {u} not located in sweep")

    def is_stable(self, u: Direction) -> bool:
        return self.count_at(u) < self.threshold


def stability_report(nbhd: Neighbourhood) -> StabilityReport:
    offsets = list(nbhd.offsets)
    r = nbhd.threshold
    bps = breakpoint_directions(offsets)
    entries = []
    if not bps:
        d = Direction(1, 0)
        c = 0
        entries.append(SweepEntry("arc", d, d, c, c < r))
        return StabilityReport(r, tuple(entries))
    m = len(bps)
    for i, d in enumerate(bps):
        c = negative_count(offsets, d)
        entries.append(SweepEntry("point", d, d, c, c < r))
        nxt = bps[(i + 1) % m]
        mid = _arc_midpoint(d, nxt)
        c_arc = negative_count(offsets, mid)
        entries.append(SweepEntry("arc", d, nxt, c_arc, c_arc < r))
    return StabilityReport(r, tuple(entries))


# Reference stable sets of the small models.
STABLE_SQUARE = frozenset(
    {Direction(1, 0), Direction(0, 1), Direction(-1, 0), Direction(0, -1)}
)
STABLE_TRIANGULAR = STABLE_SQUARE | {Direction(1, 1), Direction(-1, -1)}
STABLE_BOXTIMES = STABLE_TRIANGULAR | {Direction(1, -1), Direction(-1, 1)}


# ---------------------------------------------------------------------------
# Quasi-stable directions
# ---------------------------------------------------------------------------


def quasi_stable_directions(s: int) -> frozenset:
    """All primitive integer vectors with both coordinates in [-s, s]."""
    if s < 1:
        raise ValueError("s must be >= 1")
    out = set()
    for x in range(-s, s + 1):
        for y in range(-s, s + 1):
            if (x or y) and math.gcd(abs(x), abs(y)) == 1:
                out.add(Direction(x, y))
    return frozenset(out)


def consecutive_directions(q_set: Iterable[Direction], u: Direction):
    """Angular predecessor and successor of u within q_set."""
    ordered = sort_by_angle(set(q_set))
    if len(ordered) < 3:
        raise ValueError("need at least 3 directions")
    try:
        i = ordered.index(u)
    except ValueError:
        raise ValueError(f"{u} not in the direction set") from None
    n = len(ordered)
    return ordered[(i - 1) % n], ordered[(i + 1) % n]


def support_value(nbhd: Neighbourhood, u: Direction) -> int:
    """max <k, u> over the offsets, unscaled (divide by ||u|| to normalise)."""
    return max(u.dot(o) for o in nbhd.offsets)
