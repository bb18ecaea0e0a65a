"""Quasi-droplets: half-plane intersections over quasi-stable directions.

Constraints are <x, u> <= m_u with u a primitive integer normal and m_u an
integer (absent = unbounded in that direction).  All geometry is exact: the
continuum polygon has Fraction vertices, side lengths are compared through
their squared values, and lattice counting uses integer floor/ceil division.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

from .geometry import (
    Direction,
    Neighbourhood,
    Site,
    angular_cmp,
    sort_by_angle,
    stability_report,
)


def _floordiv(p: int, q: int) -> int:
    # floor(p/q) for q != 0
    return p // q if q > 0 else (-p) // (-q)


def _ceildiv(p: int, q: int) -> int:
    return -((-p) // q) if q > 0 else -(p // (-q))


class DegenerateDropletError(ValueError):
    pass


@dataclass(frozen=True)
class QuasiDroplet:
    """Intersection of half-planes <x, u> <= m_u over quasi-stable directions."""

    constraints: tuple  # sorted tuple of (Direction, int)

    @staticmethod
    def of(constraints) -> "QuasiDroplet":
        items = {}
        for u, m in (constraints.items() if isinstance(constraints, dict) else constraints):
            if not isinstance(u, Direction):
                u = Direction.of(*u)
            m = int(m)
            items[u] = min(m, items[u]) if u in items else m
        ordered = tuple((u, items[u]) for u in sort_by_angle(items))
        return QuasiDroplet(ordered)

    @property
    def directions(self) -> tuple:
        return tuple(u for u, _ in self.constraints)

    def level(self, u: Direction) -> int:
        for v, m in self.constraints:
            if v == u:
                return m
        raise KeyError(f"no constraint for direction {u}")

    def with_level(self, u: Direction, m: int) -> "QuasiDroplet":
        return QuasiDroplet(tuple((v, m if v == u else old) for v, old in self.constraints))

    def contains(self, site: Site) -> bool:
        x, y = site
        return all(u.x * x + u.y * y <= m for u, m in self.constraints)

    # -- continuum polygon -------------------------------------------------

    def polygon(self) -> list:
        """CCW Fraction vertex list of the continuum polygon (possibly empty
        or lower-dimensional); raises on unbounded constraint sets."""
        cons = self.constraints
        if not cons:
            raise DegenerateDropletError("no constraints: unbounded")
        smax = max(max(abs(u.x), abs(u.y)) for u, _ in cons)
        mmax = max(abs(m) for _, m in cons)
        B = 2 * smax * (mmax + 1) + 10
        poly = [
            (Fraction(-B), Fraction(-B)),
            (Fraction(B), Fraction(-B)),
            (Fraction(B), Fraction(B)),
            (Fraction(-B), Fraction(B)),
        ]
        for u, m in cons:
            poly = _clip(poly, u.x, u.y, m)
            if not poly:
                return []
        if any(max(abs(x), abs(y)) >= B for x, y in poly):
            raise DegenerateDropletError("constraint set does not bound the plane")
        return _dedup(poly)

    def is_empty_continuum(self) -> bool:
        return not self.polygon()

    def support(self, u: Direction, poly=None) -> Fraction:
        """max <x, u> over the continuum polygon (may be below the m_u level)."""
        poly = self.polygon() if poly is None else poly
        if not poly:
            raise DegenerateDropletError("empty droplet has no support value")
        return max(u.x * x + u.y * y for x, y in poly)

    def side_vertices(self, u: Direction, poly=None) -> list:
        """Vertices of the u-side: the face where <x, u> is maximal."""
        poly = self.polygon() if poly is None else poly
        if not poly:
            return []
        h = max(u.x * x + u.y * y for x, y in poly)
        return [(x, y) for x, y in poly if u.x * x + u.y * y == h]

    def side_length_sq(self, u: Direction, poly=None) -> Fraction:
        vs = self.side_vertices(u, poly)
        if len(vs) < 2:
            return Fraction(0)
        # project on the perpendicular to find the two extreme face vertices
        w = u.rot90()
        proj = [(w.x * x + w.y * y, (x, y)) for x, y in vs]
        (_, a), (_, b) = min(proj), max(proj)
        return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2

    def all_side_lengths_sq(self) -> dict:
        poly = self.polygon()
        return {u: self.side_length_sq(u, poly) for u in self.directions}

    # -- lattice points ----------------------------------------------------

    def row_interval(self, y: int) -> Optional[tuple[int, int]]:
        lo, hi = None, None
        for u, m in self.constraints:
            c = m - u.y * y
            if u.x > 0:
                v = _floordiv(c, u.x)
                hi = v if hi is None else min(hi, v)
            elif u.x < 0:
                v = _ceildiv(c, u.x)
                lo = v if lo is None else max(lo, v)
            elif c < 0:
                return None
        if lo is None or hi is None:
            raise DegenerateDropletError("row unbounded: missing x constraints")
        return (lo, hi) if lo <= hi else None

    def y_range(self) -> Optional[tuple[int, int]]:
        poly = self.polygon()
        if not poly:
            return None
        ys = [y for _, y in poly]
        lo, hi = math.ceil(min(ys)), math.floor(max(ys))
        return (lo, hi) if lo <= hi else None

    def lattice_points(self) -> list:
        yr = self.y_range()
        if yr is None:
            return []
        out = []
        for y in range(yr[0], yr[1] + 1):
            iv = self.row_interval(y)
            if iv is not None:
                out.extend((x, y) for x in range(iv[0], iv[1] + 1))
        return out

    def lattice_point_count(self) -> int:
        yr = self.y_range()
        if yr is None:
            return 0
        total = 0
        for y in range(yr[0], yr[1] + 1):
            iv = self.row_interval(y)
            if iv is not None:
                total += iv[1] - iv[0] + 1
        return total

    def contains_droplet(self, other: "QuasiDroplet") -> bool:
        """Constraint-wise containment (same direction set assumed)."""
        mine = dict(self.constraints)
        return all(u in mine and mine[u] >= m for u, m in other.constraints)

    def to_json(self) -> dict:
        return {"constraints": [[u.x, u.y, m] for u, m in self.constraints]}

    @staticmethod
    def from_json(obj: dict) -> "QuasiDroplet":
        return QuasiDroplet.of([((ux, uy), m) for ux, uy, m in obj["constraints"]])


def _clip(poly, a: int, b: int, m: int):
    """Sutherland-Hodgman clip of a convex polygon by a x + b y <= m."""
    if not poly:
        return []
    out = []
    n = len(poly)
    vals = [a * x + b * y - m for x, y in poly]
    for i in range(n):
        p, vp = poly[i], vals[i]
        q, vq = poly[(i + 1) % n], vals[(i + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            t = Fraction(vp, vp - vq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _dedup(poly):
    out = []
    for v in poly:
        if not out or v != out[-1]:
            out.append(v)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


# ---------------------------------------------------------------------------
# Non-degeneracy bars and extension parameters
# ---------------------------------------------------------------------------


def side_ge_cbrt(length_sq: Fraction, C: int, mult: int = 1) -> bool:
    """side >= mult * C^(1/3), exactly: (side^2)^3 >= mult^6 * C^2."""
    return length_sq ** 3 >= mult ** 6 * C * C


def side_ge_sqrt(length_sq: Fraction, C: int, mult: int = 1) -> bool:
    """side >= mult * C^(1/2), exactly: side^2 >= mult^2 * C."""
    return length_sq >= mult * mult * C


@dataclass(frozen=True)
class ExtensionParams:
    """The constant C with its derived side bars, tied to a neighbourhood."""

    nbhd: Neighbourhood
    big_C: int
    stable: frozenset = field(default=None)

    def __post_init__(self):
        if self.big_C < 1:
            raise ValueError("C must be a positive integer")
        # C^(1/3) >= ||K||  <=>  C^2 >= (||K||^2)^3
        if self.big_C ** 2 < self.nbhd.radius_sq ** 3:
            raise ValueError(
                f"C={self.big_C} too small: need C^(1/3) >= neighbourhood radius "
                f"(C^2 >= {self.nbhd.radius_sq ** 3})"
            )
        if self.stable is None:
            object.__setattr__(
                self, "stable", stability_report(self.nbhd).stable_points
            )

    def is_stable(self, u: Direction) -> bool:
        return u in self.stable

    def non_degenerate(self, qd: QuasiDroplet) -> bool:
        """Every stable side >= sqrt(C); every other side >= C^(1/3)."""
        poly = qd.polygon()
        if not poly:
            return False
        for u in qd.directions:
            lsq = qd.side_length_sq(u, poly)
            if self.is_stable(u):
                if not side_ge_sqrt(lsq, self.big_C):
                    return False
            elif not side_ge_cbrt(lsq, self.big_C):
                return False
        return True


# ---------------------------------------------------------------------------
# u-extensions
# ---------------------------------------------------------------------------


def u_extension(qd: QuasiDroplet, v: Direction, search_limit: int = 4096) -> QuasiDroplet:
    """Raise the v-level minimally so the added slab holds a lattice point.

    Levels t = m_v+1, m_v+2, ... are scanned; for each, the lattice points on
    the line <x, v> = t form a one-parameter integer family (via the extended
    gcd of v), and each remaining constraint cuts a rational interval of the
    parameter.  The first level whose interval contains an integer wins.
    """
    m_v = qd.level(v)
    a, b = v.x, v.y
    # base point of a x + b y = 1 (a, b coprime by primitivity)
    g, x0, y0 = _ext_gcd(a, b)
    assert g == 1
    others = [(u, m) for u, m in qd.constraints if u != v]
    for t in range(m_v + 1, m_v + 1 + search_limit):
        bx, by = x0 * t, y0 * t  # on the line; family (bx - b k, by + a k)
        klo, khi = None, None
        feasible = True
        for u, m in others:
            e = a * u.y - b * u.x  # coefficient of k in <point(k), u>
            rhs = m - (u.x * bx + u.y * by)
            if e > 0:
                k = _floordiv(rhs, e)
                khi = k if khi is None else min(khi, k)
            elif e < 0:
                k = _ceildiv(rhs, e)
                klo = k if klo is None else max(klo, k)
            elif rhs < 0:
                feasible = False
                break
        if not feasible:
            continue
        if (klo is None or khi is None or klo <= khi):
            return qd.with_level(v, t)
    raise DegenerateDropletError(
        f"no lattice point within {search_limit} levels above {m_v} in direction "
        f"({v.x},{v.y}); droplet too thin for an extension"
    )


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a > 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return (g, y, x - (a // b) * y)


def slab_points(before: QuasiDroplet, after: QuasiDroplet, v: Direction) -> list:
    """Lattice points of after that lie strictly outside before's v-level.

    The slab is materialised as its own (thin) droplet by tightening the
    -v constraint to <x, v> >= m_old + 1, so the cost scales with the slab,
    not with the whole droplet.
    """
    m_old = before.level(v)
    cons = dict(after.constraints)
    neg = v.neg()
    floor = -(m_old + 1)
    cons[neg] = min(cons[neg], floor) if neg in cons else floor
    return QuasiDroplet.of(cons.items()).lattice_points()


# ---------------------------------------------------------------------------
# The extension algorithm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionStep:
    droplet: QuasiDroplet
    direction: Optional[Direction]  # None for the seed entry
    kind: str  # "seed" | "unstable" | "stable"
    witness: Optional[Site] = None


@dataclass(frozen=True)
class ExtensionTrace:
    steps: tuple
    status: str  # "stalled" | "exited" | "step_limit"

    @property
    def droplets(self) -> list:
        return [s.droplet for s in self.steps]


def extension_algorithm(
    qd: QuasiDroplet,
    a_prime: Union[Iterable[Site], Callable[[Site], bool]],
    params: ExtensionParams,
    stop_bound: int,
    max_steps: int = 10_000,
) -> ExtensionTrace:
    """Grow a non-degenerate quasi-droplet by u-extensions.

    While some non-stable side is >= 2 C^(1/3), perform the unstable
    extension for the angularly first such direction.  Otherwise, for each
    stable direction whose side is >= 2 sqrt(C) (angular order), try the
    extension and accept it if a_prime holds at some site of
    (((D' \\ D) + K) \\ D): new lattice points must be attackable from the
    slab.  Stops when nothing applies (stalled), the droplet leaves the
    [-stop_bound, stop_bound]^2 box (exited), or max_steps is hit.
    """
    if not params.non_degenerate(qd):
        raise DegenerateDropletError("seed droplet violates the side bars")
    member = a_prime if callable(a_prime) else frozenset(map(tuple, a_prime)).__contains__
    C = params.big_C
    offsets = sorted(params.nbhd.offsets)

    steps = [ExtensionStep(qd, None, "seed")]
    current = qd
    status = "stalled"
    for _ in range(max_steps):
        poly = current.polygon()
        if any(max(abs(x), abs(y)) > stop_bound for x, y in poly):
            status = "exited"
            break
        advanced = False
        for u in current.directions:
            if params.is_stable(u):
                continue
            if side_ge_cbrt(current.side_length_sq(u, poly), C, mult=2):
                try:
                    current = u_extension(current, u)
                except DegenerateDropletError:
                    # the neighbouring faces cap this direction: no level
                    # above it ever captures a lattice point, so the
                    # extension does not exist; try the next direction
                    continue
                steps.append(ExtensionStep(current, u, "unstable"))
                advanced = True
                break
        if advanced:
            continue
        for u in current.directions:
            if not params.is_stable(u):
                continue
            if not side_ge_sqrt(current.side_length_sq(u, poly), C, mult=2):
                continue
            try:
                grown = u_extension(current, u)
            except DegenerateDropletError:
                continue
            witness = _stable_witness(current, grown, u, offsets, member)
            if witness is not None:
                current = grown
                steps.append(ExtensionStep(current, u, "stable", witness))
                advanced = True
                break
        if not advanced:
            status = "stalled"
            break
    else:
        status = "step_limit"
    return ExtensionTrace(tuple(steps), status)


def _stable_witness(before, after, v, offsets, member):
    seen = set()
    for p in slab_points(before, after, v):
        for (kx, ky) in offsets:
            x = (p[0] + kx, p[1] + ky)
            if x in seen:
                continue
            seen.add(x)
            if not before.contains(x) and member(x):
                return x
    return None
