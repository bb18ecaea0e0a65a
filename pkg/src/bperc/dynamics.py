"""Closure dynamics on finite domains.

Two engines compute the same thing:

* an event-driven engine (per-site infected-neighbour counters plus a round
  queue) used as the primary implementation, and
* a vectorised synchronous engine (numpy shifts) used for oracle checks and
  for bulk droplet verification.

Both report per-site generation times with synchronous-round semantics: a
site's time is the first parallel round at which it has >= r infected
neighbours, never "1 + max over chosen parents".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .geometry import Neighbourhood, Site


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """Finite playing field: torus(n), a box of lattice sites (the centred
    [-d,d]^2 square or a general rectangle), or a box with a permanently
    infected frozen set (kind "framed_box")."""

    kind: str  # "torus" | "box" | "framed_box"
    n: int = 0  # torus side
    x0: int = 0
    y0: int = 0
    x1: int = 0
    y1: int = 0
    frozen: frozenset = frozenset()

    @staticmethod
    def torus(n: int) -> "Domain":
        if n < 1:
            raise ValueError("torus side must be positive")
        return Domain("torus", n=n)

    @staticmethod
    def box(d: int) -> "Domain":
        if d < 0:
            raise ValueError("box half-width must be nonnegative")
        return Domain("box", x0=-d, y0=-d, x1=d, y1=d)

    @staticmethod
    def rect(x0: int, y0: int, x1: int, y1: int) -> "Domain":
        if x0 > x1 or y0 > y1:
            raise ValueError("empty rectangle")
        return Domain("box", x0=x0, y0=y0, x1=x1, y1=y1)

    @staticmethod
    def framed_box(d: int, frozen: Iterable[Site]) -> "Domain":
        return Domain.framed_rect(-d, -d, d, d, frozen)

    @staticmethod
    def framed_rect(x0, y0, x1, y1, frozen: Iterable[Site]) -> "Domain":
        frozen = frozenset(map(tuple, frozen))
        dom = Domain("framed_box", x0=x0, y0=y0, x1=x1, y1=y1, frozen=frozen)
        bad = [s for s in frozen if not dom.contains(s)]
        if bad:
            raise ValueError(f"frozen sites outside box: {sorted(bad)[:5]}")
        return dom

    @property
    def d(self) -> int:
        """Half-width of a centred square box (raises for other shapes)."""
        if self.kind == "torus" or (-self.x0, -self.y0) != (self.x1, self.y1) \
                or self.x1 != self.y1:
            raise ValueError("domain is not a centred square box")
        return self.x1

    def contains(self, site: Site) -> bool:
        x, y = site
        if self.kind == "torus":
            return 0 <= x < self.n and 0 <= y < self.n
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        """(xmin, ymin, xmax, ymax), inclusive."""
        if self.kind == "torus":
            return (0, 0, self.n - 1, self.n - 1)
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def size(self) -> int:
        if self.kind == "torus":
            return self.n * self.n
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)

    def sites(self):
        xmin, ymin, xmax, ymax = self.bounds
        for x in range(xmin, xmax + 1):
            for y in range(ymin, ymax + 1):
                yield (x, y)

    def validate_for(self, nbhd: Neighbourhood) -> None:
        if self.kind == "torus" and self.n < 2 * nbhd.radius_ceil + 1:
            raise ValueError(
                f"torus side {self.n} too small for neighbourhood radius "
                f"{nbhd.radius:.3f}: need n >= {2 * nbhd.radius_ceil + 1} so "
                "distinct offsets stay distinct on the torus"
            )

    def wrap(self, x: int, y: int) -> Optional[Site]:
        """Map a raw coordinate into the domain; None when it falls outside."""
        if self.kind == "torus":
            return (x % self.n, y % self.n)
        if self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1:
            return (x, y)
        return None


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """Infected-site snapshot with (optional) per-site generation times.

    ``generation`` counts synchronous rounds applied so far; frozen sites are
    infected with time 0 but excluded from closure-size statistics.
    """

    domain: Domain
    infected: frozenset
    times: Optional[dict] = None
    generation: int = 0

    @property
    def size(self) -> int:
        """Number of infected sites, frozen frame excluded."""
        return len(self.infected) - len(self.domain.frozen & self.infected)

    def is_full(self) -> bool:
        return len(self.infected) == self.domain.size

    def time_of(self, site: Site) -> int:
        return self.times[tuple(site)]

    @staticmethod
    def initial(domain: Domain, initial: Iterable[Site]) -> "Configuration":
        initial = frozenset(map(tuple, initial))
        bad = [s for s in initial if not domain.contains(s)]
        if bad:
            raise ValueError(f"initial sites outside domain: {sorted(bad)[:5]}")
        infected = initial | domain.frozen
        return Configuration(domain, infected, {s: 0 for s in infected}, 0)


# ---------------------------------------------------------------------------
# Event-driven closure
# ---------------------------------------------------------------------------


def closure(
    domain: Domain,
    nbhd: Neighbourhood,
    initial: Iterable[Site],
    region: Optional[Iterable[Site]] = None,
) -> Configuration:
    """Least fixed point of the threshold rule, with generation times.

    ``region``, if given, limits which sites may become infected (the
    restricted closure); initial sites outside it stay infected but inert
    targets.  Counters are pushed: each newly infected y raises the count of
    every x with y in x + offsets, i.e. x = y - k.
    """
    domain.validate_for(nbhd)
    cfg = Configuration.initial(domain, initial)
    allowed = None if region is None else frozenset(map(tuple, region))
    if allowed is not None:
        bad = [s for s in allowed if not domain.contains(s)]
        if bad:
            raise ValueError(f"region sites outside domain: {sorted(bad)[:5]}")

    r = nbhd.threshold
    offsets = [o for o in nbhd.offsets if o != (0, 0)]
    infected = set(cfg.infected)
    times = dict(cfg.times)
    counts: dict = {}
    frontier = list(infected)
    generation = 0
    wrap = domain.wrap
    while frontier:
        # raise counters for everything infected in this round
        next_frontier = []
        for (yx, yy) in frontier:
            for (kx, ky) in offsets:
                x = wrap(yx - kx, yy - ky)
                if x is None or x in infected:
                    continue
                if allowed is not None and x not in allowed:
                    continue
                c = counts.get(x, 0) + 1
                counts[x] = c
                if c == r:
                    next_frontier.append(x)
        if not next_frontier:
            break
        generation += 1
        for x in next_frontier:
            infected.add(x)
            times[x] = generation
        frontier = next_frontier
    return Configuration(domain, frozenset(infected), times, generation)


def restricted_closure(
    domain: Domain, nbhd: Neighbourhood, initial: Iterable[Site], region: Iterable[Site]
) -> Configuration:
    """Closure where only sites inside ``region`` may become infected."""
    return closure(domain, nbhd, initial, region=region)


# ---------------------------------------------------------------------------
# Synchronous engine (numpy)
# ---------------------------------------------------------------------------


def _to_grid(domain: Domain, sites: Iterable[Site]) -> np.ndarray:
    xmin, ymin, xmax, ymax = domain.bounds
    g = np.zeros((xmax - xmin + 1, ymax - ymin + 1), dtype=bool)
    for (x, y) in sites:
        g[x - xmin, y - ymin] = True
    return g


def _from_grid(domain: Domain, grid: np.ndarray) -> frozenset:
    xmin, ymin, _, _ = domain.bounds
    xs, ys = np.nonzero(grid)
    return frozenset(zip((xs + xmin).tolist(), (ys + ymin).tolist()))


def _neighbour_counts(domain: Domain, nbhd: Neighbourhood, grid: np.ndarray) -> np.ndarray:
    offsets = [o for o in nbhd.offsets if o != (0, 0)]
    counts = np.zeros(grid.shape, dtype=np.int32)
    if domain.kind == "torus":
        for (kx, ky) in offsets:
            counts += np.roll(grid, (-kx, -ky), axis=(0, 1))
    else:
        R = nbhd.radius_ceil
        W, H = grid.shape
        padded = np.zeros((W + 2 * R, H + 2 * R), dtype=np.int32)
        padded[R : R + W, R : R + H] = grid
        for (kx, ky) in offsets:
            counts += padded[R + kx : R + kx + W, R + ky : R + ky + H]
    return counts


def synchronous_step(cfg: Configuration, nbhd: Neighbourhood) -> Configuration:
    """One parallel application of the rule; identity on closed configurations."""
    cfg.domain.validate_for(nbhd)
    grid = _to_grid(cfg.domain, cfg.infected)
    counts = _neighbour_counts(cfg.domain, nbhd, grid)
    new = (counts >= nbhd.threshold) & ~grid
    if not new.any():
        return cfg
    xmin, ymin, _, _ = cfg.domain.bounds
    xs, ys = np.nonzero(new)
    added = list(zip((xs + xmin).tolist(), (ys + ymin).tolist()))
    times = dict(cfg.times) if cfg.times is not None else None
    g = cfg.generation + 1
    if times is not None:
        for s in added:
            times[s] = g
    return Configuration(cfg.domain, cfg.infected | frozenset(added), times, g)


def closure_synchronous(
    domain: Domain,
    nbhd: Neighbourhood,
    initial: Iterable[Site],
    region: Optional[Iterable[Site]] = None,
) -> Configuration:
    """Iterated synchronous fixed point; vectorised, same contract as closure()."""
    domain.validate_for(nbhd)
    cfg = Configuration.initial(domain, initial)
    grid = _to_grid(domain, cfg.infected)
    mask = None if region is None else _to_grid(domain, map(tuple, region))
    times = dict(cfg.times)
    xmin, ymin, _, _ = domain.bounds
    r = nbhd.threshold
    g = 0
    while True:
        counts = _neighbour_counts(domain, nbhd, grid)
        new = (counts >= r) & ~grid
        if mask is not None:
            new &= mask
        if not new.any():
            break
        g += 1
        xs, ys = np.nonzero(new)
        for x, y in zip((xs + xmin).tolist(), (ys + ymin).tolist()):
            times[(x, y)] = g
        grid |= new
    return Configuration(domain, _from_grid(domain, grid), times, g)


def is_closed(cfg: Configuration, nbhd: Neighbourhood) -> bool:
    grid = _to_grid(cfg.domain, cfg.infected)
    counts = _neighbour_counts(cfg.domain, nbhd, grid)
    return not ((counts >= nbhd.threshold) & ~grid).any()


# ---------------------------------------------------------------------------
# Infection graph and the good-vertex diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfectionGraph:
    """r chosen parents per infected non-initial vertex, plus the 0.9r test."""

    edges: dict  # v -> tuple of r selected in-neighbours
    out_degree: dict  # u -> number of vertices that selected u
    good: dict  # v in closure minus initial -> bool
    rule: str

    @property
    def good_count(self) -> int:
        return sum(1 for v in self.good.values() if v)


def infection_graph(
    cfg: Configuration,
    nbhd: Neighbourhood,
    rule: str = "lex",
    seed: int = 0,
) -> InfectionGraph:
    """Build the parent-selection graph from a closure's generation times.

    rule "lex": among strictly-earlier infected neighbours, prefer earlier
    generation, then lexicographically smaller offset.  rule "random": a
    seeded uniform choice of r of them.
    """
    if cfg.times is None:
        raise ValueError("configuration lacks generation times")
    if not is_closed(cfg, nbhd):
        raise ValueError("configuration is not closed")
    if rule not in ("lex", "random"):
        raise ValueError(f"unknown selection rule {rule!r}")
    import random as _random

    rng = _random.Random(seed)
    r = nbhd.threshold
    offsets = sorted(o for o in nbhd.offsets if o != (0, 0))
    wrap = cfg.domain.wrap
    edges = {}
    out_degree = {}
    good = {}
    for v in cfg.infected:
        tv = cfg.times[v]
        if tv == 0:
            continue
        cands = []
        for k in offsets:
            u = wrap(v[0] + k[0], v[1] + k[1])
            if u is not None and u in cfg.infected and cfg.times[u] < tv:
                cands.append((cfg.times[u], k, u))
        if len(cands) < r:
            raise ValueError(f"site {v} has only {len(cands)} earlier-infected "
                             "neighbours; generation times are corrupt")
        if rule == "lex":
            cands.sort()
            chosen = [u for _, _, u in cands[:r]]
        else:
            chosen = [u for _, _, u in rng.sample(cands, r)]
        edges[v] = tuple(chosen)
        for u in chosen:
            out_degree[u] = out_degree.get(u, 0) + 1
    bar = math.ceil(0.9 * r)
    for v in cfg.infected:
        if cfg.times[v] > 0:
            good[v] = out_degree.get(v, 0) >= bar
    return InfectionGraph(edges, out_degree, good, rule)


# ---------------------------------------------------------------------------
# Grid text format
# ---------------------------------------------------------------------------


def to_grid_text(cfg: Configuration) -> str:
    """Rows of '.', '#', 'F' (healthy / infected / frozen), top row = max y."""
    xmin, ymin, xmax, ymax = cfg.domain.bounds
    rows = []
    for y in range(ymax, ymin - 1, -1):
        row = []
        for x in range(xmin, xmax + 1):
            s = (x, y)
            if s in cfg.domain.frozen:
                row.append("F")
            elif s in cfg.infected:
                row.append("#")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows) + "\n"


def parse_grid_text(text: str, origin: Site = (0, 0)) -> tuple[list, list]:
    """Inverse of to_grid_text: returns (infected, frozen) site lists.

    ``origin`` is the (x, y) of the bottom-left character.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return [], []
    width = len(lines[0])
    if any(len(ln) != width for ln in lines):
        raise ValueError("grid rows have unequal length")
    ox, oy = origin
    infected, frozen = [], []
    height = len(lines)
    for row, line in enumerate(lines):
        y = oy + (height - 1 - row)
        for col, ch in enumerate(line):
            x = ox + col
            if ch == "#":
                infected.append((x, y))
            elif ch == "F":
                frozen.append((x, y))
            elif ch != ".":
                raise ValueError(f"unexpected grid character {ch!r}")
    return infected, frozen
