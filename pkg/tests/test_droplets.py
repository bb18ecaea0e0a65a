import random

import pytest

from bperc.droplets import (
    SQUARE_DIRS,
    TRIANGULAR_DIRS,
    Droplet,
    canonical_radii,
    droplet_algorithm,
    droplet_union,
    internally_filled,
    model_neighbourhood,
    single_site_growth_check,
    smallest_containing,
)
from bperc.dynamics import Domain, closure


def random_droplet(rng, model, max_radius=40):
    dirs = TRIANGULAR_DIRS if model == "triangular" else SQUARE_DIRS
    while True:
        radii = [rng.randint(-6, max_radius) for _ in dirs]
        d = canonical_radii(model, radii)
        if not d.is_empty:
            return d


def adjacent_outside_site(rng, d, nbhd):
    """A K-neighbour of the droplet just past a random extreme point."""
    k = rng.choice([o for o in nbhd.offsets if o != (0, 0)])
    best = None
    for y, (lo, hi) in d.rows():
        for px in (lo, hi):
            v = k[0] * px + k[1] * y
            if best is None or v > best[0]:
                best = (v, (px, y))
    p = best[1]
    x = (p[0] + k[0], p[1] + k[1])
    return x if not d.contains(x) else None


# ---------------------------------------------------------------------------
# Canonicalisation
# ---------------------------------------------------------------------------


def test_canonical_is_idempotent_square():
    d = canonical_radii("square", (3, 2, 0, 0))
    assert d.radii == (3, 2, 0, 0)
    assert canonical_radii("square", d.radii).radii == d.radii


def test_singleton_droplet():
    d = Droplet.singleton("square", (0, 0))
    assert d.radii == (0, 0, 0, 0)
    assert d.points() == {(0, 0)}
    t = Droplet.singleton("triangular", (2, -1))
    assert t.points() == {(2, -1)}


def test_triangular_reduction_by_diagonal():
    # a tight diagonal makes the nominal left radius unreachable
    d = canonical_radii("triangular", (5, 5, 5, 5, -1, 5))
    # constraint x+y <= -1 cuts the rectangle corner; radii must be minimal
    pts = d.points()
    for u, l in zip(TRIANGULAR_DIRS, d.radii):
        assert max(u[0] * x + u[1] * y for x, y in pts) == l


def test_canonical_matches_point_set_maxima():
    rng = random.Random(1)
    for model in ("square", "triangular"):
        dirs = TRIANGULAR_DIRS if model == "triangular" else SQUARE_DIRS
        for _ in range(50):
            d = random_droplet(rng, model, max_radius=15)
            pts = d.points()
            for u, l in zip(dirs, d.radii):
                assert max(u[0] * x + u[1] * y for x, y in pts) == l


def test_empty_droplet():
    d = canonical_radii("square", (-3, 0, 0, 0))
    assert d.is_empty and d.points() == set()


# ---------------------------------------------------------------------------
# smallest_containing
# ---------------------------------------------------------------------------


def test_smallest_containing_inside_is_identity():
    d = canonical_radii("square", (3, 2, 0, 0))
    assert smallest_containing(d, (1, 1)) is d


def test_smallest_containing_rectangle_example():
    d = canonical_radii("square", (3, 2, 0, 0))  # {0..3} x {0..2}
    grown = smallest_containing(d, (1, 3))
    assert grown.points() == {(x, y) for x in range(4) for y in range(4)}


def test_smallest_containing_from_empty():
    d = smallest_containing(Droplet.empty("triangular"), (4, -2))
    assert d.points() == {(4, -2)}


def brute_minimal_droplet(model, base_points, site):
    """Oracle: minimal radii over the point set base + site, then checked
    minimal coordinate-wise by decrement."""
    dirs = TRIANGULAR_DIRS if model == "triangular" else SQUARE_DIRS
    pts = set(base_points) | {site}
    radii = tuple(max(u[0] * x + u[1] * y for x, y in pts) for u in dirs)
    return canonical_radii(model, radii)


def test_smallest_containing_matches_oracle():
    rng = random.Random(4)
    for model in ("square", "triangular"):
        nb = model_neighbourhood(model)
        for _ in range(60):
            d = random_droplet(rng, model, max_radius=12)
            x = adjacent_outside_site(rng, d, nb)
            if x is None:
                continue
            grown = smallest_containing(d, x)
            oracle = brute_minimal_droplet(model, d.points(), x)
            assert grown.radii == oracle.radii
            assert grown.points() >= d.points() | {x}


# ---------------------------------------------------------------------------
# Single-site growth: a droplet plus an adjacent site fills its hull
# ---------------------------------------------------------------------------


def test_growth_rectangle_example():
    d = canonical_radii("square", (3, 2, 0, 0))
    nb = model_neighbourhood("square")
    assert single_site_growth_check(d, (1, 3), nb)


@pytest.mark.parametrize("model", ["square", "triangular"])
def test_growth_random_pairs(model):
    rng = random.Random(17)
    nb = model_neighbourhood(model)
    checked = 0
    while checked < 150:
        d = random_droplet(rng, model)
        x = adjacent_outside_site(rng, d, nb)
        if x is None:
            continue
        assert single_site_growth_check(d, x, nb), (model, d.radii, x)
        checked += 1


def test_growth_check_rejects_other_models():
    d = Droplet("diamond", (0, 0, 0, 0))
    with pytest.raises(ValueError):
        single_site_growth_check(d, (1, 1), model_neighbourhood("square"))


# ---------------------------------------------------------------------------
# internally_filled
# ---------------------------------------------------------------------------


def test_internally_filled_cases():
    nb = model_neighbourhood("square")
    single = Droplet.singleton("square", (2, 2))
    assert internally_filled(single, [(2, 2)], nb)
    two = canonical_radii("square", (1, 1, 0, 0))  # the 2x2 square
    assert internally_filled(two, [(0, 0), (1, 1)], nb)
    assert internally_filled(two, [(0, 1), (1, 0), (9, 9)], nb)
    assert not internally_filled(two, [(0, 0)], nb)
    assert not internally_filled(two, [], nb)


# ---------------------------------------------------------------------------
# Droplet algorithm
# ---------------------------------------------------------------------------


def test_droplet_algorithm_empty():
    assert droplet_algorithm([], "square") == []


def test_droplet_algorithm_pair():
    out = droplet_algorithm([(0, 0), (1, 1)], "square")
    assert len(out) == 1
    assert out[0].points() == {(0, 0), (0, 1), (1, 0), (1, 1)}


@pytest.mark.parametrize("model", ["square", "triangular"])
def test_droplet_algorithm_equals_closure(model):
    rng = random.Random(23)
    nb = model_neighbourhood(model)
    for trial in range(25):
        n = rng.choice([16, 32, 64])
        density = rng.uniform(0.01, 0.2)
        sites = [
            (x, y) for x in range(n) for y in range(n) if rng.random() < density
        ]
        dom = Domain.rect(-2, -2, n + 1, n + 1)
        expect = set(closure(dom, nb, sites).infected)
        unions = []
        for strategy in ("scan", "random"):
            out = droplet_algorithm(sites, model, strategy=strategy, seed=trial)
            u = droplet_union(out)
            assert u == expect, (model, n, density, strategy)
            for d in out:
                assert internally_filled(d, sites, nb)
            unions.append(u)
        assert unions[0] == unions[1]  # strategy independence of the union


def test_droplet_algorithm_rejects_unknown_model():
    with pytest.raises(ValueError):
        droplet_algorithm([(0, 0)], "diamond")
    with pytest.raises(ValueError):
        droplet_algorithm([(0, 0)], "square", strategy="bogus")


def test_droplet_json_round_trip():
    d = canonical_radii("triangular", (3, 2, 1, 1, 4, 2))
    assert Droplet.from_json(d.to_json()).radii == d.radii
