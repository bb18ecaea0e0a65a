import json
from pathlib import Path

import pytest

from bperc.dynamics import Domain, closure, closure_synchronous
from bperc.scenarios import (
    ScenarioError,
    corpus_paths,
    evaluate_assertion,
    figure3_counts,
    load_corpus_scenario,
    load_scenario,
    run_scenario,
    scenario_from_json,
    scenario_schema,
)

REPO_ROOT = Path(__file__).resolve().parents[1]


def minimal_scenario(**overrides):
    obj = {
        "schema_version": 1,
        "name": "two-sites-fill-a-square",
        "domain": {"kind": "box", "d": 4},
        "neighbourhood": {"kind": "named", "name": "square"},
        "infected": [[0, 0], [1, 1]],
        "assertions": [{"type": "closure_size", "size": 4}],
    }
    obj.update(overrides)
    return obj


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


def test_corpus_is_present():
    names = [p.name for p in corpus_paths()]
    assert "square4_figure2.json" in names
    assert len(names) >= 6


def test_corpus_all_assertions_pass():
    for path in corpus_paths():
        sc = load_corpus_scenario(path.name)
        for res in run_scenario(sc):
            assert res.passed, (path.name, res.kind, res.detail)


def test_corpus_passes_under_synchronous_engine():
    # the assertions hold for the closure itself, however it is computed
    for path in corpus_paths():
        sc = load_corpus_scenario(path.name)
        cfg = closure_synchronous(sc.domain, sc.neighbourhood, sc.infected)
        for a in sc.assertions:
            assert evaluate_assertion(sc, cfg, a).passed, (path.name, a)


def test_corpus_round_trips():
    for path in corpus_paths():
        sc = load_corpus_scenario(path.name)
        again = scenario_from_json(sc.to_json())
        assert again.infected == sc.infected
        assert again.domain == sc.domain
        assert again.assertions == sc.assertions


def test_reference_window_scenario_is_exact():
    sc = load_corpus_scenario("square4_figure2.json")
    assert sc.domain.bounds == (-10, -4, 13, 4)
    assert len(sc.infected) == 88  # 86 background + 1 extra + 1 helper site
    cfg = closure(sc.domain, sc.neighbourhood, sc.infected)
    assert cfg.is_full()


def test_reference_window_without_helper_site_stalls_at_five_new():
    sc = load_corpus_scenario("square4_figure2_no_red.json")
    cfg = closure(sc.domain, sc.neighbourhood, sc.infected)
    new = cfg.infected - frozenset(sc.infected)
    assert new == {(9, 0), (5, 0), (1, 0), (-3, 0), (-7, 0)}


def test_local_counts():
    assert figure3_counts() == (16, 16, 14)


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def test_minimal_scenario_runs():
    sc = scenario_from_json(minimal_scenario())
    results = run_scenario(sc)
    assert all(r.passed for r in results)


def test_schema_violation_reports_path():
    bad = minimal_scenario()
    bad["assertions"] = [{"type": "no_such_assertion"}]
    with pytest.raises(ScenarioError) as e:
        scenario_from_json(bad, source="unit.json")
    assert "unit.json" in str(e.value)
    assert "assertions" in str(e.value)


def test_missing_required_field_rejected():
    bad = minimal_scenario()
    del bad["neighbourhood"]
    with pytest.raises(ScenarioError):
        scenario_from_json(bad)


def test_out_of_domain_infected_rejected():
    bad = minimal_scenario(infected=[[0, 0], [99, 0]])
    with pytest.raises(ScenarioError) as e:
        scenario_from_json(bad)
    assert "(99, 0)" in str(e.value)


def test_out_of_domain_assertion_site_rejected():
    bad = minimal_scenario()
    bad["assertions"] = [{"type": "closure_contains", "sites": [[50, 50]]}]
    with pytest.raises(ScenarioError):
        scenario_from_json(bad)


def test_bad_neighbourhood_rejected():
    bad = minimal_scenario(neighbourhood={"kind": "named", "name": "hexagonal"})
    with pytest.raises(ScenarioError):
        scenario_from_json(bad)


def test_frozen_only_on_framed_domains():
    bad = minimal_scenario(frozen=[[0, 1]])
    with pytest.raises(ScenarioError):
        scenario_from_json(bad)


def test_infected_grid_merges_with_site_list():
    obj = minimal_scenario()
    obj["infected"] = [[1, 1]]
    obj["infected_grid"] = {"origin": [0, 0], "text": "..\n#.\n"}
    sc = scenario_from_json(obj)
    assert sc.infected == ((0, 0), (1, 1))


def test_invalid_json_file_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{ not json }")
    with pytest.raises(ScenarioError) as e:
        load_scenario(p)
    assert "broken.json" in str(e.value)


def test_load_scenario_round_trip_via_file(tmp_path):
    p = tmp_path / "ok.json"
    p.write_text(json.dumps(minimal_scenario()))
    sc = load_scenario(p)
    assert sc.name == "two-sites-fill-a-square"


def test_schema_file_in_repo_matches_packaged_schema():
    repo_schema = json.loads((REPO_ROOT / "schema" / "scenario.v1.json").read_text())
    assert repo_schema == scenario_schema()


# ---------------------------------------------------------------------------
# Assertions on computed closures
# ---------------------------------------------------------------------------


def test_closure_size_failure_has_detail():
    obj = minimal_scenario()
    obj["assertions"] = [{"type": "closure_size", "size": 7}]
    res = run_scenario(scenario_from_json(obj))[0]
    assert not res.passed and "4 != 7" in res.detail


def test_rectangle_assertion_torus():
    # a full row plus a pitch-4 site grid fills the torus under the square
    # model: a 1 x n rectangle seeds row growth and every fourth row follows
    n = 16
    infected = [[x, 0] for x in range(n)]
    infected += [[x, y] for x in range(n) for y in range(n) if (x + y) % 4 == 0]
    obj = {
        "schema_version": 1,
        "name": "row-plus-grid-fills-torus",
        "domain": {"kind": "torus", "n": n},
        "neighbourhood": {"kind": "named", "name": "square"},
        "infected": infected,
        "assertions": [
            {"type": "contains_rectangle", "width": 1, "length": 16,
             "direction": [1, 0]},
            {"type": "closure_equals_domain"},
        ],
    }
    results = run_scenario(scenario_from_json(obj))
    assert all(r.passed for r in results)


def test_rectangle_assertion_wraps_around_torus():
    obj = {
        "schema_version": 1,
        "name": "wrapping-block",
        "domain": {"kind": "torus", "n": 8},
        "neighbourhood": {"kind": "named", "name": "square"},
        "infected": [[x % 8, y] for x in range(6, 10) for y in range(8)],
        "assertions": [
            {"type": "contains_rectangle", "width": 4, "length": 8,
             "direction": [0, 1]},
        ],
    }
    res = run_scenario(scenario_from_json(obj))[0]
    assert res.passed  # the 4 x 8 block straddles the seam


def test_rectangle_assertion_failure_detail():
    obj = minimal_scenario()
    obj["assertions"] = [{"type": "contains_rectangle", "width": 3,
                          "length": 3, "direction": [1, 0]}]
    res = run_scenario(scenario_from_json(obj))[0]
    assert not res.passed and "3x3" in res.detail
