"""Scenario documents: parsing, presets, overrides, the echo round trip."""

import json

import numpy as np
import pytest

from satsync.errors import ValidationError
from satsync.presets import preset_names, preset_scenario
from satsync.scenario import (
    build_scenario,
    parse_scenario,
    parse_scenario_doc,
    scenario_echo,
)
from satsync.simulation import simulate

MINIMAL = {
    "model": {"a": [[0, 1], [-1, 0]], "b": [[0], [1]]},
    "graph": {"n": 2, "edges": [{"from": 1, "to": 2}], "roots": [1]},
    "protocol": {"kind": "P2"},
}


def doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    for key, val in changes.items():
        d[key] = val
    return d


def test_minimal_document_defaults():
    parts = parse_scenario_doc(doc())
    assert parts.name == "scenario"
    assert parts.dt == 1e-3
    assert parts.horizon == 30.0
    assert parts.record_every == 1
    assert parts.tol == 1e-2
    assert parts.window is None
    assert np.array_equal(parts.x_r0, np.zeros(2))
    assert parts.x0.shape == (2, 2)
    # gains were synthesized because none were given
    assert parts.gains.p is not None and parts.gains.f is not None


def test_full_state_kind_implies_full_coupling():
    d = doc(protocol={"kind": "P1"})
    d["model"] = {"a": [[0, 1], [-1, 0]], "b": [[0], [1]]}  # c defaults to identity
    parts = parse_scenario_doc(d)
    assert parts.model.coupling == "full"
    parts2 = parse_scenario_doc(doc())
    assert parts2.model.coupling == "partial"


def test_unknown_keys_rejected_with_paths():
    cases = [
        (doc(extra=1), "unknown keys 'extra'"),
        (doc(sim={"dtt": 0.1}), "sim: unknown keys 'dtt'"),
        (doc(model={"a": [[0]], "b": [[1]], "cc": [[1]]}), "model: unknown keys 'cc'"),
        (doc(protocol={"kind": "P2", "gains": {"q": [[1]]}}), "protocol.gains: unknown keys 'q'"),
        (doc(analysis={"tol": 0.1, "x": 2}), "analysis: unknown keys 'x'"),
    ]
    for bad, fragment in cases:
        with pytest.raises(ValidationError, match=fragment.replace("'", "'")):
            parse_scenario_doc(bad)


def test_malformed_values_name_their_field():
    with pytest.raises(ValidationError, match="sim.dt"):
        parse_scenario_doc(doc(sim={"dt": -1.0}))
    with pytest.raises(ValidationError, match="protocol.kind"):
        parse_scenario_doc(doc(protocol={"kind": "P99"}))
    with pytest.raises(ValidationError, match="model: a must be square"):
        parse_scenario_doc(doc(model={"a": [[0, 1]], "b": [[1]]}))
    with pytest.raises(ValidationError, match="graph"):
        parse_scenario_doc(doc(graph={"n": 2, "edges": [], "roots": [5]}))


def test_required_sections():
    for missing in ("model", "graph", "protocol"):
        bad = doc()
        del bad[missing]
        with pytest.raises(ValidationError, match=missing):
            parse_scenario_doc(bad)


def test_bad_json_bytes():
    with pytest.raises(ValidationError, match="JSON"):
        parse_scenario_doc(b"{nope")


def test_preset_expansion():
    assert preset_names() == ("example1", "example2")
    parts = parse_scenario_doc({"model": {"preset": "example1"}})
    assert parts.name == "example1"
    assert parts.kind == "P4"
    assert parts.graph.n == 3
    assert parts.horizon == 30.0
    # user keys merge over the preset
    parts2 = parse_scenario_doc({"model": {"preset": "example1"}, "name": "mine",
                                 "sim": {"dt": 0.01}})
    assert parts2.name == "mine"
    assert parts2.dt == 0.01
    assert parts2.horizon == 30.0


def test_preset_graph_is_replaced_not_merged():
    # a user graph in another form must not inherit the preset's inline keys
    parts = parse_scenario_doc({
        "model": {"preset": "example1"},
        "graph": {"generate": {"kind": "random", "n": 6, "seed": 2}},
    })
    assert parts.graph.n == 6


def test_preset_rejects_inline_mix_and_unknown():
    with pytest.raises(ValidationError, match="preset"):
        parse_scenario_doc({"model": {"preset": "example1", "a": [[0]]}})
    with pytest.raises(ValidationError, match="available"):
        parse_scenario_doc({"model": {"preset": "zzz"}})


def test_preset_scenario_returns_fresh_copies():
    a = preset_scenario("example1")
    a["sim"]["dt"] = 123.0
    b = preset_scenario("example1")
    assert b["sim"]["dt"] == 0.001


def test_overrides_win_and_leave_doc_untouched():
    base = doc()
    parts = parse_scenario_doc(base, overrides={"sim.dt": 0.05, "protocol.rho": 3.0})
    assert parts.dt == 0.05
    assert parts.gains.rho == 3.0
    assert "sim" not in base  # caller's document not mutated


def test_explicit_x0_wins_over_ic_scale():
    d = doc(sim={"x0": [[1.0, 2.0], [3.0, 4.0]], "ic_scale": 99.0})
    parts = parse_scenario_doc(d)
    assert np.array_equal(parts.x0, np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_ic_generation_is_seeded():
    a = parse_scenario_doc(doc(sim={"seed": 9}))
    b = parse_scenario_doc(doc(sim={"seed": 9}))
    c = parse_scenario_doc(doc(sim={"seed": 10}))
    assert np.array_equal(a.x0, b.x0)
    assert not np.array_equal(a.x0, c.x0)


def test_graph_generate_form_requires_seed():
    d = doc(graph={"generate": {"kind": "random", "n": 4}})
    with pytest.raises(ValidationError, match="seed"):
        parse_scenario_doc(d)
    d = doc(graph={"generate": {"kind": "random", "n": 4, "seed": 2}})
    parts = parse_scenario_doc(d)
    assert parts.graph.n == 4
    assert parts.graph.roots() == [1]  # default root


def test_graph_file_form(tmp_path):
    gpath = tmp_path / "net.json"
    gpath.write_text(json.dumps(MINIMAL["graph"]))
    d = doc(graph={"file": "net.json"})
    parts = parse_scenario_doc(d, base_dir=tmp_path)
    assert parts.graph.n == 2


def test_echo_reproduces_run_byte_for_byte():
    d = doc(sim={"seed": 4, "horizon": 2.0, "dt": 0.01})
    sc = build_scenario(parse_scenario_doc(d))
    rec1 = simulate(sc)
    echo = scenario_echo(sc)
    # the echo pins generated values: x0 appears explicitly
    assert "x0" in echo["sim"]
    sc2 = parse_scenario(json.dumps(echo).encode())
    rec2 = simulate(sc2)
    for field in ("times", "x_r", "x", "chi", "u", "sat_u"):
        assert np.array_equal(getattr(rec1, field), getattr(rec2, field))
    # echoing the rebuilt scenario is a fixed point
    assert scenario_echo(sc2) == echo


def test_explicit_gains_skip_synthesis():
    d = doc(protocol={"kind": "P2", "rho": 2.0,
                      "gains": {"p": [[1, 0], [0, 1]], "f": [[1], [1]]}})
    parts = parse_scenario_doc(d)
    assert np.array_equal(parts.gains.p, np.eye(2))
    assert parts.gains.rho == 2.0
