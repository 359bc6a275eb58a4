import json

import numpy as np
import pytest

from stlrepair.repair import diagnose_repair
from stlrepair.scenarios import (
    Scenario, ScenarioError, builtin_scenarios, load_scenario,
)
from stlrepair.synthesis import mpc_run


def minimal_doc():
    return {
        "system": {
            "states": ["x"], "inputs": ["u"],
            "A": [[1]], "B": [[1]], "delta_t": 1.0, "x0": [0],
            "bounds": {"x": [-100, 100], "u": [-5, 5]},
        },
        "spec": {"formula": "G[0,3] x >= -1"},
        "solver": {"horizon": 4},
    }


def test_builtin_list():
    names = builtin_scenarios()
    assert names == ["aircraft_eps", "collision_avoidance", "lane_change",
                     "left_turn", "race_adversarial", "race_nonadversarial"]


def test_load_from_file(tmp_path):
    p = tmp_path / "toy.json"
    p.write_text(json.dumps(minimal_doc()))
    sc = load_scenario(str(p))
    assert sc.name == "toy"
    assert sc.horizon == 4
    assert sc.spec_formula().pretty() == "G[0,3] (x >= -1)"


def test_unknown_name_lists_builtins():
    with pytest.raises(ScenarioError, match="race_adversarial"):
        load_scenario("no_such_scenario")


def test_missing_spec_block():
    doc = minimal_doc()
    del doc["spec"]
    with pytest.raises(ScenarioError, match="spec"):
        Scenario(doc)


def test_error_paths_name_fields():
    doc = minimal_doc()
    doc["system"]["delta_t"] = "fast"
    with pytest.raises(ScenarioError, match="system.delta_t"):
        Scenario(doc)
    doc = minimal_doc()
    doc["system"]["bounds"]["z"] = [0, 1]
    with pytest.raises(ScenarioError, match="system.bounds.z"):
        Scenario(doc)
    doc = minimal_doc()
    doc["spec"] = {"formula": "G[0,3] q >= 0"}
    with pytest.raises(ScenarioError, match="unknown variable 'q'"):
        Scenario(doc)
    doc = minimal_doc()
    doc["spec"]["assumption"] = "x >= 0"
    with pytest.raises(ScenarioError, match="exactly one"):
        Scenario(doc)


def test_race_nonadversarial_setup():
    sc = load_scenario("race_nonadversarial")
    assert sc.model.delta_t == pytest.approx(0.2)
    assert sc.horizon == 10
    # ego starts at rest, adversary at 0.55
    assert sc.model.x0 == pytest.approx([0.0, 0.55])
    w = sc.w_seq()
    assert w.shape == (10, 1)
    assert np.all(w == 1.0)


def test_race_weight_profiles_split_contract_sides():
    sc = load_scenario("race_nonadversarial")
    table = sc.weights("relax_guarantee")
    lam_a = table[sc.assumption.node_id]
    lam_g = [table[n.node_id] for n in sc.guarantee.predicates()]
    assert lam_a == 100.0
    assert all(v == 1.0 for v in lam_g)
    flipped = sc.weights("relax_assumption")
    assert flipped[sc.assumption.node_id] == 1.0


def test_collision_avoidance_setup():
    sc = load_scenario("collision_avoidance")
    assert sc.w_const == {"a_adv": 2.0}
    # both cars 1 m out, at rest
    assert sc.model.x0 == pytest.approx([-1, 0, -1, 0])
    assert sc.profile_slack_mode("box") == "per_time"
    assert sc.profile_slack_mode("accel") == "shared"


def test_collision_avoidance_infeasible_at_first_mpc_solve():
    sc = load_scenario("collision_avoidance")
    res = mpc_run(sc.synthesis_problem(), steps=2)
    assert res.status == "infeasible"
    assert res.infeasible_step == 0


def test_lane_change_and_left_turn_repairable():
    for name in ("lane_change", "left_turn"):
        sc = load_scenario(name)
        out = diagnose_repair(sc.synthesis_problem(), weights=sc.weights())
        assert out.status == "repaired", name
        assert out.controller.feasible, name


def test_adversarial_scenarios_build_contract_problems():
    sc = load_scenario("race_adversarial")
    cp = sc.contract_problem()
    assert cp.w_box == {"a_adv": (0.0, 2.0)}
    assert cp.assumption is None
    eps = load_scenario("aircraft_eps")
    cpe = eps.contract_problem()
    assert cpe.assumption is not None
    assert eps.model.kinds["c2cmd"] == "binary"


def test_candidate_repairs_resolve():
    sc = load_scenario("aircraft_eps")
    assert len(sc.candidate_repairs) == 3
    # delay thresholds move from 4 to 2 ticks
    cp0 = sc.apply_candidate_repair(0)
    assert "tau > 1.5" in cp0.assumption.pretty()
    cp1 = sc.apply_candidate_repair(1)
    assert "z > 1.5" in cp1.assumption.pretty()
    # recovery window stretches to 160 ms
    cp2 = sc.apply_candidate_repair(2)
    assert "F[0,0.16]" in cp2.guarantee.pretty()
