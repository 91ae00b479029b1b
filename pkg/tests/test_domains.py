import json

import pytest

from ocplan.domains import (
    DomainStyle,
    EncodingError,
    build_domain,
    build_o2o,
    check_consistency,
    contact_pairs,
    encode_scenario,
    parse_style,
    stack_goal,
)
from ocplan.model import Atom, ORIENTATIONS, PLANAR_OBSERVER_SIDES
from ocplan.pddl import parse_domain, print_domain
from ocplan.planner import execute, ground, solve
from ocplan.simworld import generate_scenario


def test_style_aliases():
    assert parse_style("oc") is DomainStyle.OBJECT_CENTERED
    assert parse_style("hybrid") is DomainStyle.HYBRID
    with pytest.raises(ValueError):
        parse_style("observer")


def test_object_centered_pick_parameter_list():
    pick = build_domain("oc").schema("pick")
    assert pick.params == ("?obj-hand", "?obj", "?loc", "?obj-loc", "?loc-obj", "?obj-force")


def test_hybrid_place_checks_opposite_sides():
    place = build_domain("hybrid").schema("place")
    assert Atom("isopposite", ("?obj-loc", "?loc-obj")) in place.pre_pos


def test_pick_removes_empty_hand_and_adds_held_object():
    pick = build_domain("oc").schema("pick")
    assert Atom("in", ("hand", "air")) in pick.del_
    assert Atom("in", ("hand", "?obj")) in pick.add


def test_both_styles_round_trip_through_pddl():
    for style in ("oc", "hybrid"):
        d = build_domain(style)
        assert parse_domain(print_domain(d)) == d


# ---------------------------------------------------------------------------
# o2o

def test_o2o_identity_at_upright():
    o2o = build_o2o()
    assert o2o.side("under", "upright") == "ocunder"
    assert o2o.side("on", "upright") == "ocon"
    assert o2o.side("left", "upright") == "ocleft"
    assert o2o.side("right", "upright") == "ocright"


def test_o2o_derived_rotations():
    o2o = build_o2o()
    # a half turn swaps the vertical sides
    assert o2o.side("on", "upsidedown") == "ocunder"
    # quarter turn convention: horizright maps the observer's top to the
    # object's left side
    assert o2o.side("on", "horizright") == "ocleft"


def test_o2o_bijection_per_orientation():
    o2o = build_o2o()
    assert len(o2o.entries) == 16
    for axis in ORIENTATIONS:
        image = {o2o.side(rel, axis) for rel in PLANAR_OBSERVER_SIDES}
        assert len(image) == 4


# ---------------------------------------------------------------------------
# scenario encodings

def test_single_block_encoding_has_support_force_fact():
    sc = generate_scenario("blocks", seed=2, p_hold=0.0)
    enc = encode_scenario(sc, "oc")
    # every non-held block carries exactly one force fact, naming its up face
    for block in "abcd":
        force = [a for a in enc.init if a.pred == "force" and a.args[0] == block]
        assert len(force) == 1
        up = force[0].args[1]
        # the spec's support rule: the force side is opposite the contact side
        # whenever the block rests directly on something
        contact = [a for a in enc.init
                   if a.pred == "oc" and a.args[1] == block and a.args[2] not in ("air", "hand")]
        if contact:
            from ocplan.model import opposite
            assert any(opposite(a.args[0]) == up for a in contact)


def test_stack_goal_atoms():
    goal = stack_goal(("a", "b", "c", "d", "tabler"), DomainStyle.OBJECT_CENTERED)
    assert goal == {
        Atom("oc", ("ocon", "b", "a")),
        Atom("oc", ("ocon", "c", "b")),
        Atom("oc", ("ocon", "d", "c")),
        Atom("oc", ("ocon", "tabler", "d")),
    }
    hybrid_goal = stack_goal(("a", "b"), DomainStyle.HYBRID)
    assert hybrid_goal == {Atom("ob", ("on", "b", "a"))}


def test_hybrid_encoding_structure():
    sc = generate_scenario("blocks", seed=3, p_hold=0.0)
    enc = encode_scenario(sc, "hybrid")
    o2o_atoms = {a for a in enc.init if a.pred == "o2o"}
    assert len(o2o_atoms) == 16
    for block in "abcd":
        assert sum(1 for a in enc.init if a.pred == "isoriented" and a.args[0] == block) == 1
    assert Atom("emptyhand", ()) in enc.init
    # observer relations appear in opposite-token pairs
    obs = [a for a in enc.init if a.pred == "ob"]
    from ocplan.model import opposite
    for a in obs:
        rel, o1, o2 = a.args
        assert Atom("ob", (opposite(rel), o2, o1)) in enc.init


def test_held_block_encoding():
    for seed in range(60):
        sc = generate_scenario("blocks", seed=seed)
        held = sc.held_object()
        if held is None:
            continue
        enc = encode_scenario(sc, "hybrid")
        assert Atom("emptyhand", ()) not in enc.init
        assert any(a.pred == "grasped" and a.args[0] == held for a in enc.init)
        assert not any(a.pred == "isoriented" and a.args[0] == held for a in enc.init)
        assert not any(a.pred == "force" and a.args[0] == held for a in enc.init)
        oc_enc = encode_scenario(sc, "oc")
        assert Atom("in", ("hand", held)) in oc_enc.init
        return
    pytest.fail("no held-block seed found in range")


def test_encoding_translation_preserves_contacts():
    for seed in (0, 4, 9):
        sc = generate_scenario("blocks", seed=seed)
        oc_pairs = contact_pairs(encode_scenario(sc, "oc"))
        hybrid_pairs = contact_pairs(encode_scenario(sc, "hybrid"))
        assert oc_pairs == hybrid_pairs


def test_one_relational_atom_per_contacting_pair():
    for seed in (1, 6, 13):
        sc = generate_scenario("blocks", seed=seed)
        for style, pred in (("oc", "oc"), ("hybrid", "ob")):
            enc = encode_scenario(sc, style)
            seen = {}
            for a in enc.init:
                if a.pred == pred and a.args[2] not in ("air", "hand"):
                    key = (a.args[1], a.args[2])
                    seen[key] = seen.get(key, 0) + 1
            assert all(v == 1 for v in seen.values())


def test_lateral_contact_scene_is_rejected():
    from ocplan.model import SymbolicState
    from ocplan.simworld import GeometryConfig, Scenario, extract_relations, PhysicalObjectState, _table_states

    objects = _table_states()
    edge = 0.05
    # two cubes side by side, faces touching
    objects["a"] = PhysicalObjectState((0.0, 0.0, edge / 2), (0, 0, 0), (edge,) * 3)
    objects["b"] = PhysicalObjectState((edge, 0.0, edge / 2), (0, 0, 0), (edge,) * 3)
    objects["hand"] = PhysicalObjectState((0.3, 0.2, 0.55), (0, 0, 0), (0.12, 0.12, 0.08))
    cfg = GeometryConfig()
    atoms = extract_relations(objects, cfg)
    sc = Scenario(id=0, seed=0, cfg=cfg, objects=objects, ground_truth=atoms)
    with pytest.raises(EncodingError, match="laterally"):
        encode_scenario(sc, "oc")


# ---------------------------------------------------------------------------
# consistency checking

def _solved_trace(style, seed=8):
    sc = generate_scenario("blocks", seed=seed)
    enc = encode_scenario(sc, style, goal_stack=("a", "b", "c", "d", "tabler"))
    task = ground(build_domain(style), enc.to_problem("t"))
    res = solve(task, "astar_goalcount", weight=8.0)
    assert res.ok
    return execute(task, res.plan)[0], task


def test_solver_plans_have_zero_violations():
    for style in ("oc", "hybrid"):
        trace, _ = _solved_trace(style)
        report = check_consistency(trace, style)
        assert report.ok, report.to_json()


def test_pick_of_supporting_block_is_flagged():
    trace, task = _solved_trace("oc")
    # find a pick step and corrupt its state: the picked object now carries
    # another block on its support side
    for i, (state, action) in enumerate(trace):
        if action.name != "pick":
            continue
        obj = action.binding[1]
        force_side = action.binding[5]
        from ocplan.model import SymbolicState
        corrupted = SymbolicState(
            (state - {Atom("oc", (force_side, obj, "air"))})
            | {Atom("oc", (force_side, obj, "d" if obj != "d" else "c"))}
        )
        report = check_consistency([(corrupted, action)], "oc")
        assert not report.ok
        assert any(v["rule"] == "b" for v in report.violations)
        break
    else:
        pytest.fail("no pick step found")


def test_place_opposite_side_rule():
    trace, _ = _solved_trace("oc")
    for state, action in trace:
        if action.name != "place":
            continue
        bad_binding = list(action.binding)
        bad_binding[5] = action.binding[3]  # force side == landing side
        bad = action.schema.ground(dict(zip(action.schema.params, bad_binding)))
        report = check_consistency([(state, bad)], "oc")
        assert any(v["rule"] == "c" for v in report.violations)
        break


def test_empty_trace_gives_empty_report():
    report = check_consistency([], "oc")
    assert report.ok
    assert json.loads(report.to_json()) == {"ok": True, "violations": []}
