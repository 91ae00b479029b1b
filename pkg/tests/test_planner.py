import pytest

from ocplan.domains import build_domain, encode_scenario, stack_goal
from ocplan.model import Atom, Plan, SymbolicState, atom
from ocplan.pddl import ProblemFile, parse_problem
from ocplan.planner import (
    InapplicableActionError,
    applicable,
    apply,
    execute,
    ground,
    parse_plan_text,
    solve,
    validate_plan,
)
from ocplan.simworld import generate_scenario

OC = build_domain("oc")


def _air_faces(obj, *faces):
    return [Atom("oc", (f, obj, "air")) for f in faces]


def two_block_problem():
    """Blocks a and b side by side, goal: a stacked on b."""
    init = [
        Atom("oc", ("ocleft", "a", "b")),
        Atom("oc", ("ocright", "b", "a")),
        *_air_faces("a", "ocon", "ocunder", "ocright", "ocfront", "ocback"),
        *_air_faces("b", "ocon", "ocunder", "ocleft", "ocfront", "ocback"),
        Atom("force", ("a", "ocon")),
        Atom("force", ("b", "ocon")),
        Atom("in", ("hand", "air")),
        Atom("isopposite", ("ocon", "ocunder")),
        Atom("isopposite", ("ocunder", "ocon")),
        Atom("isopposite", ("ocleft", "ocright")),
        Atom("isopposite", ("ocright", "ocleft")),
    ]
    return ProblemFile(
        name="two-block",
        domain_name=OC.name,
        objects=("a", "b", "hand", "air"),
        init=SymbolicState(init),
        goal=frozenset({Atom("oc", ("ocon", "b", "a"))}),
    )


@pytest.fixture(scope="module")
def two_block_task():
    return ground(OC, two_block_problem())


def test_grounding_contains_the_lateral_pick(two_block_task):
    # picking a out of its side contact with b, grasped at the top face
    a = two_block_task.action_by_key("pick", ("ocon", "a", "b", "ocleft", "ocright", "ocon"))
    assert a is not None
    assert applicable(two_block_task.init, a)


def test_zero_operator_domain_grounds_empty():
    from ocplan.pddl import DomainFile

    empty = DomainFile(name="none", schemas=(), arities={})
    task = ground(empty, two_block_problem())
    assert len(task) == 0
    assert solve(task).status == "no_plan"


def test_alignment_task_two_step_plan(two_block_task):
    res = solve(two_block_task, "astar_goalcount")
    assert res.ok and len(res.plan) == 2
    assert [a.name for a in res.plan] == ["pick", "place"]
    assert validate_plan(two_block_task, res.plan).valid


def test_goal_already_satisfied_returns_empty_plan(two_block_task):
    p = two_block_problem()
    satisfied = ProblemFile(p.name, p.domain_name, p.objects, p.init,
                            frozenset({Atom("in", ("hand", "air"))}))
    task = ground(OC, satisfied)
    res = solve(task, "bfs")
    assert res.ok and len(res.plan) == 0
    assert res.stats.expanded == 0
    assert validate_plan(task, res.plan).valid


def test_applicable_definition(two_block_task):
    s = two_block_task.init
    a = two_block_task.action_by_key("pick", ("ocon", "a", "b", "ocleft", "ocright", "ocon"))
    assert applicable(s, a)
    missing = SymbolicState(s - {Atom("in", ("hand", "air"))})
    assert not applicable(missing, a)
    with pytest.raises(InapplicableActionError):
        apply(missing, a)


def test_apply_moves_hand_atoms(two_block_task):
    s = two_block_task.init
    a = two_block_task.action_by_key("pick", ("ocon", "a", "b", "ocleft", "ocright", "ocon"))
    s2 = apply(s, a)
    assert Atom("in", ("hand", "a")) in s2
    assert Atom("in", ("hand", "air")) not in s2


def test_empty_effect_action_preserves_state(two_block_task):
    from ocplan.model import OperatorSchema

    noop = OperatorSchema("noop", (), frozenset(), frozenset(), frozenset(), frozenset())
    ga = noop.ground({})
    s = two_block_task.init
    assert apply(s, ga) == s


def test_pick_place_same_binding_is_identity():
    """A pick undone by a place with the identical binding restores the state."""
    init = SymbolicState([
        Atom("oc", ("ocleft", "a", "b")),
        *_air_faces("a", "ocon", "ocunder", "ocright", "ocfront", "ocback"),
        Atom("force", ("a", "ocright")),
        Atom("oc", ("ocright", "b", "a")),
        *_air_faces("b", "ocon", "ocunder", "ocleft", "ocfront", "ocback"),
        Atom("force", ("b", "ocright")),
        Atom("in", ("hand", "air")),
        Atom("isopposite", ("ocleft", "ocright")),
        Atom("isopposite", ("ocright", "ocleft")),
    ])
    pick = OC.schema("pick").ground(dict(zip(
        OC.schema("pick").params, ("ocon", "a", "b", "ocleft", "ocright", "ocright"))))
    place = OC.schema("place").ground(dict(zip(
        OC.schema("place").params, ("ocon", "a", "b", "ocleft", "ocright", "ocright"))))
    mid = apply(init, pick)
    back = apply(mid, place)
    assert back == init
    # frame property: atoms untouched by effects survive both steps
    frame = init - (pick.add | pick.del_ | place.add | place.del_)
    assert frame <= mid and frame <= back


def test_validate_reports_first_failure(two_block_task):
    res = solve(two_block_task, "astar_goalcount")
    swapped = Plan((res.plan.actions[1], res.plan.actions[0]))
    report = validate_plan(two_block_task, swapped)
    assert not report.valid
    assert report.failed_step == 0
    assert report.missing


def test_validate_rejects_unmet_goal(two_block_task):
    report = validate_plan(two_block_task, Plan(()))
    assert not report.valid
    assert report.unmet_goal


def test_astar_matches_bfs_on_small_instances():
    for seed in range(3):
        sc = generate_scenario("blocks", seed=seed)
        enc = encode_scenario(sc, "oc", goal_stack=("a", "b"))
        task = ground(OC, enc.to_problem(f"s{seed}"))
        r1 = solve(task, "bfs")
        r2 = solve(task, "astar_goalcount")
        assert r1.ok == r2.ok
        if r1.ok:
            assert len(r1.plan) == len(r2.plan)
            assert validate_plan(task, r2.plan).valid


def test_solver_plans_always_validate():
    sc = generate_scenario("blocks", seed=11)
    for style in ("oc", "hybrid"):
        enc = encode_scenario(sc, style, goal_stack=("a", "b", "c", "d", "tabler"))
        task = ground(build_domain(style), enc.to_problem("x"))
        res = solve(task, "astar_goalcount", weight=8.0)
        assert res.ok
        assert validate_plan(task, res.plan).valid


def test_deterministic_grounding_and_search():
    sc = generate_scenario("blocks", seed=5)
    enc = encode_scenario(sc, "oc", goal_stack=("a", "b", "c", "d", "tabler"))
    prob = enc.to_problem("det")
    t1, t2 = ground(OC, prob), ground(OC, prob)
    assert [str(a) for a in t1.actions] == [str(a) for a in t2.actions]
    assert sorted(t1.atom_universe) == sorted(t2.atom_universe)
    r1 = solve(t1, "astar_goalcount", weight=3.0)
    r2 = solve(t2, "astar_goalcount", weight=3.0)
    assert r1.plan.to_text() == r2.plan.to_text()
    assert (r1.stats.expanded, r1.stats.generated) == (r2.stats.expanded, r2.stats.generated)


def test_resource_limit_outcome(two_block_task):
    res = solve(two_block_task, "astar_goalcount", max_expansions=0)
    assert res.status == "resource_limit"
    assert res.plan is None
    assert res.stats.plan_length == -1


def test_expanded_never_exceeds_generated(two_block_task):
    res = solve(two_block_task, "bfs")
    assert res.stats.expanded <= res.stats.generated


def test_plan_text_round_trip(two_block_task):
    res = solve(two_block_task, "astar_goalcount")
    text = res.plan.to_text()
    assert text.splitlines()[0].startswith("1) pick")
    again = parse_plan_text(two_block_task, text)
    assert [a.binding for a in again] == [a.binding for a in res.plan]


def test_execute_produces_consistent_trace(two_block_task):
    res = solve(two_block_task, "astar_goalcount")
    trace, final = execute(two_block_task, res.plan)
    assert len(trace) == 2
    assert trace[0][0] == two_block_task.init
    assert two_block_task.goal <= final
