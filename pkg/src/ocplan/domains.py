"""The two universal pick/place domains, static-fact builders, and encodings.

Style "object_centered": relations live purely in object frames via the
``oc`` predicate; the abstract object ``air`` marks clear faces and the empty
gripper, so no clear/emptyhand predicates exist.

Style "hybrid_observer_object": observer-frame relations (``ob``),
orientations (``isoriented``) and the ``o2o`` observer-to-object side
transform coexist with object-frame grasp/clear bookkeeping.

In both domains ``force o s`` names the side of o currently able to support
other objects (the up-facing side under gravity); picks require it clear and
places land on it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .model import (
    AIR,
    HAND,
    OC_SIDES,
    ORIENTATIONS,
    PLANAR_OBSERVER_SIDES,
    Atom,
    GroundAction,
    SymbolicState,
    opposite,
)
from .pddl import DomainFile, ProblemFile
from .simworld import (
    DIRECTIONS,
    ORIENTATION_ANGLES,
    TABLE_PARTS,
    Scenario,
    body_face_toward,
    rotation_matrix,
    world_side_of_face,
)


class DomainStyle(str, enum.Enum):
    OBJECT_CENTERED = "object_centered"
    HYBRID = "hybrid_observer_object"


_STYLE_ALIASES = {
    "oc": DomainStyle.OBJECT_CENTERED,
    "object_centered": DomainStyle.OBJECT_CENTERED,
    "hybrid": DomainStyle.HYBRID,
    "hybrid_observer_object": DomainStyle.HYBRID,
}


def parse_style(token: str) -> DomainStyle:
    try:
        return _STYLE_ALIASES[token.lower()]
    except KeyError:
        raise ValueError(f"unknown domain style {token!r}") from None


def _a(pred: str, *args: str) -> Atom:
    return Atom(pred, args)


def _schema(name, params, pre_pos, pre_neg, add, del_):
    from .model import OperatorSchema

    return OperatorSchema(
        name=name,
        params=tuple(params),
        pre_pos=frozenset(pre_pos),
        pre_neg=frozenset(pre_neg),
        add=frozenset(add),
        del_=frozenset(del_),
    )


def build_domain(style: DomainStyle | str) -> DomainFile:
    """The pick and place schemas for the requested representation style."""
    style = parse_style(style) if isinstance(style, str) else style
    if style is DomainStyle.OBJECT_CENTERED:
        pick = _schema(
            "pick",
            ("?obj-hand", "?obj", "?loc", "?obj-loc", "?loc-obj", "?obj-force"),
            pre_pos=[
                _a("oc", "?obj-hand", "?obj", AIR),
                _a("oc", "?obj-loc", "?obj", "?loc"),
                _a("oc", "?loc-obj", "?loc", "?obj"),
                _a("in", HAND, AIR),
                _a("force", "?obj", "?obj-force"),
                _a("oc", "?obj-force", "?obj", AIR),
            ],
            pre_neg=[],
            add=[
                _a("oc", "?obj-hand", "?obj", HAND),
                _a("oc", "?obj-loc", "?obj", AIR),
                _a("oc", "?loc-obj", "?loc", AIR),
                _a("in", HAND, "?obj"),
            ],
            del_=[
                _a("force", "?obj", "?obj-force"),
                _a("oc", "?obj-hand", "?obj", AIR),
                _a("oc", "?obj-loc", "?obj", "?loc"),
                _a("oc", "?loc-obj", "?loc", "?obj"),
                _a("in", HAND, AIR),
            ],
        )
        place = _schema(
            "place",
            ("?obj-hand", "?obj", "?loc", "?obj-loc", "?loc-obj", "?obj-force"),
            pre_pos=[
                _a("oc", "?obj-hand", "?obj", HAND),
                _a("oc", "?obj-loc", "?obj", AIR),
                _a("oc", "?loc-obj", "?loc", AIR),
                _a("in", HAND, "?obj"),
                _a("force", "?loc", "?loc-obj"),
                _a("isopposite", "?obj-loc", "?obj-force"),
            ],
            pre_neg=[],
            add=[
                _a("oc", "?obj-hand", "?obj", AIR),
                _a("oc", "?obj-loc", "?obj", "?loc"),
                _a("oc", "?loc-obj", "?loc", "?obj"),
                _a("in", HAND, AIR),
                _a("force", "?obj", "?obj-force"),
            ],
            del_=[
                _a("oc", "?obj-hand", "?obj", HAND),
                _a("oc", "?obj-loc", "?obj", AIR),
                _a("oc", "?loc-obj", "?loc", AIR),
                _a("in", HAND, "?obj"),
            ],
        )
        name = "pickplace-object-centered"
        arities = {"oc": 3, "in": 2, "force": 2, "isopposite": 2}
    else:
        pick = _schema(
            "pick",
            (
                "?grasp-type", "?obj", "?loc", "?axis-obj", "?axis-loc",
                "?obj-loc", "?loc-obj", "?free-type-obj", "?free-type-loc", "?obj-force",
            ),
            pre_pos=[
                _a("ob", "?obj-loc", "?obj", "?loc"),
                _a("ob", "?loc-obj", "?loc", "?obj"),
                _a("emptyhand"),
                _a("clear", "?obj", "?grasp-type"),
                _a("force", "?obj", "?obj-force"),
                _a("clear", "?obj", "?obj-force"),
                _a("isoriented", "?obj", "?axis-obj"),
                _a("isoriented", "?loc", "?axis-loc"),
                _a("o2o", "?obj-loc", "?axis-obj", "?free-type-obj"),
                _a("o2o", "?loc-obj", "?axis-loc", "?free-type-loc"),
            ],
            pre_neg=[],
            add=[
                _a("grasped", "?obj", "?grasp-type"),
                _a("clear", "?loc", "?loc-obj"),
                _a("clear", "?obj", "?free-type-obj"),
                _a("clear", "?loc", "?free-type-loc"),
            ],
            del_=[
                _a("force", "?obj", "?obj-force"),
                _a("isoriented", "?obj", "?axis-obj"),
                _a("clear", "?obj", "?grasp-type"),
                _a("ob", "?obj-loc", "?obj", "?loc"),
                _a("ob", "?loc-obj", "?loc", "?obj"),
                _a("emptyhand"),
            ],
        )
        place = _schema(
            "place",
            (
                "?grasp-type", "?obj", "?loc", "?axis-obj", "?axis-loc",
                "?obj-loc", "?loc-obj", "?place-type-obj", "?place-type-loc", "?obj-hand",
            ),
            pre_pos=[
                _a("clear", "?loc", "?loc-obj"),
                _a("grasped", "?obj", "?grasp-type"),
                _a("clear", "?obj", "?place-type-obj"),
                _a("isopposite", "?obj-loc", "?loc-obj"),
                _a("force", "?loc", "?loc-obj"),
                _a("isoriented", "?loc", "?axis-loc"),
                _a("o2o", "?obj-loc", "?axis-obj", "?place-type-obj"),
                _a("o2o", "?loc-obj", "?axis-loc", "?place-type-loc"),
                _a("o2o", "?obj-hand", "?axis-obj", "?grasp-type"),
            ],
            pre_neg=[],
            add=[
                _a("ob", "?obj-loc", "?obj", "?loc"),
                _a("ob", "?loc-obj", "?loc", "?obj"),
                _a("emptyhand"),
                _a("clear", "?obj", "?grasp-type"),
                _a("force", "?obj", "?loc-obj"),
                _a("clear", "?obj", "?obj-hand"),
                _a("isoriented", "?obj", "?axis-obj"),
            ],
            del_=[
                _a("grasped", "?obj", "?grasp-type"),
                _a("clear", "?loc", "?place-type-loc"),
                _a("clear", "?obj", "?place-type-obj"),
                _a("clear", "?loc", "?loc-obj"),
            ],
        )
        name = "pickplace-hybrid-observer-object"
        arities = {
            "ob": 3, "clear": 2, "emptyhand": 0, "grasped": 2,
            "force": 2, "isoriented": 2, "isopposite": 2, "o2o": 3,
        }
    return DomainFile(name=name, schemas=(pick, place), arities=arities)


# ---------------------------------------------------------------------------
# observer-to-object transform

@dataclass(frozen=True)
class O2OTable:
    """Map (observer relation, orientation) -> object-frame side token.

    Bijective over the four in-plane relations for each fixed orientation;
    the identity mapping at upright.
    """

    entries: frozenset[tuple[str, str, str]]

    def side(self, relation: str, orientation: str) -> str:
        for rel, axis, side in self.entries:
            if rel == relation and axis == orientation:
                return side
        raise KeyError((relation, orientation))

    def atoms(self) -> set[Atom]:
        return {Atom("o2o", e) for e in self.entries}


def build_o2o() -> O2OTable:
    """Derive the transform from the rotation convention, not a lookup table.

    The object-frame side for (relation r, orientation w) is the body face
    that points along r's world direction once the object is rotated by w,
    i.e. the face found by applying the inverse rotation to r.
    """
    entries = set()
    for axis_name in ORIENTATIONS:
        R = rotation_matrix(ORIENTATION_ANGLES[axis_name])
        for rel in PLANAR_OBSERVER_SIDES:
            side = body_face_toward(R, DIRECTIONS[rel])
            entries.add((rel, axis_name, side))
    return O2OTable(entries=frozenset(entries))


# ---------------------------------------------------------------------------
# scenario encodings

class EncodingError(ValueError):
    pass


@dataclass
class ScenarioEncoding:
    init: SymbolicState
    goal: frozenset[Atom]
    style: DomainStyle
    objects: tuple[str, ...]

    def to_problem(self, name: str) -> ProblemFile:
        domain = build_domain(self.style)
        return ProblemFile(
            name=name,
            domain_name=domain.name,
            objects=self.objects,
            init=self.init,
            goal=self.goal,
        )


def _orientation_token(obj_state) -> str:
    for token, angles in ORIENTATION_ANGLES.items():
        if np.allclose(obj_state.orientation, angles):
            return token
    raise EncodingError(f"orientation {obj_state.orientation} is outside the planar set")


def stack_goal(stack: tuple[str, ...], style: DomainStyle) -> frozenset[Atom]:
    """Goal atoms for a stack listed top-down, e.g. (a, b, c, d, tabler).

    Each supporting object's top face must touch the object above it:
    object-centered ``oc ocon lower upper``, hybrid ``ob on lower upper``.
    """
    atoms = set()
    for upper, lower in zip(stack, stack[1:]):
        if style is DomainStyle.OBJECT_CENTERED:
            atoms.add(Atom("oc", ("ocon", lower, upper)))
        else:
            atoms.add(Atom("ob", ("on", lower, upper)))
    return frozenset(atoms)


def encode_scenario(
    sc: Scenario,
    style: DomainStyle | str,
    goal_stack: tuple[str, ...] | None = None,
    all_isopposite_pairs: bool = False,
) -> ScenarioEncoding:
    """Symbolic initial state and goal for a scenario in the chosen style.

    goal_stack lists a target tower top-down (defaults to no goal atoms).
    Benchmark encodings restrict isopposite facts to the in-plane pairs; pass
    all_isopposite_pairs=True to include front/back.
    """
    style = parse_style(style) if isinstance(style, str) else style
    held = sc.held_object()
    truth = sc.ground_truth

    # sanity: the single-location operators need stack scenes, i.e. each
    # object touches others through its down face (one support) and up face
    # (one rider) only -- lateral contacts would leave stale atoms after picks
    for name in sc.movables():
        R = rotation_matrix(sc.objects[name].orientation)
        down = up = 0
        for a in truth:
            if a.pred != "oc" or a.args[1] != name or a.args[2] in (AIR, HAND):
                continue
            direction = world_side_of_face(R, a.args[0])
            if direction == "under":
                down += 1
            elif direction == "on":
                up += 1
            else:
                raise EncodingError(f"{name} touches {a.args[2]} laterally; need stack scenes")
        if down > 1 or up > 1:
            raise EncodingError(f"{name} has multiple supports or riders")

    sides = PLANAR_OC_SIDES_ALL if all_isopposite_pairs else PLANAR_OC_SIDES_INPLANE
    init: set[Atom] = set()

    if style is DomainStyle.OBJECT_CENTERED:
        init.update(truth)
        for s in sides:
            init.add(Atom("isopposite", (s, opposite(s))))
        for name, state in sc.objects.items():
            if name == HAND or name == held:
                continue
            R = rotation_matrix(state.orientation)
            init.add(Atom("force", (name, body_face_toward(R, DIRECTIONS["on"]))))
    else:
        o2o = build_o2o()
        init.update(a for a in o2o.atoms())
        for rel in ("on", "under", "left", "right") if not all_isopposite_pairs else OBSERVER_ALL:
            init.add(Atom("isopposite", (rel, opposite(rel))))
        if held is None:
            init.add(Atom("emptyhand", ()))
        for a in truth:
            if a.pred != "oc":
                continue
            face, o1, o2 = a.args
            if o1 == held and o2 == HAND:
                init.add(Atom("grasped", (o1, face)))
                continue
            R1 = rotation_matrix(sc.objects[o1].orientation)
            if o2 == AIR:
                # the o2o table spans the in-plane sides only, so a front or
                # back grasp could never be released by place; the hybrid
                # vocabulary stays planar
                if face in PLANAR_OC_SIDES_INPLANE:
                    init.add(Atom("clear", (o1, face)))
                    if o1 != held:
                        init.add(Atom("clear", (o1, world_side_of_face(R1, face))))
            elif o2 != HAND:
                init.add(Atom("ob", (world_side_of_face(R1, face), o1, o2)))
        for name, state in sc.objects.items():
            if name == HAND or name == held:
                continue
            init.add(Atom("isoriented", (name, _orientation_token(state))))
            init.add(Atom("force", (name, "on")))

    objects = tuple(sorted(sc.objects)) + (AIR,)
    goal = stack_goal(goal_stack, style) if goal_stack else frozenset()
    return ScenarioEncoding(init=SymbolicState(init), goal=goal, style=style, objects=objects)


PLANAR_OC_SIDES_INPLANE = ("ocon", "ocunder", "ocleft", "ocright")
PLANAR_OC_SIDES_ALL = OC_SIDES
OBSERVER_ALL = ("on", "under", "left", "right", "front", "back")


def contact_pairs(encoding: ScenarioEncoding) -> frozenset[tuple[str, str]]:
    """Ordered object pairs in contact, readable from either style's init."""
    pred = "oc" if encoding.style is DomainStyle.OBJECT_CENTERED else "ob"
    return frozenset(
        (a.args[1], a.args[2])
        for a in encoding.init
        if a.pred == pred and a.args[2] not in (AIR, HAND)
    )


# ---------------------------------------------------------------------------
# consistency checking

@dataclass
class ConsistencyReport:
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, step: int, rule: str, action: GroundAction, detail: str):
        self.violations.append(
            {"step": step, "rule": rule, "action": str(action), "detail": detail}
        )

    def to_json(self) -> str:
        return json.dumps({"ok": self.ok, "violations": self.violations}, indent=1)


def _bound(action: GroundAction, param: str) -> str:
    return action.binding[action.schema.params.index(param)]


def check_consistency(trace, style: DomainStyle | str) -> ConsistencyReport:
    """Geometric/force consistency of a symbolic execution trace.

    trace: sequence of (state_before, action) pairs. Checks, per step:
    (a) the grasped side was clear before a pick;
    (b) the pick target was not supporting another object;
    (c) a place lands the object on the side opposite its new support side;
    (d) the landing side of the location was clear and able to support.
    """
    style = parse_style(style) if isinstance(style, str) else style
    oc = style is DomainStyle.OBJECT_CENTERED
    report = ConsistencyReport()
    for step, (state, action) in enumerate(trace):
        if action.name == "pick":
            obj = _bound(action, "?obj")
            grasp = _bound(action, "?obj-hand" if oc else "?grasp-type")
            force_side = _bound(action, "?obj-force")
            grasp_clear = Atom("oc", (grasp, obj, AIR)) if oc else Atom("clear", (obj, grasp))
            if grasp_clear not in state:
                report.add(step, "a", action, f"grasped side {grasp} of {obj} was not clear")
            if Atom("force", (obj, force_side)) not in state:
                report.add(step, "b", action, f"{obj} has no support-capable side {force_side}")
            support_clear = (
                Atom("oc", (force_side, obj, AIR)) if oc else Atom("clear", (obj, force_side))
            )
            if support_clear not in state:
                report.add(step, "b", action, f"{obj} was supporting another object")
        elif action.name == "place":
            obj = _bound(action, "?obj")
            loc = _bound(action, "?loc")
            obj_loc = _bound(action, "?obj-loc")
            loc_obj = _bound(action, "?loc-obj")
            lands_opposite = _bound(action, "?obj-force" if oc else "?loc-obj")
            if opposite(obj_loc) != lands_opposite:
                report.add(
                    step, "c", action,
                    f"landing side {obj_loc} is not opposite {lands_opposite}",
                )
            loc_clear = Atom("oc", (loc_obj, loc, AIR)) if oc else Atom("clear", (loc, loc_obj))
            if loc_clear not in state:
                report.add(step, "d", action, f"landing side {loc_obj} of {loc} was occupied")
            if Atom("force", (loc, loc_obj)) not in state:
                report.add(step, "d", action, f"{loc} cannot support on side {loc_obj}")
        else:
            report.add(step, "?", action, f"unknown action {action.name}")
    return report
