"""Synthetic tabletop scenarios: random rigid-box scenes plus geometric ground truth.

Replaces a physics simulator at desk scale. A scenario is a set of posed
bounding boxes (blocks roster or cup/bottle/block roster, three table parts,
one gripper) together with the object-centered relational atoms extracted
from the geometry.

Geometry is axis-aligned: orientations are right-angle rotations (the planar
set rotates about the front-back axis; an optional yaw multiple of 90 degrees
is supported for the observer-rotation invariance property). The gripper is
special-cased: it encloses what it holds, so it is exempt from face contacts
and interpenetration checks; ``in hand o`` comes from a grip-volume test and
the grasp-face atom from the hand approach direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .model import (
    AIR,
    HAND,
    OBSERVER_SIDES,
    OC_SIDES,
    ORIENTATIONS,
    Atom,
    PhysicalObjectState,
    SymbolicState,
)

TABLE_PARTS = ("tablel", "tablem", "tabler")


class GeometryError(ValueError):
    """Interpenetration or a box pose the axis-aligned extractor cannot handle."""


class GenerationError(ValueError):
    """The scenario request cannot be satisfied (e.g. tower exceeds workspace)."""


# ---------------------------------------------------------------------------
# rotations and face naming

# World directions; gravity is -z.
DIRECTIONS = {
    "on": np.array([0.0, 0.0, 1.0]),
    "under": np.array([0.0, 0.0, -1.0]),
    "right": np.array([1.0, 0.0, 0.0]),
    "left": np.array([-1.0, 0.0, 0.0]),
    "front": np.array([0.0, 1.0, 0.0]),
    "back": np.array([0.0, -1.0, 0.0]),
}

# Outward face normals in the body frame.
BODY_FACES = {
    "ocon": np.array([0.0, 0.0, 1.0]),
    "ocunder": np.array([0.0, 0.0, -1.0]),
    "ocright": np.array([1.0, 0.0, 0.0]),
    "ocleft": np.array([-1.0, 0.0, 0.0]),
    "ocfront": np.array([0.0, 1.0, 0.0]),
    "ocback": np.array([0.0, -1.0, 0.0]),
}

# The four planar orientations rotate about the front-back (y) axis;
# horizright is the 90-degree clockwise roll (seen from the front), which
# maps the body top face to the observer's right.
ORIENTATION_ANGLES = {
    "upright": (0.0, 0.0, 0.0),
    "horizright": (0.0, np.pi / 2, 0.0),
    "upsidedown": (0.0, np.pi, 0.0),
    "horizleft": (0.0, -np.pi / 2, 0.0),
}


def rotation_matrix(angles) -> np.ndarray:
    """Extrinsic x-y-z rotation: R = Rz(az) @ Ry(ay) @ Rx(ax)."""
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _snap_unit(v: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Snap a rotated axis to the nearest world axis; error if not aligned."""
    snapped = np.round(v)
    if np.max(np.abs(v - snapped)) > tol or abs(np.abs(snapped).sum() - 1.0) > tol:
        raise GeometryError(f"box is not axis-aligned: rotated axis {v}")
    return snapped


def body_face_toward(R: np.ndarray, world_dir: np.ndarray) -> str:
    """Object-frame name of the face currently pointing along world_dir."""
    b = _snap_unit(R.T @ world_dir)
    for token, normal in BODY_FACES.items():
        if np.array_equal(normal, b):
            return token
    raise GeometryError(f"no body face along {b}")


def world_side_of_face(R: np.ndarray, oc_token: str) -> str:
    """Observer-frame name of the direction a named body face points to."""
    d = _snap_unit(R @ BODY_FACES[oc_token])
    for token, vec in DIRECTIONS.items():
        if np.array_equal(vec, d):
            return token
    raise GeometryError(f"no world direction along {d}")


def up_face(obj: PhysicalObjectState) -> str:
    """Object-frame token of the face currently pointing up (the support side)."""
    return body_face_toward(rotation_matrix(obj.orientation), DIRECTIONS["on"])


# ---------------------------------------------------------------------------
# configuration and scenario containers

@dataclass(frozen=True)
class GeometryConfig:
    """Tolerances and workspace box. eps_pen < eps_contact, 0 < min_overlap <= 1."""

    eps_contact: float = 0.005
    eps_pen: float = 0.001
    min_overlap: float = 0.25
    # (min, max) per world axis, meters
    workspace: tuple[tuple[float, float], ...] = ((-0.5, 0.5), (-0.25, 0.25), (-0.05, 0.5))
    # orientation-angle and bbox-edge ranges close the 9-dim predicate box
    angle_range: tuple[float, float] = (-np.pi, np.pi)
    max_bbox_edge: float = 0.5

    def __post_init__(self):
        if not (0 < self.eps_pen < self.eps_contact):
            raise ValueError("need 0 < eps_pen < eps_contact")
        if not (0 < self.min_overlap <= 1):
            raise ValueError("need 0 < min_overlap <= 1")

    def sample_extents(self) -> np.ndarray:
        """Per-dimension extents of the predicate-difference (z1 - z2) box."""
        pos = [hi - lo for lo, hi in self.workspace]
        ang = self.angle_range[1] - self.angle_range[0]
        return np.array([2 * p for p in pos] + [2 * ang] * 3 + [self.max_bbox_edge] * 3)

    def physical_extents(self) -> np.ndarray:
        """Per-dimension extents of the physical box one object lives in."""
        pos = [hi - lo for lo, hi in self.workspace]
        ang = self.angle_range[1] - self.angle_range[0]
        return np.array(pos + [ang] * 3 + [self.max_bbox_edge] * 3)

    def to_dict(self) -> dict:
        return {
            "eps_contact": self.eps_contact,
            "eps_pen": self.eps_pen,
            "min_overlap": self.min_overlap,
            "workspace": [list(b) for b in self.workspace],
            "angle_range": list(self.angle_range),
            "max_bbox_edge": self.max_bbox_edge,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeometryConfig":
        return cls(
            eps_contact=d["eps_contact"],
            eps_pen=d["eps_pen"],
            min_overlap=d["min_overlap"],
            workspace=tuple(tuple(b) for b in d["workspace"]),
            angle_range=tuple(d["angle_range"]),
            max_bbox_edge=d["max_bbox_edge"],
        )


@dataclass
class Scenario:
    """Posed boxes plus the relational atoms extracted from them."""

    id: int
    seed: int
    cfg: GeometryConfig
    objects: dict[str, PhysicalObjectState]
    ground_truth: SymbolicState
    roster: str = "blocks"

    def movables(self) -> list[str]:
        return [n for n in self.objects if n not in TABLE_PARTS and n != HAND]

    def held_object(self) -> str | None:
        for a in self.ground_truth:
            if a.pred == "in" and a.args[0] == HAND and a.args[1] != AIR:
                return a.args[1]
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "roster": self.roster,
            "cfg": self.cfg.to_dict(),
            "objects": {
                n: {
                    "position": list(o.position),
                    "orientation": list(o.orientation),
                    "bbox": list(o.bbox_size),
                }
                for n, o in self.objects.items()
            },
            "atoms": sorted([a.pred, *a.args] for a in self.ground_truth),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        objects = {
            n: PhysicalObjectState(tuple(v["position"]), tuple(v["orientation"]), tuple(v["bbox"]))
            for n, v in d["objects"].items()
        }
        atoms = SymbolicState(Atom(row[0], tuple(row[1:])) for row in d["atoms"])
        return cls(
            id=d["id"],
            seed=d["seed"],
            cfg=GeometryConfig.from_dict(d["cfg"]),
            objects=objects,
            ground_truth=atoms,
            roster=d.get("roster", "blocks"),
        )


# ---------------------------------------------------------------------------
# relation extraction

def _world_box(obj: PhysicalObjectState):
    """(center, half-extents) of the axis-aligned world box."""
    R = rotation_matrix(obj.orientation)
    # validate alignment once per object
    for axis in np.eye(3):
        _snap_unit(R @ axis)
    half = np.abs(R) @ (np.asarray(obj.bbox_size) / 2.0)
    return np.asarray(obj.position, dtype=float), half, R


def _face_contact(c1, h1, c2, h2, axis: int, cfg: GeometryConfig) -> bool:
    """Is o1's +axis face in supported contact with o2's -axis face?"""
    gap = (c2[axis] - h2[axis]) - (c1[axis] + h1[axis])
    if gap > cfg.eps_contact or gap < -cfg.eps_pen:
        return False
    area = 1.0
    ref1 = 1.0
    ref2 = 1.0
    for t in range(3):
        if t == axis:
            continue
        lo = max(c1[t] - h1[t], c2[t] - h2[t])
        hi = min(c1[t] + h1[t], c2[t] + h2[t])
        if hi <= lo:
            return False
        area *= hi - lo
        ref1 *= 2 * h1[t]
        ref2 *= 2 * h2[t]
    return area / min(ref1, ref2) >= cfg.min_overlap


def _check_penetration(name1, c1, h1, name2, c2, h2, cfg: GeometryConfig):
    depth = np.inf
    for t in range(3):
        overlap = min(c1[t] + h1[t], c2[t] + h2[t]) - max(c1[t] - h1[t], c2[t] - h2[t])
        if overlap <= cfg.eps_pen:
            return
        depth = min(depth, overlap)
    raise GeometryError(f"boxes {name1} and {name2} interpenetrate by {depth:.4f} m")


def extract_relations(objects: dict[str, PhysicalObjectState], cfg: GeometryConfig) -> SymbolicState:
    """Object-centered contact atoms, air atoms for exposed faces, and hand atoms.

    For every ordered pair (o1, o2): when a face of o1 lies within eps_contact
    of the opposing face of o2 with projected overlap fraction >= min_overlap,
    emit ``oc <o1's face in its own frame> o1 o2``. Faces with no contact get
    ``oc <face> o1 air``. Table parts only expose their top face; the gripper
    exposes none and instead contributes ``in hand <obj|air>`` plus the held
    object's grasp-face atom.
    """
    boxes = {}
    for name, obj in objects.items():
        boxes[name] = _world_box(obj)

    solids = [n for n in objects if n != HAND]

    # interpenetration (gripper exempt; held-object handling below)
    for i, n1 in enumerate(solids):
        for n2 in solids[i + 1:]:
            if n1 in TABLE_PARTS and n2 in TABLE_PARTS:
                continue
            c1, h1, _ = boxes[n1]
            c2, h2, _ = boxes[n2]
            _check_penetration(n1, c1, h1, n2, c2, h2, cfg)

    contacts: dict[str, set[str]] = {n: set() for n in objects}  # object -> covered oc faces
    atoms: set[Atom] = set()

    axis_dirs = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)]
    for n1 in solids:
        c1, h1, R1 = boxes[n1]
        for n2 in solids:
            if n1 == n2 or (n1 in TABLE_PARTS and n2 in TABLE_PARTS):
                continue
            c2, h2, _ = boxes[n2]
            for axis, sign in axis_dirs:
                # o1's face pointing along sign*axis against o2's opposing face
                if sign > 0:
                    hit = _face_contact(c1, h1, c2, h2, axis, cfg)
                else:
                    hit = _face_contact(c2, h2, c1, h1, axis, cfg)
                if not hit:
                    continue
                d = np.zeros(3)
                d[axis] = sign
                face = body_face_toward(R1, d)
                if n1 in TABLE_PARTS and face != "ocon":
                    continue
                atoms.add(Atom("oc", (face, n1, n2)))
                contacts[n1].add(face)

    # gripper: grip-volume test
    held = None
    if HAND in objects:
        ch, hh, _ = boxes[HAND] if HAND in boxes else _world_box(objects[HAND])
        hand_bottom = ch[2] - hh[2]
        for n in solids:
            if n in TABLE_PARTS:
                continue
            c, h, R = boxes[n]
            if abs(c[0] - ch[0]) <= hh[0] and abs(c[1] - ch[1]) <= hh[1] \
                    and abs((c[2] + h[2]) - hand_bottom) <= cfg.eps_contact:
                if held is not None:
                    raise GeometryError(f"gripper holds both {held} and {n}")
                held = n
        if held is None:
            atoms.add(Atom("in", (HAND, AIR)))
        else:
            atoms.add(Atom("in", (HAND, held)))
            approach = boxes[HAND][0] - boxes[held][0]
            axis = int(np.argmax(np.abs(approach)))
            d = np.zeros(3)
            d[axis] = np.sign(approach[axis]) if approach[axis] != 0 else 1.0
            grasp = body_face_toward(boxes[held][2], d)
            atoms.add(Atom("oc", (grasp, held, HAND)))
            contacts[held].add(grasp)

    # air atoms for exposed faces
    for n in solids:
        faces = ("ocon",) if n in TABLE_PARTS else OC_SIDES
        for face in faces:
            if face not in contacts[n]:
                atoms.add(Atom("oc", (face, n, AIR)))

    return SymbolicState(atoms)


def support_chains_closed(sc: Scenario) -> bool:
    """Every non-held movable reaches a table part through under-face contacts."""
    held = sc.held_object()
    supported = set(TABLE_PARTS)
    changed = True
    below = {}
    for a in sc.ground_truth:
        if a.pred == "oc" and a.args[2] not in (AIR, HAND):
            face, o1, o2 = a.args
            if world_side_of_face(rotation_matrix(sc.objects[o1].orientation), face) == "under":
                below[o1] = o2
    while changed:
        changed = False
        for o, sup in below.items():
            if o not in supported and sup in supported:
                supported.add(o)
                changed = True
    return all(m in supported or m == held for m in sc.movables())


# ---------------------------------------------------------------------------
# scenario generation

_TABLE_SIZE = (0.28, 0.46, 0.04)
_TABLE_X = {"tablel": -0.35, "tablem": 0.0, "tabler": 0.35}
_HAND_SIZE = (0.12, 0.12, 0.08)
_BLOCK_EDGE = 0.05

# canonical movable boxes for the cup/bottle/block roster
_TABLETOP_SIZES = {
    "cup": (0.07, 0.07, 0.10),
    "bottle": (0.07, 0.07, 0.24),
    "block": (_BLOCK_EDGE, _BLOCK_EDGE, _BLOCK_EDGE),
}


def _table_states() -> dict[str, PhysicalObjectState]:
    out = {}
    for name in TABLE_PARTS:
        out[name] = PhysicalObjectState(
            (_TABLE_X[name], 0.0, -_TABLE_SIZE[2] / 2), (0.0, 0.0, 0.0), _TABLE_SIZE
        )
    return out


def _stack_position(sup_center, sup_half, obj_half, rng, jitter):
    x = sup_center[0] + rng.uniform(-jitter, jitter)
    y = sup_center[1] + rng.uniform(-jitter, jitter)
    z = sup_center[2] + sup_half[2] + obj_half[2]
    return (x, y, z)


def generate_scenario(
    roster: str,
    seed: int,
    cfg: GeometryConfig | None = None,
    scenario_id: int = 0,
    p_hold: float = 0.15,
    p_stack: float = 0.55,
    max_tower: int = 4,
    pattern: str | None = None,
) -> Scenario:
    """Deterministically generate one scenario for the given roster.

    roster "blocks": a, b, c, d in random towers over the three table parts,
    planar orientations. roster "tabletop": cup, bottle, block with jittered
    sizes, upright-dominated orientations, optional stacking.

    pattern "two_towers" (blocks only) pins the stacking-benchmark shape:
    two towers of two blocks on two table parts, empty hand.
    """
    if cfg is None:
        cfg = GeometryConfig()
    rng = np.random.default_rng(seed)
    objects = _table_states()
    workspace_top = cfg.workspace[2][1]

    if pattern == "two_towers":
        if roster != "blocks":
            raise GenerationError("pattern 'two_towers' needs the blocks roster")
        return _two_towers_scenario(rng, cfg, scenario_id, seed)
    if pattern is not None:
        raise GenerationError(f"unknown pattern {pattern!r}")

    if roster == "blocks":
        movable_sizes = {n: (_BLOCK_EDGE,) * 3 for n in ("a", "b", "c", "d")}
        orientation_choices = {n: ORIENTATIONS for n in movable_sizes}
        jitter = 0.008
    elif roster == "tabletop":
        movable_sizes = {}
        for name, size in _TABLETOP_SIZES.items():
            scale = rng.uniform(0.98, 1.02)
            movable_sizes[name] = tuple(s * scale for s in size)
        orientation_choices = {
            "cup": ("upright",),
            "bottle": ("upright",),
            "block": ORIENTATIONS,
        }
        jitter = 0.012
    else:
        raise GenerationError(f"unknown roster {roster!r}")

    order = list(movable_sizes)
    rng.shuffle(order)

    held = order[0] if rng.random() < p_hold else None

    # support -> (center, half, tower height in objects); a support vanishes
    # from the pool once something rests on it (one tower per table part)
    tops: dict[str, tuple] = {}
    for t in TABLE_PARTS:
        c, h, _ = _world_box(objects[t])
        tops[t] = (c, h, 0)

    for name in order:
        if name == held:
            continue
        size = movable_sizes[name]
        orient = ORIENTATION_ANGLES[rng.choice(orientation_choices[name])]
        half = np.abs(rotation_matrix(orient)) @ (np.asarray(size) / 2.0)
        supports = [s for s, (_, _, height) in tops.items() if height < max_tower]
        stackable = [s for s in supports if s not in TABLE_PARTS]
        free_parts = [s for s in supports if s in TABLE_PARTS]
        if stackable and rng.random() < p_stack:
            sup = stackable[int(rng.integers(len(stackable)))]
        elif free_parts:
            sup = free_parts[int(rng.integers(len(free_parts)))]
        elif stackable:
            sup = stackable[int(rng.integers(len(stackable)))]
        else:
            raise GenerationError(f"no support available for {name}")
        c_sup, h_sup, height = tops[sup]
        pos = _stack_position(c_sup, h_sup, half, rng, jitter)
        if pos[2] + half[2] > workspace_top:
            raise GenerationError(f"tower under {name} exceeds the workspace")
        objects[name] = PhysicalObjectState(pos, orient, size)
        del tops[sup]
        tops[name] = (np.asarray(pos), half, height + 1)

    if held is not None:
        # place the held object last, over the first carry spot clear of the
        # towers (a fixed candidate set, as a real controller would use)
        size = movable_sizes[held]
        orient = ORIENTATION_ANGLES[rng.choice(orientation_choices[held])]
        half = np.abs(rotation_matrix(orient)) @ (np.asarray(size) / 2.0)
        hand_bottom = 0.30
        spots = [(-0.175, 0.17), (0.175, 0.17), (-0.175, -0.17), (0.175, -0.17), (0.0, 0.2)]
        start = int(rng.integers(len(spots)))
        chosen = None
        for k in range(len(spots)):
            hx, hy = spots[(start + k) % len(spots)]
            hx += rng.uniform(-0.008, 0.008)
            hy += rng.uniform(-0.008, 0.008)
            clear_of_towers = True
            for other, state in objects.items():
                if other in TABLE_PARTS:
                    continue
                c, h, _ = _world_box(state)
                if abs(hx - c[0]) < half[0] + h[0] + 0.02 and abs(hy - c[1]) < half[1] + h[1] + 0.02:
                    clear_of_towers = False
                    break
            if clear_of_towers:
                chosen = (hx, hy)
                break
        if chosen is None:
            raise GenerationError("could not fit the held object over the table")
        hx, hy = chosen
        objects[held] = PhysicalObjectState((hx, hy, hand_bottom - half[2]), orient, size)
        objects[HAND] = PhysicalObjectState(
            (hx, hy, hand_bottom + _HAND_SIZE[2] / 2), (0.0, 0.0, 0.0), _HAND_SIZE
        )
    else:
        # an idle gripper parks at its home pose, above grip range
        objects[HAND] = PhysicalObjectState(
            (0.30 + rng.uniform(-0.01, 0.01), 0.18 + rng.uniform(-0.01, 0.01), 0.55),
            (0.0, 0.0, 0.0),
            _HAND_SIZE,
        )

    atoms = extract_relations(objects, cfg)
    sc = Scenario(
        id=scenario_id, seed=seed, cfg=cfg, objects=objects, ground_truth=atoms, roster=roster
    )
    return sc


def _two_towers_scenario(rng, cfg: GeometryConfig, scenario_id: int, seed: int) -> Scenario:
    """Two towers of two blocks, random orientations, one table part free."""
    objects = _table_states()
    blocks = ["a", "b", "c", "d"]
    rng.shuffle(blocks)
    parts = list(TABLE_PARTS)
    rng.shuffle(parts)
    size = (_BLOCK_EDGE,) * 3
    for pair, part in zip((blocks[:2], blocks[2:]), parts[:2]):
        c_sup, h_sup, _ = _world_box(objects[part])
        for name in pair:
            orient = ORIENTATION_ANGLES[rng.choice(ORIENTATIONS)]
            half = np.abs(rotation_matrix(orient)) @ (np.asarray(size) / 2.0)
            pos = _stack_position(c_sup, h_sup, half, rng, 0.004)
            objects[name] = PhysicalObjectState(pos, orient, size)
            c_sup, h_sup = np.asarray(pos), half
    objects[HAND] = PhysicalObjectState(
        (rng.uniform(-0.3, 0.3), rng.uniform(-0.15, 0.15), 0.55), (0.0, 0.0, 0.0), _HAND_SIZE
    )
    atoms = extract_relations(objects, cfg)
    return Scenario(
        id=scenario_id, seed=seed, cfg=cfg, objects=objects, ground_truth=atoms, roster="blocks"
    )


# ---------------------------------------------------------------------------
# oracle

_PRED_TO_FACE = {"on": "ocon", "under": "ocunder"}


def label_oracle(predicate: str, o1: str, o2: str, sc: Scenario) -> bool:
    """Ground-truth answer for an evaluated predicate; stands in for the instructor."""
    if predicate in _PRED_TO_FACE:
        face = _PRED_TO_FACE[predicate]
        for name in (o1, o2):
            if name not in sc.objects:
                raise ValueError(f"unknown object {name!r}")
        if o1 == o2:
            return False
        return Atom("oc", (face, o1, o2)) in sc.ground_truth
    if predicate == "in":
        if o1 != HAND:
            raise ValueError("'in' is evaluated for the hand only")
        if o2 == AIR:
            return Atom("in", (HAND, AIR)) in sc.ground_truth
        if o2 not in sc.objects:
            raise ValueError(f"unknown object {o2!r}")
        return Atom("in", (HAND, o2)) in sc.ground_truth
    raise ValueError(f"unknown predicate {predicate!r}")


def evaluated_predicates(sc: Scenario) -> list[tuple[str, str, str]]:
    """The (predicate, o1, o2) triples scored in the abstraction study.

    on/under over all ordered pairs of distinct non-gripper objects; the
    gripper is only evaluated through `in` (one triple per movable). air
    never appears (it has no physical state).
    """
    physical = sorted(n for n in sc.objects if n != HAND)
    triples = []
    for pred in ("on", "under"):
        for o1 in physical:
            for o2 in physical:
                if o1 != o2:
                    triples.append((pred, o1, o2))
    for m in sorted(sc.movables()):
        triples.append(("in", HAND, m))
    return triples
