"""Core symbolic and physical value types shared by every other module.

Symbolic identifiers are lowercase strings. ``air`` and ``hand`` are reserved:
``air`` is the abstract object standing for "nothing touches this face" /
"empty gripper", ``hand`` is the gripper.

Two disjoint side vocabularies are used throughout:

* observer-frame relation tokens: ``on under left right front back``
  (the face of an object currently pointing in that world direction);
* object-frame side tokens: ``ocon ocunder ocleft ocright ocfront ocback``
  (a face named in the object's own frame, independent of its orientation).

Keeping them disjoint matters: the hybrid domain's ``clear`` predicate holds
facts in both vocabularies for the same object, and for a rotated object the
two name different faces.

An atom ``oc s o1 o2`` (or ``ob r o1 o2``) states that o1's face named ``s``
(``r``) is in contact with o2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AIR = "air"
HAND = "hand"

# Observer-frame relation tokens, paired with world directions (x right,
# y front, z up).
OBSERVER_SIDES = ("on", "under", "left", "right", "front", "back")

# Object-frame side tokens.
OC_SIDES = ("ocon", "ocunder", "ocleft", "ocright", "ocfront", "ocback")

ORIENTATIONS = ("upright", "upsidedown", "horizleft", "horizright")

# In-plane observer relations: the four the planar experiments permute.
PLANAR_OBSERVER_SIDES = ("on", "under", "left", "right")
PLANAR_OC_SIDES = ("ocon", "ocunder", "ocleft", "ocright")

_OPPOSITE = {
    "on": "under", "under": "on",
    "left": "right", "right": "left",
    "front": "back", "back": "front",
    "ocon": "ocunder", "ocunder": "ocon",
    "ocleft": "ocright", "ocright": "ocleft",
    "ocfront": "ocback", "ocback": "ocfront",
}


def opposite(side: str) -> str:
    """Return the paired side token (top/bottom, left/right, front/back).

    Works for both the observer and the object-frame vocabulary and is an
    involution: opposite(opposite(s)) == s.
    """
    try:
        return _OPPOSITE[side]
    except KeyError:
        raise ValueError(f"not a side token: {side!r}") from None


def canonical_name(name: str) -> str:
    """Lowercase an identifier; the symbolic layer is case-insensitive."""
    return name.lower()


@dataclass(frozen=True, order=True)
class Atom:
    """A grounded (or pattern) predicate: name plus ordered arguments.

    Pattern atoms may carry ``?var`` arguments; ground atoms never do.
    """

    pred: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.pred,) + self.args) + ")"

    @property
    def is_ground(self) -> bool:
        return not any(a.startswith("?") for a in self.args)

    def substitute(self, binding: dict[str, str]) -> "Atom":
        return Atom(self.pred, tuple(binding.get(a, a) for a in self.args))


def atom(pred: str, *args: str) -> Atom:
    return Atom(canonical_name(pred), tuple(canonical_name(a) for a in args))


class SymbolicState(frozenset):
    """A set of ground atoms. Order-free equality, exact membership."""

    def __new__(cls, atoms=()):
        return super().__new__(cls, atoms)

    def holds(self, a: Atom) -> bool:
        return a in self

    def __str__(self) -> str:
        return "{" + ", ".join(str(a) for a in sorted(self)) + "}"


@dataclass(frozen=True)
class OperatorSchema:
    """Lifted precondition-action-effect operator.

    ``pre_pos``/``pre_neg`` are positive/negated precondition patterns,
    ``add``/``del_`` the effect patterns. Every variable in the body must
    appear in ``params``.
    """

    name: str
    params: tuple[str, ...]
    pre_pos: frozenset[Atom]
    pre_neg: frozenset[Atom]
    add: frozenset[Atom]
    del_: frozenset[Atom]

    def variables(self) -> set[str]:
        out: set[str] = set()
        for group in (self.pre_pos, self.pre_neg, self.add, self.del_):
            for a in group:
                out.update(t for t in a.args if t.startswith("?"))
        return out

    def ground(self, binding: dict[str, str]) -> "GroundAction":
        sub = lambda group: frozenset(a.substitute(binding) for a in group)
        return GroundAction(
            schema=self,
            binding=tuple(binding[p] for p in self.params),
            pre_pos=sub(self.pre_pos),
            pre_neg=sub(self.pre_neg),
            add=sub(self.add),
            del_=sub(self.del_),
        )


@dataclass(frozen=True)
class GroundAction:
    """A fully instantiated operator: no variables remain."""

    schema: OperatorSchema
    binding: tuple[str, ...]
    pre_pos: frozenset[Atom]
    pre_neg: frozenset[Atom]
    add: frozenset[Atom]
    del_: frozenset[Atom]

    @property
    def name(self) -> str:
        return self.schema.name

    def __str__(self) -> str:
        return " ".join((self.name,) + self.binding)

    def sort_key(self) -> tuple:
        return (self.name, self.binding)


@dataclass(frozen=True)
class Plan:
    """An ordered action sequence; validity is checked by planner.validate_plan."""

    actions: tuple[GroundAction, ...]

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def to_text(self) -> str:
        """Line-oriented form ``i) name arg1 arg2 ...`` (1-based steps)."""
        return "\n".join(f"{i + 1}) {a}" for i, a in enumerate(self.actions))


@dataclass(frozen=True)
class PhysicalObjectState:
    """Continuous description of one rigid object.

    position: box center, meters. orientation: extrinsic rotation angles
    (x, y, z order; the planar orientation set only uses the y component).
    bbox_size: full edge lengths of the bounding box, meters.

    The 9-vector concatenation order is fixed: position, orientation,
    bbox_size.
    """

    position: tuple[float, float, float]
    orientation: tuple[float, float, float]
    bbox_size: tuple[float, float, float]

    def __post_init__(self):
        # normalize numpy scalars so instances serialize and compare cleanly
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "orientation", tuple(float(v) for v in self.orientation))
        object.__setattr__(self, "bbox_size", tuple(float(v) for v in self.bbox_size))
        if any(s <= 0 for s in self.bbox_size):
            raise ValueError(f"bbox_size must be strictly positive: {self.bbox_size}")

    def vector(self) -> np.ndarray:
        return np.asarray(self.position + self.orientation + self.bbox_size, dtype=float)

    @classmethod
    def from_vector(cls, z) -> "PhysicalObjectState":
        z = np.asarray(z, dtype=float)
        if z.shape != (9,):
            raise ValueError(f"expected a 9-vector, got shape {z.shape}")
        return cls(tuple(z[0:3]), tuple(z[3:6]), tuple(z[6:9]))


def make_sample(z1: PhysicalObjectState, z2: PhysicalObjectState) -> np.ndarray:
    """Relative-difference vector z1 - z2 for a binary predicate's argument pair.

    Antisymmetric by construction: make_sample(a, b) == -make_sample(b, a).
    """
    return z1.vector() - z2.vector()
