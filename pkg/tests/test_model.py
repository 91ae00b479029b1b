import numpy as np
import pytest

from ocplan.model import (
    OC_SIDES,
    OBSERVER_SIDES,
    Atom,
    PhysicalObjectState,
    SymbolicState,
    atom,
    make_sample,
    opposite,
)


def test_opposite_fixed_pairings():
    assert opposite("on") == "under"
    assert opposite("left") == "right"
    assert opposite("front") == "back"
    assert opposite("ocon") == "ocunder"


def test_opposite_is_involution_without_fixed_points():
    for s in OC_SIDES + OBSERVER_SIDES:
        assert opposite(s) != s
        assert opposite(opposite(s)) == s
    # exactly three pairs per vocabulary
    assert len({frozenset((s, opposite(s))) for s in OC_SIDES}) == 3


def test_opposite_rejects_unknown_token():
    with pytest.raises(ValueError):
        opposite("sideways")


def test_make_sample_componentwise():
    z1 = PhysicalObjectState((0, 0, 1), (0, 0, 0), (1, 1, 1))
    z2 = PhysicalObjectState((0, 0, 0), (0, 0, 0), (1, 1, 1))
    np.testing.assert_array_equal(make_sample(z1, z2), [0, 0, 1, 0, 0, 0, 0, 0, 0])


def test_make_sample_identical_objects_is_zero():
    z = PhysicalObjectState((0.3, -0.1, 0.2), (0, np.pi / 2, 0), (0.05, 0.05, 0.05))
    assert not make_sample(z, z).any()


def test_make_sample_antisymmetry_property():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = PhysicalObjectState(tuple(rng.normal(size=3)), tuple(rng.normal(size=3)),
                                tuple(rng.uniform(0.01, 1, size=3)))
        b = PhysicalObjectState(tuple(rng.normal(size=3)), tuple(rng.normal(size=3)),
                                tuple(rng.uniform(0.01, 1, size=3)))
        np.testing.assert_allclose(make_sample(a, b), -make_sample(b, a))


def test_vector_concatenation_order_and_roundtrip():
    z = PhysicalObjectState((1, 2, 3), (4, 5, 6), (7, 8, 9))
    np.testing.assert_array_equal(z.vector(), np.arange(1.0, 10.0))
    assert PhysicalObjectState.from_vector(z.vector()) == z


def test_bbox_must_be_positive():
    with pytest.raises(ValueError):
        PhysicalObjectState((0, 0, 0), (0, 0, 0), (0.1, 0.0, 0.1))


def test_symbolic_state_set_semantics():
    a = atom("oc", "ocon", "A", "B")
    b = atom("OC", "OCON", "a", "b")
    assert a == b  # case-insensitive canonicalization
    s1 = SymbolicState([a, atom("in", "hand", "air")])
    s2 = SymbolicState([atom("in", "hand", "air"), b, b])
    assert s1 == s2
    assert s1.holds(a)
    assert not s1.holds(atom("oc", "ocunder", "a", "b"))


def test_atom_substitution_and_groundness():
    pat = Atom("oc", ("?s", "?o", "air"))
    assert not pat.is_ground
    g = pat.substitute({"?s": "ocon", "?o": "a"})
    assert g == Atom("oc", ("ocon", "a", "air"))
    assert g.is_ground
    assert str(g) == "(oc ocon a air)"
