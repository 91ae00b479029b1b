from pathlib import Path

import pytest

from ocplan.domains import build_domain
from ocplan.model import Atom
from ocplan.pddl import (
    PddlError,
    parse_domain,
    parse_problem,
    print_domain,
    print_problem,
)

DATA = Path(__file__).parent / "data"


def test_parse_object_centered_pick_structure():
    d = parse_domain((DATA / "domain_object_centered.pddl").read_text())
    assert len(d.schemas) == 2
    pick = d.schema("pick")
    # six parameters and six positive preconditions (the source table's
    # stray parenthesis must not truncate the precondition list)
    assert pick.params == ("?obj-hand", "?obj", "?loc", "?obj-loc", "?loc-obj", "?obj-force")
    assert len(pick.pre_pos) == 6
    assert not pick.pre_neg
    assert Atom("in", ("hand", "air")) in pick.pre_pos


def test_parse_empty_action_body():
    text = """(define (domain mini)
      (:action noop :parameters () :precondition (and) :effect (and)))"""
    d = parse_domain(text)
    s = d.schema("noop")
    assert s.params == ()
    assert not s.pre_pos and not s.pre_neg and not s.add and not s.del_


def test_arity_mismatch_is_rejected():
    text = """(define (domain bad)
      (:action a :parameters (?x ?y)
        :precondition (and (on ?x ?y))
        :effect (and (on ?x))))"""
    with pytest.raises(PddlError, match="arity"):
        parse_domain(text)


def test_unbound_variable_is_rejected():
    text = """(define (domain bad)
      (:action a :parameters (?x)
        :precondition (and (on ?x ?y))
        :effect (and)))"""
    with pytest.raises(PddlError, match="absent from :parameters"):
        parse_domain(text)


def test_syntax_error_carries_position():
    with pytest.raises(PddlError) as err:
        parse_domain("(define (domain x)\n  (:action a :parameters (?x))")
    assert "line" in str(err.value)


def test_domain_round_trips_both_styles():
    for style in ("oc", "hybrid"):
        d = build_domain(style)
        assert parse_domain(print_domain(d)) == d


def test_problem_parsing_and_roundtrip():
    text = """(define (problem two-block)
      (:domain pickplace-object-centered)
      (:objects a b hand air)
      (:init (oc ocleft a b) (oc ocright b a) (in hand air)
             (oc ocon a air) (force a ocon))
      (:goal (and (oc ocon b a))))"""
    p = parse_problem(text)
    assert p.objects == ("a", "b", "hand", "air")
    assert Atom("oc", ("ocleft", "a", "b")) in p.init
    assert p.goal == frozenset({Atom("oc", ("ocon", "b", "a"))})
    assert parse_problem(print_problem(p)) == p


def test_goal_relevant_objects_of_two_block_problem():
    text = """(define (problem fig)
      (:domain d)
      (:objects a b hand air)
      (:init (oc ocleft a b) (oc ocright b a))
      (:goal (and (oc ocon a b))))"""
    p = parse_problem(text)
    goal_objects = {t for atom in p.goal for t in atom.args if t in p.objects}
    assert goal_objects == {"a", "b"}


def test_empty_goal_is_vacuous():
    text = """(define (problem empty)
      (:domain d) (:objects a) (:init (clear a ocon)) (:goal (and)))"""
    assert parse_problem(text).goal == frozenset()


def test_undeclared_object_is_rejected():
    text = """(define (problem bad)
      (:domain d) (:objects a) (:init (on a e)) (:goal (and)))"""
    with pytest.raises(PddlError, match="undeclared object 'e'"):
        parse_problem(text)


def test_side_and_orientation_tokens_need_no_declaration():
    text = """(define (problem ok)
      (:domain d) (:objects a)
      (:init (isoriented a upright) (clear a ocon) (clear a on))
      (:goal (and)))"""
    parse_problem(text)  # must not raise


def test_negative_goals_unsupported():
    text = """(define (problem neg)
      (:domain d) (:objects a b) (:init) (:goal (and (not (on a b)))))"""
    with pytest.raises(PddlError, match="negative"):
        parse_problem(text)


def test_duplicate_atoms_deduplicated():
    text = """(define (domain dup)
      (:action a :parameters (?x)
        :precondition (and (clear ?x ocon) (clear ?x ocon))
        :effect (and (clear ?x ocunder))))"""
    assert len(parse_domain(text).schema("a").pre_pos) == 1


def test_comments_and_case_insensitivity():
    text = """; a comment
    (DEFINE (Domain CasE) ; trailing comment
      (:ACTION A :parameters (?X) :precondition (AND (On ?x Table)) :effect (and)))"""
    d = parse_domain(text)
    assert d.name == "case"
    assert Atom("on", ("?x", "table")) in d.schema("a").pre_pos
