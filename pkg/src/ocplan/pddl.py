"""Parser and printer for the STRIPS-style domain/problem language.

Grammar (full reference in docs/domain-language.md):

    domain   := (define (domain NAME) [(:predicates (NAME VAR*)*)] ACTION*)
    action   := (:action NAME :parameters (VAR*)
                  :precondition CONJ :effect CONJ)
    conj     := (and LITERAL*) | LITERAL
    literal  := ATOM | (not ATOM)
    atom     := (NAME TERM*)          ; TERM is ?var or a constant
    problem  := (define (problem NAME) (:domain NAME)
                  (:objects NAME*) (:init ATOM*) (:goal CONJ))

Comments run from ``;`` to end of line. Identifiers are case-insensitive and
canonicalized to lowercase. No types, no ADL, no numeric fluents; goals are
positive conjunctions.

Predicate arities are taken from ``:predicates`` when present and inferred
from first use otherwise; any later use with a different arity is an error.
Side/orientation tokens and the reserved ids ``air``/``hand`` are exempt from
the problem's object-declaration check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    AIR,
    HAND,
    OBSERVER_SIDES,
    OC_SIDES,
    ORIENTATIONS,
    Atom,
    OperatorSchema,
    SymbolicState,
    canonical_name,
)

# Tokens that may appear in atoms without being declared as problem objects.
BUILTIN_TOKENS = frozenset(OBSERVER_SIDES) | frozenset(OC_SIDES) | frozenset(ORIENTATIONS) | {AIR, HAND}


class PddlError(ValueError):
    """Syntax or validation error, with 1-based line/column when available."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


@dataclass
class DomainFile:
    name: str
    schemas: tuple[OperatorSchema, ...]
    arities: dict[str, int] = field(default_factory=dict)

    def schema(self, name: str) -> OperatorSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class ProblemFile:
    name: str
    domain_name: str
    objects: tuple[str, ...]
    init: SymbolicState
    goal: frozenset[Atom]


# ---------------------------------------------------------------------------
# tokenizer / s-expression reader

@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        if c in "()":
            toks.append(_Tok(c, line, col))
            col += 1
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        toks.append(_Tok(text[i:j], line, col))
        col += j - i
        i = j
    return toks


def _read_sexpr(toks: list[_Tok], pos: int):
    """Return (tree, next_pos). Tree nodes are lists or _Tok leaves."""
    if pos >= len(toks):
        last = toks[-1] if toks else _Tok("", 1, 1)
        raise PddlError("unexpected end of input", last.line, last.col)
    t = toks[pos]
    if t.text == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(toks):
                raise PddlError("missing closing parenthesis", t.line, t.col)
            if toks[pos].text == ")":
                return items, pos + 1
            item, pos = _read_sexpr(toks, pos)
            items.append(item)
    if t.text == ")":
        raise PddlError("unbalanced closing parenthesis", t.line, t.col)
    return t, pos + 1


def _head(tree) -> str:
    if not isinstance(tree, list) or not tree or not isinstance(tree[0], _Tok):
        return ""
    return tree[0].text.lower()


def _leaf(node, what: str) -> _Tok:
    if not isinstance(node, _Tok):
        raise PddlError(f"expected {what}", *_loc(node))
    return node


def _loc(node) -> tuple[int | None, int | None]:
    if isinstance(node, _Tok):
        return node.line, node.col
    for item in node:
        return _loc(item)
    return None, None


# ---------------------------------------------------------------------------
# parsing

class _ArityTable:
    def __init__(self, declared: dict[str, int] | None = None):
        self.arities: dict[str, int] = dict(declared or {})
        self.declared = bool(declared)

    def check(self, pred: str, arity: int, tok: _Tok):
        known = self.arities.get(pred)
        if known is None:
            if self.declared:
                raise PddlError(f"undeclared predicate {pred!r}", tok.line, tok.col)
            self.arities[pred] = arity
        elif known != arity:
            raise PddlError(
                f"arity mismatch for {pred!r}: used with {arity} args, expected {known}",
                tok.line, tok.col,
            )


def _parse_atom(tree, arities: _ArityTable) -> Atom:
    if not isinstance(tree, list) or not tree:
        raise PddlError("expected an atom", *_loc(tree))
    head = _leaf(tree[0], "predicate name")
    pred = canonical_name(head.text)
    if pred.startswith("?") or pred in (":", "and", "not"):
        raise PddlError(f"bad predicate name {pred!r}", head.line, head.col)
    args = []
    for node in tree[1:]:
        t = _leaf(node, "atom argument")
        args.append(canonical_name(t.text))
    arities.check(pred, len(args), head)
    return Atom(pred, tuple(args))


def _parse_conj(tree, arities: _ArityTable, allow_neg: bool):
    """Return (positives, negatives) as lists of Atom; duplicates dropped."""
    pos: list[Atom] = []
    neg: list[Atom] = []

    def one(node):
        if _head(node) == "not":
            if not allow_neg:
                raise PddlError("negative literal not allowed here", *_loc(node))
            if len(node) != 2:
                raise PddlError("(not ...) takes exactly one atom", *_loc(node))
            neg.append(_parse_atom(node[1], arities))
        else:
            pos.append(_parse_atom(node, arities))

    if _head(tree) == "and":
        for node in tree[1:]:
            one(node)
    else:
        one(tree)
    return list(dict.fromkeys(pos)), list(dict.fromkeys(neg))


def parse_domain(text: str) -> DomainFile:
    """Parse a domain definition; raises PddlError on any documented defect."""
    toks = _tokenize(text)
    if not toks:
        raise PddlError("empty input", 1, 1)
    tree, pos = _read_sexpr(toks, 0)
    if pos != len(toks):
        raise PddlError("trailing tokens after domain", toks[pos].line, toks[pos].col)
    if _head(tree) != "define":
        raise PddlError("expected (define (domain ...) ...)", *_loc(tree))

    name = None
    declared: dict[str, int] | None = None
    action_trees = []
    for node in tree[1:]:
        h = _head(node)
        if h == "domain":
            name = canonical_name(_leaf(node[1], "domain name").text)
        elif h == ":requirements":
            continue
        elif h == ":predicates":
            declared = {}
            for p in node[1:]:
                if not isinstance(p, list) or not p:
                    raise PddlError("bad :predicates entry", *_loc(p))
                pname = canonical_name(_leaf(p[0], "predicate name").text)
                declared[pname] = len(p) - 1
        elif h == ":action":
            action_trees.append(node)
        else:
            raise PddlError(f"unexpected section {h!r} in domain", *_loc(node))
    if name is None:
        raise PddlError("missing (domain NAME)", *_loc(tree))

    arities = _ArityTable(declared)
    schemas = []
    for node in action_trees:
        schemas.append(_parse_action(node, arities))
    return DomainFile(name=name, schemas=tuple(schemas), arities=dict(arities.arities))


def _parse_action(tree, arities: _ArityTable) -> OperatorSchema:
    name_tok = _leaf(tree[1], "action name")
    name = canonical_name(name_tok.text)
    sections: dict[str, object] = {}
    i = 2
    while i < len(tree):
        key_tok = _leaf(tree[i], "action section keyword")
        key = key_tok.text.lower()
        if key not in (":parameters", ":precondition", ":effect"):
            raise PddlError(f"unexpected token {key!r} in action", key_tok.line, key_tok.col)
        if i + 1 >= len(tree):
            raise PddlError(f"missing body for {key}", key_tok.line, key_tok.col)
        sections[key] = tree[i + 1]
        i += 2
    for key in (":parameters", ":precondition", ":effect"):
        if key not in sections:
            raise PddlError(f"action {name!r} lacks {key}", name_tok.line, name_tok.col)

    params_tree = sections[":parameters"]
    if not isinstance(params_tree, list):
        raise PddlError(":parameters must be a parenthesized list", *_loc(params_tree))
    params = []
    for node in params_tree:
        t = _leaf(node, "parameter")
        v = canonical_name(t.text)
        if not v.startswith("?"):
            raise PddlError(f"parameter {v!r} must start with '?'", t.line, t.col)
        if v in params:
            raise PddlError(f"duplicate parameter {v!r}", t.line, t.col)
        params.append(v)

    pre_pos, pre_neg = _parse_conj(sections[":precondition"], arities, allow_neg=True)
    add, del_ = _parse_conj(sections[":effect"], arities, allow_neg=True)

    schema = OperatorSchema(
        name=name,
        params=tuple(params),
        pre_pos=frozenset(pre_pos),
        pre_neg=frozenset(pre_neg),
        add=frozenset(add),
        del_=frozenset(del_),
    )
    unbound = schema.variables() - set(params)
    if unbound:
        raise PddlError(
            f"action {name!r} uses variables absent from :parameters: "
            + " ".join(sorted(unbound)),
            name_tok.line, name_tok.col,
        )
    return schema


def parse_problem(text: str, domain: DomainFile | None = None) -> ProblemFile:
    """Parse a problem; when a domain is given its arities are enforced."""
    toks = _tokenize(text)
    if not toks:
        raise PddlError("empty input", 1, 1)
    tree, pos = _read_sexpr(toks, 0)
    if pos != len(toks):
        raise PddlError("trailing tokens after problem", toks[pos].line, toks[pos].col)
    if _head(tree) != "define":
        raise PddlError("expected (define (problem ...) ...)", *_loc(tree))

    name = None
    domain_name = ""
    objects: list[str] = []
    init_atoms: list[Atom] = []
    goal_atoms: list[Atom] = []
    arities = _ArityTable(dict(domain.arities) if domain else None)
    saw_init = saw_goal = False

    for node in tree[1:]:
        h = _head(node)
        if h == "problem":
            name = canonical_name(_leaf(node[1], "problem name").text)
        elif h == ":domain":
            domain_name = canonical_name(_leaf(node[1], "domain name").text)
        elif h == ":objects":
            for t in node[1:]:
                objects.append(canonical_name(_leaf(t, "object name").text))
        elif h == ":init":
            saw_init = True
            for a in node[1:]:
                init_atoms.append(_parse_atom(a, arities))
        elif h == ":goal":
            saw_goal = True
            if len(node) != 2:
                raise PddlError(":goal takes exactly one formula", *_loc(node))
            pos_, neg_ = _parse_conj(node[1], arities, allow_neg=False)
            goal_atoms.extend(pos_)
        else:
            raise PddlError(f"unexpected section {h!r} in problem", *_loc(node))

    if name is None:
        raise PddlError("missing (problem NAME)", *_loc(tree))
    if not saw_init or not saw_goal:
        raise PddlError(f"problem {name!r} needs :init and :goal", *_loc(tree))

    known = set(objects) | BUILTIN_TOKENS
    for a in init_atoms + goal_atoms:
        for arg in a.args:
            if arg.startswith("?"):
                raise PddlError(f"variable {arg!r} in ground atom {a}")
            if arg not in known:
                raise PddlError(f"undeclared object {arg!r} in {a}")

    return ProblemFile(
        name=name,
        domain_name=domain_name,
        objects=tuple(objects),
        init=SymbolicState(init_atoms),
        goal=frozenset(goal_atoms),
    )


# ---------------------------------------------------------------------------
# printing

def _fmt_atom(a: Atom) -> str:
    return "(" + " ".join((a.pred,) + a.args) + ")"


def _fmt_conj(pos, neg, indent: str) -> str:
    lits = [_fmt_atom(a) for a in sorted(pos)] + [f"(not {_fmt_atom(a)})" for a in sorted(neg)]
    if not lits:
        return "(and)"
    body = ("\n" + indent).join(lits)
    return f"(and {body})"


def print_domain(d: DomainFile) -> str:
    """Canonical text form; parse_domain(print_domain(d)) equals d structurally."""
    lines = [f"(define (domain {d.name})"]
    if d.arities:
        preds = []
        for pred in sorted(d.arities):
            args = " ".join(f"?x{i}" for i in range(d.arities[pred]))
            preds.append(f"({pred}{(' ' + args) if args else ''})")
        lines.append(f"  (:predicates {' '.join(preds)})")
    for s in d.schemas:
        lines.append(f"  (:action {s.name}")
        lines.append(f"   :parameters ({' '.join(s.params)})")
        lines.append(f"   :precondition {_fmt_conj(s.pre_pos, s.pre_neg, '                  ')}")
        lines.append(f"   :effect {_fmt_conj(s.add, s.del_, '           ')})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(p: ProblemFile) -> str:
    lines = [
        f"(define (problem {p.name})",
        f"  (:domain {p.domain_name})",
        f"  (:objects {' '.join(p.objects)})",
        "  (:init",
    ]
    for a in sorted(p.init):
        lines.append(f"    {_fmt_atom(a)}")
    lines.append("  )")
    goal = " ".join(_fmt_atom(a) for a in sorted(p.goal))
    lines.append(f"  (:goal (and {goal}))" if goal else "  (:goal (and))")
    lines.append(")")
    return "\n".join(lines) + "\n"
