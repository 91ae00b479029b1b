"""Grounding, forward search, and plan validation.

Grounding enumerates schema bindings with a semi-naive join over the
delete-relaxed reachability fixpoint of the initial state: a ground action
survives iff all its positive preconditions are relaxed-reachable. Bindings
that would add and delete the same atom are dropped (they describe physically
impossible situations such as grasping the resting face; see the operator
schema invariant).

Search runs over bitmask states: the relaxed-reachable atom universe is
sorted once, so masks are canonical and identical inputs give byte-identical
plans. ``bfs`` is the optimality oracle; ``astar_goalcount`` is (weighted) A*
with the goal-count heuristic, f = g + weight * h, ties broken by insertion
order.

The hot paths work on (pred, args) tuples and integer masks; GroundAction
objects are materialized lazily.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field

from .model import Atom, GroundAction, OperatorSchema, Plan, SymbolicState
from .pddl import DomainFile, ProblemFile


class InapplicableActionError(ValueError):
    pass


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    wall_time_s: float = 0.0
    plan_length: int = -1


# ---------------------------------------------------------------------------
# schema compilation: patterns as (pred, argspec); argspec entries are ints,
# s >= 0 a parameter index, s < 0 an index ~s into the schema constant table

def _instantiate(tmpl, key, consts):
    pred, spec = tmpl
    return (pred, tuple(key[s] if s >= 0 else consts[~s] for s in spec))


class _CompiledSchema:
    def __init__(self, schema: OperatorSchema):
        self.schema = schema
        self.n_params = len(schema.params)
        self.consts: list[str] = []

        def compile_pattern(a: Atom):
            spec = []
            for arg in a.args:
                if arg.startswith("?"):
                    spec.append(schema.params.index(arg))
                else:
                    if arg not in self.consts:
                        self.consts.append(arg)
                    spec.append(~self.consts.index(arg))
            return (a.pred, tuple(spec))

        self.pre_pos = [compile_pattern(a) for a in sorted(schema.pre_pos)]
        self.pre_neg = [compile_pattern(a) for a in sorted(schema.pre_neg)]
        self.add = [compile_pattern(a) for a in sorted(schema.add)]
        self.del_ = [compile_pattern(a) for a in sorted(schema.del_)]
        bound = {s for _, spec in self.pre_pos for s in spec if s >= 0}
        self.free = [i for i in range(self.n_params) if i not in bound]

        # per delta-pattern join orders: after seeding the binding from
        # pattern i, visit the rest most-constrained-first (computed once)
        self.orders: list[list] = []
        for i in range(len(self.pre_pos)):
            bound_now = {s for s in self.pre_pos[i][1] if s >= 0}
            remaining = [p for j, p in enumerate(self.pre_pos) if j != i]
            order = []
            while remaining:
                def score(p):
                    n_bound = sum(1 for s in p[1] if (s < 0 or s in bound_now))
                    return (n_bound, -len(p[1]))
                best = max(remaining, key=score)
                remaining.remove(best)
                order.append(best)
                bound_now.update(s for s in best[1] if s >= 0)
            self.orders.append(order)

        # (add, del) template pairs that can denote the same atom under some
        # binding; a binding satisfying any pair's equality constraints is
        # dropped at grounding time
        self.conflicts = []
        for pa, sa in self.add:
            for pd, sd in self.del_:
                if pa != pd or len(sa) != len(sd):
                    continue
                constraints = []
                ok = True
                for x, y in zip(sa, sd):
                    if x == y:
                        continue
                    if x < 0 and y < 0:
                        ok = False
                        break
                    constraints.append((x, y))
                if ok:
                    self.conflicts.append(tuple(constraints))

    def value(self, s: int, key) -> str:
        return key[s] if s >= 0 else self.consts[~s]

    def conflicting(self, key) -> bool:
        for constraints in self.conflicts:
            hit = True
            for x, y in constraints:
                if self.value(x, key) != self.value(y, key):
                    hit = False
                    break
            if hit:
                return True
        return False


# ---------------------------------------------------------------------------
# the grounded task

@dataclass
class GroundedTask:
    domain: DomainFile
    problem: ProblemFile
    init: SymbolicState
    goal: frozenset[Atom]
    atom_universe: frozenset[Atom]
    binding_space: int  # naive |universe-tokens|^arity enumeration size

    _compiled: dict[str, _CompiledSchema] = field(repr=False, default_factory=dict)
    _bindings: list[tuple[str, tuple[str, ...]]] = field(repr=False, default_factory=list)
    _atoms_sorted: list[Atom] = field(repr=False, default_factory=list)
    _atom_ids: dict = field(repr=False, default_factory=dict)
    _masks: list = field(repr=False, default_factory=list)
    _buckets: list = field(repr=False, default_factory=list)
    _init_mask: int = field(repr=False, default=0)
    _goal_mask: int = field(repr=False, default=0)
    _unreachable_goal: bool = field(repr=False, default=False)
    _actions_cache: list = field(repr=False, default=None)
    _bykey: dict = field(repr=False, default=None)

    def __len__(self):
        return len(self._bindings)

    @property
    def n_actions(self) -> int:
        return len(self._bindings)

    def action(self, n: int) -> GroundAction:
        name, key = self._bindings[n]
        cs = self._compiled[name]
        return cs.schema.ground(dict(zip(cs.schema.params, key)))

    @property
    def actions(self) -> list[GroundAction]:
        """All ground actions, ordered by (name, bound arguments)."""
        if self._actions_cache is None:
            self._actions_cache = [self.action(n) for n in range(len(self._bindings))]
        return self._actions_cache

    def action_by_key(self, name: str, args: tuple[str, ...]):
        if self._bykey is None:
            self._bykey = {b: n for n, b in enumerate(self._bindings)}
        n = self._bykey.get((name, args))
        return self.action(n) if n is not None else None

    def state_mask(self, state) -> int:
        m = 0
        for a in state:
            i = self._atom_ids.get((a.pred, a.args))
            if i is not None:
                m |= 1 << i
        return m

    def mask_state(self, mask: int) -> SymbolicState:
        atoms = []
        i = 0
        while mask:
            if mask & 1:
                atoms.append(self._atoms_sorted[i])
            mask >>= 1
            i += 1
        return SymbolicState(atoms)


# ---------------------------------------------------------------------------
# join-based grounding over (pred, args) tuples

class _Index:
    def __init__(self):
        self.by_pred: dict[str, list[tuple]] = {}
        self.by_pos: dict[tuple, list[tuple]] = {}
        self.all: set[tuple] = set()

    def add(self, fact: tuple) -> bool:
        if fact in self.all:
            return False
        self.all.add(fact)
        pred, args = fact
        self.by_pred.setdefault(pred, []).append(args)
        for i, v in enumerate(args):
            self.by_pos.setdefault((pred, i, v), []).append(args)
        return True


def _candidates(tmpl, key, consts, index: _Index):
    pred, spec = tmpl
    best = None
    for i, s in enumerate(spec):
        v = key[s] if s >= 0 else consts[~s]
        if v is None:
            continue
        lst = index.by_pos.get((pred, i, v))
        if lst is None:
            return ()
        if best is None or len(lst) < len(best):
            best = lst
    if best is None:
        best = index.by_pred.get(pred, ())
    return best


def _bind(tmpl, args, key, consts):
    """Extend partial binding (list with None slots) against concrete args."""
    _, spec = tmpl
    if len(args) != len(spec):
        return None
    out = None
    for s, v in zip(spec, args):
        if s >= 0:
            cur = (out if out is not None else key)[s]
            if cur is None:
                if out is None:
                    out = list(key)
                out[s] = v
            elif cur != v:
                return None
        elif consts[~s] != v:
            return None
    return out if out is not None else list(key)


def _match(order, pos, key, consts, index: _Index, emit):
    """Walk the precompiled join order, extending the binding at each level."""
    if pos == len(order):
        emit(key)
        return
    tmpl = order[pos]
    for args in _candidates(tmpl, key, consts, index):
        nk = _bind(tmpl, args, key, consts)
        if nk is not None:
            _match(order, pos + 1, nk, consts, index, emit)


def ground(domain: DomainFile, problem: ProblemFile) -> GroundedTask:
    """Enumerate relaxed-reachable ground actions, deterministically ordered."""
    index = _Index()
    for a in problem.init:
        index.add((a.pred, a.args))

    tokens = sorted(set(problem.objects) | {t for a in problem.init for t in a.args})
    compiled = {s.name: _CompiledSchema(s) for s in domain.schemas}
    binding_space = sum(len(tokens) ** len(s.params) for s in domain.schemas)

    seen: dict[str, set] = {name: set() for name in compiled}
    new_facts: list[tuple] = []

    def record(cs: _CompiledSchema, key_list):
        key = tuple(key_list)
        bucket = seen[cs.schema.name]
        if key in bucket:
            return
        if cs.conflicting(key):
            return
        bucket.add(key)
        for tmpl in cs.add:
            fact = _instantiate(tmpl, key, cs.consts)
            if fact not in index.all:
                new_facts.append(fact)

    def emit(cs: _CompiledSchema, key_list):
        if cs.free:
            stack = [list(key_list)]
            for i in cs.free:
                nxt = []
                for base in stack:
                    for tok in tokens:
                        row = list(base)
                        row[i] = tok
                        nxt.append(row)
                stack = nxt
            for row in stack:
                record(cs, row)
        else:
            record(cs, key_list)

    frontier = list(index.all)
    first_pass = True
    while True:
        new_facts = []
        delta_by_pred: dict[str, list[tuple]] = {}
        for pred, args in frontier:
            delta_by_pred.setdefault(pred, []).append(args)

        for cs in compiled.values():
            patterns = cs.pre_pos
            if not patterns:
                if first_pass:
                    emit(cs, [None] * cs.n_params)
                continue
            sink = lambda key, cs=cs: emit(cs, key)
            for i, p in enumerate(patterns):
                cands = delta_by_pred.get(p[0])
                if not cands:
                    continue
                order = cs.orders[i]
                empty = [None] * cs.n_params
                for args in cands:
                    nk = _bind(p, args, empty, cs.consts)
                    if nk is not None:
                        _match(order, 0, nk, cs.consts, index, sink)

        first_pass = False
        if not new_facts:
            break
        frontier = [f for f in new_facts if index.add(f)]
        if not frontier:
            break

    bindings = []
    for name in sorted(seen):
        for key in sorted(seen[name]):
            bindings.append((name, key))

    universe = frozenset(Atom(p, args) for p, args in index.all)
    task = GroundedTask(
        domain=domain,
        problem=problem,
        init=problem.init,
        goal=problem.goal,
        atom_universe=universe,
        binding_space=binding_space,
        _compiled=compiled,
        _bindings=bindings,
    )
    _index_task(task)
    return task


def _index_task(task: GroundedTask):
    ordered = sorted(task.atom_universe)
    task._atoms_sorted = ordered
    ids = {(a.pred, a.args): i for i, a in enumerate(ordered)}
    task._atom_ids = ids

    def mask_of(facts) -> int:
        m = 0
        for f in facts:
            i = ids.get(f)
            if i is not None:
                m |= 1 << i
        return m

    task._init_mask = mask_of((a.pred, a.args) for a in task.init)
    task._goal_mask = mask_of((a.pred, a.args) for a in task.goal)
    task._unreachable_goal = any((a.pred, a.args) not in ids for a in task.goal)

    masks = []
    pre_rows = []
    deletable = 0
    get_id = ids.get
    for name, key in task._bindings:
        cs = task._compiled[name]
        row = []
        for t in cs.pre_pos:
            i = get_id(_instantiate(t, key, cs.consts))
            if i is not None:
                row.append(i)
        pre = 0
        for i in row:
            pre |= 1 << i
        neg = mask_of(_instantiate(t, key, cs.consts) for t in cs.pre_neg)
        add = mask_of(_instantiate(t, key, cs.consts) for t in cs.add)
        dele = mask_of(_instantiate(t, key, cs.consts) for t in cs.del_)
        masks.append((pre, neg, add, dele))
        pre_rows.append(row)
        deletable |= dele
    task._masks = masks

    # atoms present in init and never deletable hold in every reachable
    # state; they are useless as successor-generator keys
    always_true = task._init_mask & ~deletable
    freq: dict[int, int] = {}
    for row in pre_rows:
        for i in row:
            if not (always_true >> i) & 1:
                freq[i] = freq.get(i, 0) + 1

    # two-level buckets: actions grouped under their rarest mutable
    # precondition atom, then under the second-rarest; a bucket is scanned
    # only when both atoms hold, which keeps per-state candidate lists near
    # the truly applicable set
    nested: dict[int, dict[int, list[int]]] = {}
    for n, row in enumerate(pre_rows):
        keys = sorted(
            (i for i in row if not (always_true >> i) & 1),
            key=lambda i: (freq[i], i),
        )
        k1 = keys[0] if keys else -1
        k2 = keys[1] if len(keys) > 1 else -1
        nested.setdefault(k1, {}).setdefault(k2, []).append(n)
    # bucket rows carry the masks inline: (pre, neg, add, del, action index)
    task._buckets = [
        (
            k1,
            [
                (k2, [(masks[n][0], masks[n][1], masks[n][2], masks[n][3], n) for n in rows])
                for k2, rows in sorted(sub.items())
            ],
        )
        for k1, sub in sorted(nested.items())
    ]


# ---------------------------------------------------------------------------
# state transition API

def applicable(s: SymbolicState, a: GroundAction) -> bool:
    """True iff all positive preconditions hold and no negated one does."""
    return a.pre_pos <= s and not (a.pre_neg & s)


def apply(s: SymbolicState, a: GroundAction) -> SymbolicState:
    """Successor state (s minus deletes) union adds; rejects inapplicable actions."""
    if not applicable(s, a):
        missing = sorted(str(x) for x in a.pre_pos - s)
        present = sorted(str(x) for x in a.pre_neg & s)
        raise InapplicableActionError(
            f"{a}: missing {missing or '-'}, forbidden present {present or '-'}"
        )
    return SymbolicState((s - a.del_) | a.add)


# ---------------------------------------------------------------------------
# search

@dataclass
class SolveResult:
    status: str  # "plan" | "no_plan" | "resource_limit"
    plan: Plan | None
    stats: SearchStats

    @property
    def ok(self) -> bool:
        return self.status == "plan"


def _reconstruct(task: GroundedTask, parents, final_state: int) -> Plan:
    steps = []
    s = final_state
    while True:
        prev = parents[s]
        if prev is None:
            break
        s, n = prev
        steps.append(task.action(n))
    steps.reverse()
    return Plan(tuple(steps))


def solve(
    task: GroundedTask,
    algo: str = "astar_goalcount",
    max_expansions: int = 2_000_000,
    max_seconds: float = 600.0,
    weight: float = 1.0,
) -> SolveResult:
    """Search for a plan. bfs is provably shortest within limits.

    astar_goalcount with weight=1 is plain A* (optimal here whenever no
    action satisfies two goal atoms at once); larger weights trade length
    optimality for speed.
    """
    if algo not in ("bfs", "astar_goalcount"):
        raise ValueError(f"unknown algorithm {algo!r}")
    t0 = time.perf_counter()
    stats = SearchStats()
    init = task._init_mask
    goal = task._goal_mask

    def finish(status, plan=None):
        stats.wall_time_s = time.perf_counter() - t0
        stats.plan_length = len(plan) if plan is not None else -1
        return SolveResult(status=status, plan=plan, stats=stats)

    if task._unreachable_goal:
        return finish("no_plan")
    if (init & goal) == goal:
        return finish("plan", Plan(()))

    masks = task._masks
    buckets = task._buckets
    parents: dict[int, tuple | None] = {init: None}
    deadline = t0 + max_seconds

    if algo == "bfs":
        frontier = deque([init])
        stats.generated = 1
        while frontier:
            if stats.expanded >= max_expansions:
                return finish("resource_limit")
            if not stats.expanded % 1024 and time.perf_counter() > deadline:
                return finish("resource_limit")
            state = frontier.popleft()
            stats.expanded += 1
            for k1, sub in buckets:
                if k1 >= 0 and not (state >> k1) & 1:
                    continue
                for k2, bucket in sub:
                    if k2 >= 0 and not (state >> k2) & 1:
                        continue
                    for pre, neg, add, dele, n in bucket:
                        if (state & pre) != pre or (neg and state & neg):
                            continue
                        succ = (state & ~dele) | add
                        if succ in parents:
                            continue
                        parents[succ] = (state, n)
                        stats.generated += 1
                        if (succ & goal) == goal:
                            return finish("plan", _reconstruct(task, parents, succ))
                        frontier.append(succ)
        return finish("no_plan")

    n_goal = goal.bit_count()
    h0 = n_goal - (init & goal).bit_count()
    heap = [(weight * h0, 0, init)]
    g_cost = {init: 0}
    closed: set[int] = set()
    counter = 1
    stats.generated = 1
    while heap:
        if stats.expanded >= max_expansions:
            return finish("resource_limit")
        if not stats.expanded % 1024 and time.perf_counter() > deadline:
            return finish("resource_limit")
        _, _, state = heapq.heappop(heap)
        if state in closed:
            continue
        closed.add(state)
        if (state & goal) == goal:
            return finish("plan", _reconstruct(task, parents, state))
        stats.expanded += 1
        g2 = g_cost[state] + 1
        push = heapq.heappush
        get_g = g_cost.get
        for k1, sub in buckets:
            if k1 >= 0 and not (state >> k1) & 1:
                continue
            for k2, bucket in sub:
                if k2 >= 0 and not (state >> k2) & 1:
                    continue
                for pre, neg, add, dele, n in bucket:
                    if (state & pre) != pre or (neg and state & neg):
                        continue
                    succ = (state & ~dele) | add
                    if succ in closed:
                        continue
                    old = get_g(succ)
                    if old is not None and old <= g2:
                        continue
                    g_cost[succ] = g2
                    parents[succ] = (state, n)
                    h = n_goal - (succ & goal).bit_count()
                    push(heap, (g2 + weight * h, counter, succ))
                    counter += 1
                    stats.generated += 1
    return finish("no_plan")


# ---------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    valid: bool
    failed_step: int | None = None  # 0-based; None when valid
    missing: list[str] = field(default_factory=list)
    forbidden: list[str] = field(default_factory=list)
    unmet_goal: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        if self.valid:
            return "plan valid"
        if self.failed_step is not None and (self.missing or self.forbidden):
            return (
                f"step {self.failed_step}: missing {self.missing}, "
                f"forbidden {self.forbidden}"
            )
        return f"goal unmet: {self.unmet_goal}"


def execute(task: GroundedTask, plan: Plan):
    """Symbolic execution trace: list of (state_before, action) pairs."""
    trace = []
    state = task.init
    for a in plan:
        trace.append((state, a))
        state = apply(state, a)
    return trace, state


def validate_plan(task: GroundedTask, plan: Plan) -> ValidationReport:
    """Sequential applicability from init plus goal satisfaction at the end."""
    state = task.init
    for i, a in enumerate(plan):
        if not applicable(state, a):
            return ValidationReport(
                valid=False,
                failed_step=i,
                missing=sorted(str(x) for x in a.pre_pos - state),
                forbidden=sorted(str(x) for x in a.pre_neg & state),
            )
        state = SymbolicState((state - a.del_) | a.add)
    unmet = sorted(str(x) for x in task.goal - state)
    if unmet:
        return ValidationReport(valid=False, unmet_goal=unmet)
    return ValidationReport(valid=True)


# ---------------------------------------------------------------------------
# plan text round-trip (mirrors the numbered-step table format)

def parse_plan_text(task: GroundedTask, text: str) -> Plan:
    actions = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ")" in line.split()[0]:
            line = line.split(")", 1)[1].strip()
        parts = line.split()
        a = task.action_by_key(parts[0], tuple(parts[1:]))
        if a is None:
            raise ValueError(f"unknown ground action: {line!r}")
        actions.append(a)
    return Plan(tuple(actions))
