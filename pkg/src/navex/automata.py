"""Condition automata: finite automata whose states carry node conditions.

A condition automaton is a 7-tuple (states, alphabet, conditions, initials,
finals, transitions, state_conditions).  Transitions are labeled with edge
labels or with the reserved identity label; a state's conditions restrict at
which graph nodes the state can hold.  Evaluated on a graph, an automaton
accepts a node pair (m, n) when some run over satisfied states leads from an
initial state at m to a final state at n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

from .evaluate import EvalContext, is_condition
from .expr import Compose, Expr, Fragment, IDENTITY, operators_used, parse, render
from .graphs import Graph, enumerate_trees

__all__ = [
    "ID", "AutomatonError", "ConditionAutomaton", "state_key",
    "state_condition_expr", "eval_automaton", "eval_automaton_boolean",
    "AutomatonClassFlags", "flags", "Run", "run_is_valid", "find_runs",
    "check_deterministic",
]

ID = "id"  # transition label for identity steps; never a graph edge label


class AutomatonError(ValueError):
    """The automaton violates a structural invariant."""


def state_key(s):
    """A total order on the mixed values used as automaton states: strings,
    ints, expressions, tuples, frozensets, and opaque markers."""
    if isinstance(s, bool):
        return ("b", str(s))
    if isinstance(s, int):
        return ("i", s)
    if isinstance(s, str):
        return ("s", s)
    if isinstance(s, Expr):
        return ("e", render(s))
    if isinstance(s, tuple):
        return ("t", tuple(state_key(x) for x in s))
    if isinstance(s, frozenset):
        return ("f", tuple(sorted(state_key(x) for x in s)))
    return ("r", repr(s))


@dataclass(frozen=True)
class ConditionAutomaton:
    states: frozenset
    alphabet: frozenset[str]
    conditions: frozenset[Expr]
    initials: frozenset
    finals: frozenset
    transitions: frozenset[tuple]
    state_conditions: frozenset[tuple]

    def __post_init__(self):
        if ID in self.alphabet:
            raise AutomatonError(f"alphabet must not contain the reserved label {ID!r}")
        if not self.initials <= self.states or not self.finals <= self.states:
            raise AutomatonError("initial and final states must be states")
        for src, lab, dst in self.transitions:
            if src not in self.states or dst not in self.states:
                raise AutomatonError("transition endpoint is not a state")
            if lab != ID and lab not in self.alphabet:
                raise AutomatonError(f"transition label {lab!r} is not in the alphabet")
        for q, c in self.state_conditions:
            if q not in self.states:
                raise AutomatonError("condition attached to a non-state")
            if c not in self.conditions:
                raise AutomatonError(f"condition {render(c)} is not declared")
        for c in self.conditions:
            if not is_condition(c):
                raise AutomatonError(f"{render(c)} is not a condition expression")

    @classmethod
    def build(cls, states, alphabet, conditions, initials, finals,
              transitions, state_conditions) -> "ConditionAutomaton":
        return cls(frozenset(states), frozenset(alphabet), frozenset(conditions),
                   frozenset(initials), frozenset(finals),
                   frozenset(tuple(t) for t in transitions),
                   frozenset(tuple(sc) for sc in state_conditions))

    @cached_property
    def gamma(self) -> dict:
        out: dict = {q: set() for q in self.states}
        for q, c in self.state_conditions:
            out[q].add(c)
        return {q: frozenset(cs) for q, cs in out.items()}

    @cached_property
    def successors(self) -> dict:
        out: dict = {q: [] for q in self.states}
        for src, lab, dst in self.transitions:
            out[src].append((lab, dst))
        return {q: tuple(sorted(pairs, key=lambda p: (p[0], state_key(p[1]))))
                for q, pairs in out.items()}

    @cached_property
    def ordered_states(self) -> tuple:
        return tuple(sorted(self.states, key=state_key))

    @property
    def identity_free(self) -> bool:
        return all(lab != ID for _, lab, _ in self.transitions)

    # --- serialization ----------------------------------------------------
    def canonical_names(self) -> dict:
        return {q: f"s{i}" for i, q in enumerate(self.ordered_states)}

    def to_json_dict(self) -> dict:
        names = self.canonical_names()
        return {
            "states": [names[q] for q in self.ordered_states],
            "alphabet": sorted(self.alphabet),
            "initials": sorted(names[q] for q in self.initials),
            "finals": sorted(names[q] for q in self.finals),
            "transitions": [
                {"from": f, "label": lab, "to": t}
                for f, lab, t in sorted(
                    (names[src], lab, names[dst])
                    for src, lab, dst in self.transitions)
            ],
            "conditions": {
                names[q]: sorted(render(c) for c in cs)
                for q, cs in sorted(self.gamma.items(),
                                    key=lambda kv: state_key(kv[0]))
                if cs
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConditionAutomaton":
        state_conditions = [
            (q, parse(text))
            for q, texts in data.get("conditions", {}).items()
            for text in texts
        ]
        return cls.build(
            data["states"], data["alphabet"],
            {c for _, c in state_conditions},
            data["initials"], data["finals"],
            [(t["from"], t["label"], t["to"]) for t in data["transitions"]],
            state_conditions,
        )

    @classmethod
    def from_json(cls, text: str) -> "ConditionAutomaton":
        return cls.from_json_dict(json.loads(text))

    def to_dot(self) -> str:
        names = self.canonical_names()
        lines = ["digraph automaton {", "  rankdir=LR;"]
        for i, q in enumerate(sorted(self.initials, key=state_key)):
            lines.append(f'  __start{i} [shape=none, label=""];')
        for q in self.ordered_states:
            shape = "doublecircle" if q in self.finals else "circle"
            label = names[q]
            cs = self.gamma[q]
            if cs:
                conds = ", ".join(sorted(render(c) for c in cs))
                label += "\\n{" + conds + "}"
            lines.append(f'  {names[q]} [shape={shape}, label="{label}"];')
        for i, q in enumerate(sorted(self.initials, key=state_key)):
            lines.append(f"  __start{i} -> {names[q]};")
        for src, lab, dst in sorted(
                (names[s], l, names[t]) for s, l, t in self.transitions):
            lines.append(f'  {src} -> {dst} [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines)


def state_condition_expr(a: ConditionAutomaton, q) -> Expr:
    """The composition of a state's conditions, in a fixed order; the
    identity when the state has none."""
    cs = sorted(a.gamma[q], key=render)
    if not cs:
        return IDENTITY
    out = cs[0]
    for c in cs[1:]:
        out = Compose(out, c)
    return out


# ---------------------------------------------------------------------------
# evaluation

class _Satisfier:
    """Lazily computes, per state, the bitmask of graph nodes satisfying all
    of the state's conditions."""

    def __init__(self, a: ConditionAutomaton, ctx: EvalContext):
        self.a = a
        self.ctx = ctx
        self.all_nodes = (1 << ctx.n) - 1
        self._cache: dict = {}

    def nodes(self, q) -> int:
        got = self._cache.get(q)
        if got is None:
            got = self.all_nodes
            for c in self.a.gamma[q]:
                got &= self.ctx.diagonal_nodes(c)
            self._cache[q] = got
        return got

    def holds(self, q, i: int) -> bool:
        return bool(self.nodes(q) >> i & 1)


def eval_automaton(a: ConditionAutomaton, g: Graph,
                   ctx: EvalContext | None = None) -> frozenset:
    """All node pairs the automaton accepts on the graph, by reachability
    over (state, node) configurations."""
    if ctx is None:
        ctx = EvalContext(g)
    n = ctx.n
    sat = _Satisfier(a, ctx)
    rows = {lab: ctx.successor_rows(lab) for lab in a.alphabet}
    succ = a.successors
    finals = a.finals
    accepted = 0
    for m in range(n):
        starts = [(q, m) for q in a.initials if sat.holds(q, m)]
        seen = set(starts)
        stack = list(starts)
        targets = 0
        while stack:
            q, i = stack.pop()
            if q in finals:
                targets |= 1 << i
            for lab, q2 in succ[q]:
                nodes2 = (1 << i) if lab == ID else rows[lab][i]
                nodes2 &= sat.nodes(q2)
                for j in _node_bits(nodes2):
                    cfg = (q2, j)
                    if cfg not in seen:
                        seen.add(cfg)
                        stack.append(cfg)
        for j in _node_bits(targets):
            accepted |= 1 << (m * n + j)
    return ctx.decode(accepted)


def eval_automaton_boolean(a: ConditionAutomaton, g: Graph,
                           ctx: EvalContext | None = None) -> bool:
    return bool(eval_automaton(a, g, ctx))


def _node_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# ---------------------------------------------------------------------------
# structural classification

@dataclass(frozen=True)
class AutomatonClassFlags:
    f_free: Fragment
    acyclic: bool
    identity_free: bool


def flags(a: ConditionAutomaton) -> AutomatonClassFlags:
    """Which of {tc, pi, copi} the conditions avoid, whether the transition
    graph is acyclic, and whether identity transitions are absent."""
    used = Fragment.of()
    for c in a.conditions:
        used = used | operators_used(c)
    tracked = Fragment.of("tc", "pi1", "pi2", "copi1", "copi2")
    f_free = tracked - used

    # cycle detection over the transition graph
    succ = {q: [dst for _, dst in a.successors[q]] for q in a.states}
    color: dict = {}
    acyclic = True
    for start in a.ordered_states:
        if color.get(start) or not acyclic:
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack and acyclic:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                c = color.get(nxt, 0)
                if c == 1:
                    acyclic = False
                    break
                if c == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
            if not advanced and stack:
                color[stack[-1][0]] = 2
                stack.pop()
    return AutomatonClassFlags(f_free, acyclic, a.identity_free)


# ---------------------------------------------------------------------------
# runs

@dataclass(frozen=True)
class Run:
    states: tuple
    nodes: tuple
    labels: tuple


def run_is_valid(a: ConditionAutomaton, g: Graph, run: Run,
                 ctx: EvalContext | None = None) -> bool:
    if len(run.states) != len(run.nodes) or len(run.labels) != len(run.states) - 1:
        return False
    if not run.states or run.states[0] not in a.initials:
        return False
    if run.states[-1] not in a.finals:
        return False
    if ctx is None:
        ctx = EvalContext(g)
    sat = _Satisfier(a, ctx)
    for q, node in zip(run.states, run.nodes):
        if node not in ctx.index or not sat.holds(q, ctx.index[node]):
            return False
    for j, lab in enumerate(run.labels):
        if (run.states[j], lab, run.states[j + 1]) not in a.transitions:
            return False
        if lab == ID:
            if run.nodes[j] != run.nodes[j + 1]:
                return False
        elif (run.nodes[j], lab, run.nodes[j + 1]) not in g.edges:
            return False
    return True


def find_runs(a: ConditionAutomaton, g: Graph, source: str | None = None,
              target: str | None = None, max_runs: int = 1000) -> list[Run]:
    """Accepting runs by depth-first search.  A (state, node) configuration
    is never repeated within one run, so runs through cycles are enumerated
    only in their simple form; on trees with an identity-free automaton this
    is every run."""
    ctx = EvalContext(g)
    sat = _Satisfier(a, ctx)
    rows = {lab: ctx.successor_rows(lab) for lab in a.alphabet}
    out: list[Run] = []
    sources = [source] if source is not None else ctx.node_order

    def dfs(q, i, states, nodes, labels, seen):
        if len(out) >= max_runs:
            return
        if q in a.finals and (target is None or ctx.node_order[i] == target):
            out.append(Run(tuple(states), tuple(nodes), tuple(labels)))
        for lab, q2 in a.successors[q]:
            nodes2 = (1 << i) if lab == ID else rows[lab][i]
            nodes2 &= sat.nodes(q2)
            for j in _node_bits(nodes2):
                cfg = (q2, j)
                if cfg in seen:
                    continue
                seen.add(cfg)
                states.append(q2)
                nodes.append(ctx.node_order[j])
                labels.append(lab)
                dfs(q2, j, states, nodes, labels, seen)
                states.pop()
                nodes.pop()
                labels.pop()
                seen.discard(cfg)

    for m in sources:
        i = ctx.index[m]
        for q0 in sorted(a.initials, key=state_key):
            if sat.holds(q0, i):
                dfs(q0, i, [q0], [m], [], {(q0, i)})
    return out


# ---------------------------------------------------------------------------
# determinism

def check_deterministic(a: ConditionAutomaton, max_nodes: int = 6,
                        labels=None) -> bool:
    """Bounded check that the automaton is deterministic on trees: on every
    tree over its alphabet, every node satisfies exactly one initial state,
    and every reached (state, node) configuration extends in exactly one way
    along each outgoing edge."""
    if not a.identity_free:
        raise AutomatonError("determinism is defined for identity-free automata")
    if labels is None:
        labels = sorted(a.alphabet)
    for tree in enumerate_trees(max_nodes, labels):
        ctx = EvalContext(tree)
        sat = _Satisfier(a, ctx)
        active: dict[int, set] = {}
        for i in range(ctx.n):
            starts = [q for q in a.initials if sat.holds(q, i)]
            if len(starts) != 1:
                return False
            active.setdefault(i, set()).add(starts[0])
        # walk edges top-down so parent activity is complete before children
        order = sorted(tree.edges,
                       key=lambda e: (ctx.index[e[0]], e[1], ctx.index[e[2]]))
        by_depth = sorted(order, key=lambda e: _depth_of(tree, e[0]))
        for src, lab, dst in by_depth:
            i, j = ctx.index[src], ctx.index[dst]
            for q in sorted(active.get(i, ()), key=state_key):
                followers = [q2 for lab2, q2 in a.successors[q]
                             if lab2 == lab and sat.holds(q2, j)]
                if len(followers) != 1:
                    return False
                active.setdefault(j, set()).add(followers[0])
    return True


def _depth_of(tree: Graph, node: str) -> int:
    depth = 0
    current = node
    parents = {t: s for s, _, t in tree.edges}
    while current in parents:
        current = parents[current]
        depth += 1
    return depth
