"""Semantics of navigational expressions over edge-labeled graphs.

An expression denotes a binary relation on the nodes of a graph.  The
evaluator keeps relations as single integers (bit (i*n + j) set means node i
relates to node j) and memoizes per (graph, subexpression), which keeps bulk
equivalence checking over thousands of instances cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .expr import (
    Compose, Converse, Coproj1, Coproj2, Difference, Diversity, EdgeLabel,
    Empty, Expr, Identity, Intersect, Proj1, Proj2, TransClosure, Union,
    labels_used,
)
from .graphs import Graph, instances

__all__ = [
    "EvalContext", "UnknownLabelError", "evaluate", "evaluate_boolean",
    "is_condition", "EquivVerdict", "path_equivalent", "boolean_equivalent",
]


class UnknownLabelError(KeyError):
    """The expression mentions an edge label the graph does not carry."""


def is_condition(e: Expr) -> bool:
    """Conditions are the node-test expressions allowed on automaton states:
    identity, empty, projections and coprojections, and compositions of
    conditions."""
    if isinstance(e, (Identity, Empty, Proj1, Proj2, Coproj1, Coproj2)):
        return True
    if isinstance(e, Compose):
        return is_condition(e.left) and is_condition(e.right)
    return False


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class EvalContext:
    """Per-graph evaluation state: node indexing, label relations as bit
    masks, and a structural memo shared by every expression evaluated on the
    same graph."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.node_order = sorted(graph.nodes)
        self.index = {n: i for i, n in enumerate(self.node_order)}
        n = len(self.node_order)
        self.n = n
        self.identity_mask = 0
        for i in range(n):
            self.identity_mask |= 1 << (i * n + i)
        self.full_mask = (1 << (n * n)) - 1 if n else 0
        self.label_masks: dict[str, int] = {}
        for lab, pairs in graph.edge_map.items():
            m = 0
            for s, t in pairs:
                m |= 1 << (self.index[s] * n + self.index[t])
            self.label_masks[lab] = m
        self._memo: dict[Expr, int] = {}
        self._row_cache: dict[int, list[int]] = {}

    # --- relation algebra on masks -------------------------------------
    def _rows(self, mask: int) -> list[int]:
        rows = self._row_cache.get(mask)
        if rows is None:
            n = self.n
            window = (1 << n) - 1
            rows = [(mask >> (i * n)) & window for i in range(n)]
            self._row_cache[mask] = rows
        return rows

    def compose_masks(self, a: int, b: int) -> int:
        n = self.n
        rows_b = self._rows(b)
        out = 0
        for i in range(n):
            row = (a >> (i * n)) & ((1 << n) - 1)
            acc = 0
            for j in _bits(row):
                acc |= rows_b[j]
            out |= acc << (i * n)
        return out

    def transpose_mask(self, a: int) -> int:
        n = self.n
        out = 0
        for i in range(n):
            row = (a >> (i * n)) & ((1 << n) - 1)
            for j in _bits(row):
                out |= 1 << (j * n + i)
        return out

    def closure_mask(self, a: int) -> int:
        cur = a
        while True:
            nxt = cur | self.compose_masks(cur, cur)
            if nxt == cur:
                return cur
            cur = nxt

    def mask_of(self, e: Expr) -> int:
        memo = self._memo
        got = memo.get(e)
        if got is not None:
            return got
        n = self.n
        if isinstance(e, Empty):
            out = 0
        elif isinstance(e, Identity):
            out = self.identity_mask
        elif isinstance(e, Diversity):
            out = self.full_mask & ~self.identity_mask
        elif isinstance(e, EdgeLabel):
            try:
                out = self.label_masks[e.name]
            except KeyError:
                raise UnknownLabelError(e.name) from None
        elif isinstance(e, Converse):
            out = self.transpose_mask(self.mask_of(e.child))
        elif isinstance(e, TransClosure):
            out = self.closure_mask(self.mask_of(e.child))
        elif isinstance(e, Proj1):
            m = self.mask_of(e.child)
            out = 0
            for i in range(n):
                if (m >> (i * n)) & ((1 << n) - 1):
                    out |= 1 << (i * n + i)
        elif isinstance(e, Proj2):
            t = self.transpose_mask(self.mask_of(e.child))
            out = 0
            for i in range(n):
                if (t >> (i * n)) & ((1 << n) - 1):
                    out |= 1 << (i * n + i)
        elif isinstance(e, Coproj1):
            m = self.mask_of(e.child)
            out = 0
            for i in range(n):
                if not (m >> (i * n)) & ((1 << n) - 1):
                    out |= 1 << (i * n + i)
        elif isinstance(e, Coproj2):
            t = self.transpose_mask(self.mask_of(e.child))
            out = 0
            for i in range(n):
                if not (t >> (i * n)) & ((1 << n) - 1):
                    out |= 1 << (i * n + i)
        elif isinstance(e, Compose):
            out = self.compose_masks(self.mask_of(e.left), self.mask_of(e.right))
        elif isinstance(e, Union):
            out = self.mask_of(e.left) | self.mask_of(e.right)
        elif isinstance(e, Intersect):
            out = self.mask_of(e.left) & self.mask_of(e.right)
        elif isinstance(e, Difference):
            out = self.mask_of(e.left) & ~self.mask_of(e.right)
        else:  # pragma: no cover - exhaustive over the syntax
            raise TypeError(f"cannot evaluate {type(e).__name__}")
        memo[e] = out
        return out

    def decode(self, mask: int) -> frozenset[tuple[str, str]]:
        n = self.n
        order = self.node_order
        return frozenset(
            (order[idx // n], order[idx % n]) for idx in _bits(mask)
        )

    def pairs_of(self, e: Expr) -> frozenset[tuple[str, str]]:
        return self.decode(self.mask_of(e))

    def diagonal_nodes(self, e: Expr) -> int:
        """Bitmask over node indices i with (i, i) in the relation of `e`."""
        mask = self.mask_of(e)
        n = self.n
        out = 0
        for i in range(n):
            if mask >> (i * n + i) & 1:
                out |= 1 << i
        return out

    def successor_rows(self, label: str) -> list[int]:
        """Per-node successor sets along `label`, as node bitmasks."""
        return self._rows(self.label_masks.get(label, 0))

    def holds_at(self, e: Expr, node: str) -> bool:
        """True when (node, node) is in the relation of `e`; meant for
        condition expressions."""
        i = self.index[node]
        return bool(self.mask_of(e) >> (i * self.n + i) & 1)


def evaluate(e: Expr, graph: Graph, ctx: EvalContext | None = None) -> frozenset:
    """The relation denoted by `e` on `graph`, as a frozenset of node pairs."""
    if ctx is None:
        ctx = EvalContext(graph)
    return ctx.pairs_of(e)


def evaluate_boolean(e: Expr, graph: Graph, ctx: EvalContext | None = None) -> bool:
    """Nonemptiness of the denoted relation."""
    if ctx is None:
        ctx = EvalContext(graph)
    return ctx.mask_of(e) != 0


# ---------------------------------------------------------------------------
# bounded equivalence oracles

@dataclass(frozen=True)
class EquivVerdict:
    equivalent: bool
    witness: Graph | None
    checked: int
    graph_class: str
    max_nodes: int
    labels: int
    semantics: str = "path"
    note: str = ""

    def __bool__(self) -> bool:
        return self.equivalent


def _required_labels(exprs, labels):
    """Label names for the instance stream: every label the expressions
    mention, padded with default letters up to the requested count."""
    used = {lab for e in exprs for lab in labels_used(e)}
    names = set(used)
    for c in "abcdefghijklmnopqrstuvwxyz":
        if len(names) >= labels:
            break
        names.add(c)
    return tuple(sorted(names)), used


def _check(e1: Expr, e2: Expr, graph_class: str, max_nodes: int, labels: int,
           semantics: str, seed: int, extra_random: int,
           ceiling: int | None) -> EquivVerdict:
    names, used = _required_labels((e1, e2), labels)
    if graph_class.startswith("unlabeled"):
        if len(used) > 1:
            raise ValueError(
                "expressions mention several labels; unlabeled classes carry one")
        names = tuple(sorted(used)) or ("a",)
    checked = 0

    def differ(g: Graph) -> bool:
        ctx = EvalContext(g)
        if semantics == "boolean":
            return evaluate_boolean(e1, g, ctx) != evaluate_boolean(e2, g, ctx)
        return ctx.mask_of(e1) != ctx.mask_of(e2)

    for g in instances(graph_class, max_nodes, names, seed=seed,
                       ceiling=ceiling):
        checked += 1
        if differ(g):
            return EquivVerdict(False, g, checked, graph_class, max_nodes,
                                len(names), semantics)
    if extra_random and graph_class != "labeled-graph":
        rng = random.Random(seed)
        chains = graph_class.endswith("chain")
        for _ in range(extra_random):
            n = rng.randint(2, max_nodes + 3)
            node_names = [f"n{i}" for i in range(n)]
            edges = []
            for i in range(1, n):
                parent = i - 1 if chains else rng.randrange(i)
                edges.append((node_names[parent], rng.choice(names), node_names[i]))
            g = Graph.build(node_names, names, edges)
            checked += 1
            if differ(g):
                return EquivVerdict(False, g, checked, graph_class, max_nodes,
                                    len(names), semantics, note="random probe")
    return EquivVerdict(True, None, checked, graph_class, max_nodes, len(names),
                        semantics)


def path_equivalent(e1: Expr, e2: Expr, graph_class: str = "labeled-tree",
                    max_nodes: int = 5, labels: int = 2, *, seed: int = 0,
                    extra_random: int = 0, ceiling: int | None = None) -> EquivVerdict:
    """Exhaustively compare the relations of e1 and e2 over the instance
    stream of a graph class; first difference becomes the witness."""
    return _check(e1, e2, graph_class, max_nodes, labels, "path", seed,
                  extra_random, ceiling)


def boolean_equivalent(e1: Expr, e2: Expr, graph_class: str = "labeled-chain",
                       max_nodes: int = 8, labels: int = 2, *, seed: int = 0,
                       extra_random: int = 0, ceiling: int | None = None) -> EquivVerdict:
    """Like path_equivalent but compares nonemptiness only."""
    return _check(e1, e2, graph_class, max_nodes, labels, "boolean", seed,
                  extra_random, ceiling)
