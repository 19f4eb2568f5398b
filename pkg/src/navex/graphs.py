"""Edge-labeled graphs, shape classification, instance enumeration, homomorphisms.

Nodes are strings.  Edges are (source, label, target) triples; multiple labels
between the same pair of nodes are allowed.  Trees here are rooted and
edge-labeled: exactly one node without incoming edges, every other node with
exactly one, no cycles.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import random
from dataclasses import dataclass
from functools import cached_property

__all__ = [
    "Graph", "GraphError", "ResourceLimitError", "TreeCertificate",
    "classify", "validate_single_labeled",
    "chain_graph", "parallel_paths_graph",
    "count_trees", "enumerate_trees", "enumerate_graphs", "instances",
    "GRAPH_CLASSES", "find_homomorphism", "is_homomorphism",
    "default_ceiling",
]

RESERVED_LABEL = "id"  # used by automata for identity steps, never a graph label

GRAPH_CLASSES = (
    "labeled-tree", "unlabeled-tree", "labeled-chain", "unlabeled-chain",
    "labeled-graph",
)


class GraphError(ValueError):
    """The graph violates a structural invariant."""


class ResourceLimitError(RuntimeError):
    """An enumeration would exceed the configured instance ceiling."""


def default_ceiling() -> int:
    value = os.environ.get("NAVEX_MAX_INSTANCES")
    return int(value) if value else 2_000_000


@dataclass(frozen=True)
class Graph:
    nodes: frozenset[str]
    labels: frozenset[str]
    edges: frozenset[tuple[str, str, str]]

    def __post_init__(self):
        if RESERVED_LABEL in self.labels:
            raise GraphError(f"label {RESERVED_LABEL!r} is reserved")
        for src, lab, dst in self.edges:
            if src not in self.nodes or dst not in self.nodes:
                raise GraphError(f"edge ({src},{lab},{dst}) has an endpoint outside nodes")
            if lab not in self.labels:
                raise GraphError(f"edge label {lab!r} is not in the alphabet")

    @classmethod
    def build(cls, nodes, labels, edges) -> "Graph":
        return cls(frozenset(nodes), frozenset(labels),
                   frozenset((s, l, t) for (s, l, t) in edges))

    @cached_property
    def edge_map(self) -> dict[str, frozenset[tuple[str, str]]]:
        out: dict[str, set] = {lab: set() for lab in self.labels}
        for src, lab, dst in self.edges:
            out[lab].add((src, dst))
        return {lab: frozenset(pairs) for lab, pairs in out.items()}

    def edge_relation(self, label: str) -> frozenset[tuple[str, str]]:
        return self.edge_map.get(label, frozenset())

    @cached_property
    def union_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset((s, t) for s, _, t in self.edges)

    def to_json_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "labels": sorted(self.labels),
            "edges": [
                {"from": s, "to": t, "label": l}
                for s, l, t in sorted(self.edges)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "Graph":
        return cls.build(
            data["nodes"], data["labels"],
            [(e["from"], e["label"], e["to"]) for e in data["edges"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class TreeCertificate:
    kind: str                       # chain | tree | forest | general
    root: str | None = None
    depth: int | None = None
    node_depths: dict | None = None

    @property
    def is_tree(self) -> bool:
        return self.kind in ("chain", "tree")


def _is_acyclic(nodes, pairs) -> bool:
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, t in pairs:
        succ[s].append(t)
    color: dict[str, int] = {}
    for start in nodes:
        if color.get(start):
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                c = color.get(nxt, 0)
                if c == 1:
                    return False
                if c == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
    return True


def classify(g: Graph) -> TreeCertificate:
    """Most specific shape of the graph under its union edge relation."""
    pairs = g.union_pairs
    indeg = {n: 0 for n in g.nodes}
    outdeg = {n: 0 for n in g.nodes}
    for s, t in pairs:
        indeg[t] += 1
        outdeg[s] += 1
    acyclic = _is_acyclic(g.nodes, pairs)
    if not acyclic:
        return TreeCertificate("general")
    if any(d > 1 for d in indeg.values()):
        return TreeCertificate("general")
    roots = sorted(n for n, d in indeg.items() if d == 0)
    if len(roots) != 1:
        return TreeCertificate("forest")
    root = roots[0]
    depths = {root: 0}
    frontier = [root]
    succ: dict[str, list[str]] = {n: [] for n in g.nodes}
    for s, t in pairs:
        succ[s].append(t)
    while frontier:
        nxt = []
        for n in frontier:
            for m in succ[n]:
                depths[m] = depths[n] + 1
                nxt.append(m)
        frontier = nxt
    kind = "chain" if all(d <= 1 for d in outdeg.values()) else "tree"
    return TreeCertificate(kind, root, max(depths.values()), depths)


def validate_single_labeled(g: Graph) -> bool:
    """True when no node pair is connected by edges with two different labels."""
    seen: dict[tuple[str, str], str] = {}
    for s, lab, t in g.edges:
        prev = seen.setdefault((s, t), lab)
        if prev != lab:
            return False
    return True


# ---------------------------------------------------------------------------
# builders

_DEFAULT_NAMES = "abcdefghijklmnopqrstuvwxyz"


def _alphabet(labels) -> tuple[str, ...]:
    if isinstance(labels, int):
        if labels < 0 or labels > len(_DEFAULT_NAMES):
            raise GraphError(f"label count out of range: {labels}")
        return tuple(_DEFAULT_NAMES[:labels])
    return tuple(labels)


def chain_graph(n_nodes: int, labels="a") -> Graph:
    """A chain n0 -> n1 -> ... with the given edge labels.

    `labels` is either one label for every edge or a sequence of n_nodes - 1
    labels, one per edge top-down.
    """
    if isinstance(labels, str):
        seq = [labels] * (n_nodes - 1)
    else:
        seq = list(labels)
        if len(seq) != n_nodes - 1:
            raise GraphError("need one label per edge")
    nodes = [f"n{i}" for i in range(n_nodes)]
    edges = [(nodes[i], seq[i], nodes[i + 1]) for i in range(n_nodes - 1)]
    return Graph.build(nodes, set(seq) or {"a"}, edges)


def parallel_paths_graph(short: int, long: int, label: str = "a") -> Graph:
    """A DAG with two label-`label` paths of the given edge counts sharing
    both endpoints.  Not a tree: the target has in-degree 2."""
    if short < 1 or long < 1:
        raise GraphError("path lengths must be positive")
    nodes = ["src", "tgt"]
    edges = []
    for length, prefix in ((short, "p"), (long, "q")):
        prev = "src"
        for i in range(length - 1):
            node = f"{prefix}{i}"
            nodes.append(node)
            edges.append((prev, label, node))
            prev = node
        edges.append((prev, label, "tgt"))
    return Graph.build(nodes, {label}, edges)


# ---------------------------------------------------------------------------
# enumeration

def count_trees(max_nodes: int, labels=1, *, chains_only: bool = False) -> int:
    alphabet = _alphabet(labels)
    total = 0
    for n in range(1, max_nodes + 1):
        shapes = 1 if chains_only else math.factorial(n - 1)
        total += shapes * len(alphabet) ** (n - 1) if n > 1 else 1
    return total


def enumerate_trees(max_nodes: int, labels=1, *, chains_only: bool = False,
                    ceiling: int | None = None):
    """Yield every rooted edge-labeled tree (single-labeled by construction)
    with at most max_nodes nodes, smallest first.

    The order is: node count, then parent array (node i may attach to any
    earlier node), then edge labeling, lexicographically.  Isomorphic
    duplicates occur; coverage is what matters here.
    """
    alphabet = _alphabet(labels)
    limit = ceiling if ceiling is not None else default_ceiling()
    total = count_trees(max_nodes, alphabet, chains_only=chains_only)
    if total > limit:
        raise ResourceLimitError(f"{total} trees exceeds the ceiling of {limit}")
    label_set = frozenset(alphabet)
    for n in range(1, max_nodes + 1):
        names = [f"n{i}" for i in range(n)]
        if chains_only:
            parent_choices = [tuple(range(n - 1))] if n > 1 else [()]
        else:
            parent_choices = itertools.product(*(range(i) for i in range(1, n)))
        for parents in parent_choices:
            for labeling in itertools.product(alphabet, repeat=n - 1):
                edges = [
                    (names[parents[i - 1]], labeling[i - 1], names[i])
                    for i in range(1, n)
                ]
                yield Graph(frozenset(names), label_set, frozenset(edges))


def _structured_graphs(alphabet) -> list[Graph]:
    lab = alphabet[0] if alphabet else "a"
    out = [parallel_paths_graph(a, b, lab)
           for a, b in ((1, 2), (1, 3), (2, 3), (2, 4), (3, 7))]
    loop = Graph.build(["n0"], alphabet, [("n0", lab, "n0")])
    two_cycle = Graph.build(["n0", "n1"], alphabet,
                            [("n0", lab, "n1"), ("n1", lab, "n0")])
    out.extend([loop, two_cycle])
    if len(alphabet) >= 1:
        out = [Graph(g.nodes, frozenset(alphabet), g.edges) for g in out]
    return out


def enumerate_graphs(max_nodes: int, labels=1, *, seed: int = 0,
                     samples: int = 200, ceiling: int | None = None):
    """Yield small edge-labeled graphs: structured families first, then an
    exhaustive sweep where the space is tiny (|labels| * n^2 <= 9), then a
    seeded random sample for the larger node/label combinations."""
    alphabet = _alphabet(labels)
    limit = ceiling if ceiling is not None else default_ceiling()
    exhaustive_total = 0
    sampled_combos = []
    for n in range(1, max_nodes + 1):
        cells = len(alphabet) * n * n
        if cells <= 9:
            exhaustive_total += 2 ** cells
        else:
            sampled_combos.append(n)
    total = len(_structured_graphs(alphabet)) + exhaustive_total
    total += samples * len(sampled_combos)
    if total > limit:
        raise ResourceLimitError(f"{total} graphs exceeds the ceiling of {limit}")

    yield from _structured_graphs(alphabet)
    label_set = frozenset(alphabet)
    for n in range(1, max_nodes + 1):
        names = [f"n{i}" for i in range(n)]
        cells = [(s, lab, t) for lab in alphabet for s in names for t in names]
        if len(cells) <= 9:
            for bits in range(2 ** len(cells)):
                edges = [cells[i] for i in range(len(cells)) if bits >> i & 1]
                yield Graph(frozenset(names), label_set, frozenset(edges))
    rng = random.Random(seed)
    for n in sampled_combos:
        names = [f"n{i}" for i in range(n)]
        cells = [(s, lab, t) for lab in alphabet for s in names for t in names]
        for _ in range(samples):
            edges = [cell for cell in cells if rng.random() < 0.35]
            yield Graph(frozenset(names), label_set, frozenset(edges))


def instances(graph_class: str, max_nodes: int, labels=2, *, seed: int = 0,
              samples: int = 200, ceiling: int | None = None):
    """The instance stream behind the equivalence oracles and the CLI."""
    if graph_class not in GRAPH_CLASSES:
        raise GraphError(f"unknown graph class {graph_class!r}")
    if graph_class.startswith("unlabeled"):
        labels = _alphabet(labels)[:1] or ("a",)
    chains = graph_class.endswith("chain")
    if graph_class == "labeled-graph":
        return enumerate_graphs(max_nodes, labels, seed=seed, samples=samples,
                                ceiling=ceiling)
    return enumerate_trees(max_nodes, labels, chains_only=chains, ceiling=ceiling)


# ---------------------------------------------------------------------------
# homomorphisms

def is_homomorphism(g1: Graph, g2: Graph, mapping: dict, *, injective: bool = False) -> bool:
    if set(mapping) != set(g1.nodes) or not set(mapping.values()) <= set(g2.nodes):
        return False
    if injective and len(set(mapping.values())) != len(mapping):
        return False
    return all((mapping[s], lab, mapping[t]) in g2.edges for s, lab, t in g1.edges)


def find_homomorphism(g1: Graph, g2: Graph, *, injective: bool = False) -> dict | None:
    """Backtracking search for an edge-preserving node mapping g1 -> g2."""
    order = sorted(g1.nodes)
    index = {n: i for i, n in enumerate(order)}
    # edges whose endpoints are both assigned once node i is placed
    checks: list[list[tuple[str, str, str]]] = [[] for _ in order]
    for s, lab, t in g1.edges:
        checks[max(index[s], index[t])].append((s, lab, t))
    targets = sorted(g2.nodes)
    mapping: dict[str, str] = {}
    used: set[str] = set()

    def bt(i: int) -> bool:
        if i == len(order):
            return True
        node = order[i]
        for cand in targets:
            if injective and cand in used:
                continue
            mapping[node] = cand
            if all((mapping[s], lab, mapping[t]) in g2.edges for s, lab, t in checks[i]):
                if injective:
                    used.add(cand)
                if bt(i + 1):
                    return True
                if injective:
                    used.discard(cand)
            del mapping[node]
        return False

    if bt(0):
        return dict(mapping)
    return None
