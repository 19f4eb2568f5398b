"""Navigational expressions: syntax tree, concrete grammar, and structural metrics.

An expression denotes a binary relation over the nodes of an edge-labeled
graph.  The core syntax has fourteen constructors; the concrete grammar adds
sugar (``*``, ``^k``, ``A``, ``E``) that is desugared at parse time and never
stored in the tree.
"""

from __future__ import annotations

from dataclasses import dataclass
import re

__all__ = [
    "Expr", "Empty", "Identity", "Diversity", "EdgeLabel", "Converse",
    "TransClosure", "Proj1", "Proj2", "Coproj1", "Coproj2", "Compose",
    "Union", "Intersect", "Difference",
    "EMPTY", "IDENTITY", "DIVERSITY",
    "power", "star", "label_union",
    "ParseError", "FragmentError", "parse", "render",
    "size", "labels_used", "subexpressions",
    "Fragment", "FLAGS", "operators_used", "base_closure",
    "simplify_empty", "is_downward", "condition_depth",
]


class Expr:
    """Base class for expression nodes.  Instances are immutable and hashable.

    Hashes are cached per node so that deep trees and shared sub-DAGs can be
    used as dictionary keys in O(1) after construction.
    """

    def _fields(self) -> tuple:
        d = self.__dict__
        return tuple(d[name] for name in self.__dataclass_fields__)  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__, self._fields()))
            self.__dict__["_h"] = h
        return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        if hash(self) != hash(other):
            return False
        return self._fields() == other._fields()  # type: ignore[union-attr]

    def __repr__(self) -> str:
        return f"<{render(self)}>"


@dataclass(frozen=True, eq=False, repr=False)
class Empty(Expr):
    """The empty relation."""


@dataclass(frozen=True, eq=False, repr=False)
class Identity(Expr):
    """All pairs (n, n)."""


@dataclass(frozen=True, eq=False, repr=False)
class Diversity(Expr):
    """All pairs (m, n) with m != n."""


@dataclass(frozen=True, eq=False, repr=False)
class EdgeLabel(Expr):
    """All pairs connected by an edge with this label."""
    name: str


@dataclass(frozen=True, eq=False, repr=False)
class Converse(Expr):
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class TransClosure(Expr):
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Proj1(Expr):
    """Pairs (m, m) such that (m, n) is in the child for some n."""
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Proj2(Expr):
    """Pairs (n, n) such that (m, n) is in the child for some m."""
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Coproj1(Expr):
    """Pairs (m, m) such that no (m, n) is in the child."""
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Coproj2(Expr):
    """Pairs (n, n) such that no (m, n) is in the child."""
    child: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Compose(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Union(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Intersect(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, repr=False)
class Difference(Expr):
    left: Expr
    right: Expr


EMPTY = Empty()
IDENTITY = Identity()
DIVERSITY = Diversity()

_UNARY = (Converse, TransClosure, Proj1, Proj2, Coproj1, Coproj2)
_BINARY = (Compose, Union, Intersect, Difference)


def power(e: Expr, k: int) -> Expr:
    """k-fold composition: power(e, 0) = id, power(e, k) = e . power(e, k-1)."""
    if k < 0:
        raise ValueError("negative exponent")
    out: Expr = IDENTITY
    for _ in range(k):
        out = Compose(e, out)
    return out


def star(e: Expr) -> Expr:
    """Reflexive closure sugar: e* = id | e+."""
    return Union(IDENTITY, TransClosure(e))


def label_union(labels) -> Expr:
    """E sugar: the union of all labels of an alphabet (0 if it is empty)."""
    out: Expr | None = None
    for name in sorted(labels):
        atom = EdgeLabel(name)
        out = atom if out is None else Union(out, atom)
    return EMPTY if out is None else out


def subexpressions(e: Expr):
    """Yield every node of the tree, parents after children."""
    if isinstance(e, _UNARY):
        yield from subexpressions(e.child)
    elif isinstance(e, _BINARY):
        yield from subexpressions(e.left)
        yield from subexpressions(e.right)
    yield e


def size(e: Expr) -> int:
    """Operator count: atoms are 0, every unary or binary node adds 1."""
    if isinstance(e, _UNARY):
        return 1 + size(e.child)
    if isinstance(e, _BINARY):
        return 1 + size(e.left) + size(e.right)
    return 0


def labels_used(e: Expr) -> frozenset[str]:
    return frozenset(n.name for n in subexpressions(e) if isinstance(n, EdgeLabel))


# ---------------------------------------------------------------------------
# fragments

FLAGS = ("di", "conv", "tc", "pi1", "pi2", "copi1", "copi2", "cap", "minus")

_FLAG_OF = {
    Diversity: "di", Converse: "conv", TransClosure: "tc",
    Proj1: "pi1", Proj2: "pi2", Coproj1: "copi1", Coproj2: "copi2",
    Intersect: "cap", Difference: "minus",
}


class FragmentError(ValueError):
    """An expression or flag set falls outside the fragment an operation handles."""


@dataclass(frozen=True)
class Fragment:
    """A set of non-basic operators.  The basic ones (0, id, labels, ., |) are free."""
    flags: frozenset[str]

    def __post_init__(self):
        bad = self.flags - set(FLAGS)
        if bad:
            raise FragmentError(f"unknown fragment flags: {sorted(bad)}")

    @classmethod
    def of(cls, *names: str) -> "Fragment":
        return cls(frozenset(names))

    @classmethod
    def from_string(cls, text: str) -> "Fragment":
        """Parse a comma-separated flag list; 'pi' and 'copi' cover both indices."""
        names: set[str] = set()
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if part == "pi":
                names.update(("pi1", "pi2"))
            elif part == "copi":
                names.update(("copi1", "copi2"))
            else:
                names.add(part)
        return cls(frozenset(names))

    def __contains__(self, flag: str) -> bool:
        return flag in self.flags

    def __iter__(self):
        return iter(sorted(self.flags, key=FLAGS.index))

    def __le__(self, other: "Fragment") -> bool:
        return self.flags <= other.flags

    def __or__(self, other: "Fragment") -> "Fragment":
        return Fragment(self.flags | other.flags)

    def __sub__(self, other: "Fragment") -> "Fragment":
        return Fragment(self.flags - other.flags)

    def __str__(self) -> str:
        return ",".join(self) if self.flags else "(basic)"


def operators_used(e: Expr) -> Fragment:
    found = set()
    for node in subexpressions(e):
        flag = _FLAG_OF.get(type(node))
        if flag:
            found.add(flag)
    return Fragment(frozenset(found))


# Each rule: if the premise flags are present, the derived flag is expressible.
_BASE_RULES: tuple[tuple[frozenset[str], str], ...] = (
    (frozenset({"minus"}), "cap"),                # e1 & e2 == e1 \ (e1 \ e2)
    (frozenset({"copi1"}), "pi1"),                # pi1(e) == copi1(copi1(e))
    (frozenset({"copi2"}), "pi2"),
    (frozenset({"conv", "cap"}), "pi1"),          # pi1(e) == e . conv(e) & id
    (frozenset({"conv", "cap"}), "pi2"),
    (frozenset({"di", "cap"}), "pi1"),            # pi1(e) == e . (id|di) & id
    (frozenset({"di", "cap"}), "pi2"),
    (frozenset({"pi2", "conv"}), "pi1"),          # pi1(e) == pi2(conv(e))
    (frozenset({"pi1", "conv"}), "pi2"),
    (frozenset({"minus", "pi1"}), "copi1"),       # copi1(e) == id \ pi1(e)
    (frozenset({"minus", "pi2"}), "copi2"),
    (frozenset({"copi2", "conv"}), "copi1"),      # copi1(e) == copi2(conv(e))
    (frozenset({"copi1", "conv"}), "copi2"),
)


def base_closure(f: Fragment) -> Fragment:
    """Close a flag set under interdefinability of the condition operators.

    di, conv, and tc are never derivable; the closure only ever adds
    projections, coprojections, cap, and never removes anything.
    """
    flags = set(f.flags)
    changed = True
    while changed:
        changed = False
        for premise, gain in _BASE_RULES:
            if gain not in flags and premise <= flags:
                flags.add(gain)
                changed = True
    return Fragment(frozenset(flags))


# ---------------------------------------------------------------------------
# structural rewrites and checks

def simplify_empty(e: Expr) -> Expr:
    """Remove 0 subterms: the result is 0 itself or contains no 0 at all."""
    if isinstance(e, _UNARY):
        c = simplify_empty(e.child)
        if isinstance(c, Empty):
            if isinstance(e, (Coproj1, Coproj2)):
                return IDENTITY
            return EMPTY
        return e if c is e.child else type(e)(c)
    if isinstance(e, _BINARY):
        l = simplify_empty(e.left)
        r = simplify_empty(e.right)
        le, re_ = isinstance(l, Empty), isinstance(r, Empty)
        if isinstance(e, Compose):
            if le or re_:
                return EMPTY
        elif isinstance(e, Union):
            if le:
                return r
            if re_:
                return l
        elif isinstance(e, Intersect):
            if le or re_:
                return EMPTY
        else:  # Difference
            if le:
                return EMPTY
            if re_:
                return l
        if l is e.left and r is e.right:
            return e
        return type(e)(l, r)
    return e


def is_downward(e: Expr) -> bool:
    """True when the expression can only relate a node to its descendants
    (syntactically: no diversity and no converse anywhere)."""
    return not any(isinstance(n, (Diversity, Converse)) for n in subexpressions(e))


def condition_depth(e: Expr) -> int:
    """Projection nesting depth for expressions built from 0, id, labels,
    composition, union, transitive closure, and projections."""
    if isinstance(e, (Empty, Identity, EdgeLabel)):
        return 0
    if isinstance(e, TransClosure):
        return condition_depth(e.child)
    if isinstance(e, (Proj1, Proj2)):
        return 1 + condition_depth(e.child)
    if isinstance(e, (Compose, Union)):
        return max(condition_depth(e.left), condition_depth(e.right))
    raise FragmentError(f"condition depth is defined on the tc/pi fragment, got {render(e)}")


# ---------------------------------------------------------------------------
# concrete syntax

class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_KEYWORDS = {"id", "di", "E", "A", "conv", "pi1", "pi2", "copi1", "copi2"}
_FUNCTIONAL = {
    "conv": Converse, "pi1": Proj1, "pi2": Proj2, "copi1": Coproj1, "copi2": Coproj2,
}
_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(\d+)|(-\d+)|([|\\&.+*^()]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos and not m.group(0):
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.group(1):
            tokens.append(("name", m.group(1), m.start(1)))
        elif m.group(2):
            tokens.append(("int", m.group(2), m.start(2)))
        elif m.group(3):
            tokens.append(("negint", m.group(3), m.start(3)))
        else:
            tokens.append(("sym", m.group(4), m.start(4)))
        pos = m.end()
        if pos == m.start():
            break
    rest = text[pos:].strip()
    if rest:
        raise ParseError(f"unexpected character {rest[0]!r}", pos)
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet):
        self.tokens = _tokenize(text)
        self.i = 0
        self.alphabet = alphabet

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_sym(self, sym: str):
        kind, value, pos = self.take()
        if kind != "sym" or value != sym:
            raise ParseError(f"expected {sym!r}", pos)

    def parse(self) -> Expr:
        e = self.union()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {value!r}", pos)
        return e

    def union(self) -> Expr:
        e = self.difference()
        while self.peek()[:2] == ("sym", "|"):
            self.take()
            e = Union(e, self.difference())
        return e

    def difference(self) -> Expr:
        e = self.intersection()
        while self.peek()[:2] == ("sym", "\\"):
            self.take()
            e = Difference(e, self.intersection())
        return e

    def intersection(self) -> Expr:
        e = self.composition()
        while self.peek()[:2] == ("sym", "&"):
            self.take()
            e = Intersect(e, self.composition())
        return e

    def composition(self) -> Expr:
        e = self.postfix()
        while self.peek()[:2] == ("sym", "."):
            self.take()
            e = Compose(e, self.postfix())
        return e

    def postfix(self) -> Expr:
        e = self.atom()
        while True:
            kind, value, pos = self.peek()
            if (kind, value) == ("sym", "+"):
                self.take()
                e = TransClosure(e)
            elif (kind, value) == ("sym", "*"):
                self.take()
                e = star(e)
            elif (kind, value) == ("sym", "^"):
                self.take()
                kind2, value2, pos2 = self.take()
                if kind2 == "negint":
                    raise ParseError("power sugar needs a non-negative exponent", pos2)
                if kind2 != "int":
                    raise ParseError("expected an exponent", pos2)
                e = power(e, int(value2))
            else:
                return e

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "int":
            if value == "0":
                return EMPTY
            raise ParseError("the only numeric atom is 0", pos)
        if kind == "sym" and value == "(":
            e = self.union()
            self.expect_sym(")")
            return e
        if kind == "name":
            if value in _FUNCTIONAL:
                self.expect_sym("(")
                e = self.union()
                self.expect_sym(")")
                return _FUNCTIONAL[value](e)
            if value == "id":
                return IDENTITY
            if value == "di":
                return DIVERSITY
            if value == "A":
                return Union(IDENTITY, DIVERSITY)
            if value == "E":
                if self.alphabet is None:
                    raise ParseError("E needs a declared alphabet", pos)
                return label_union(self.alphabet)
            if self.peek()[:2] == ("sym", "("):
                raise ParseError(f"unknown keyword {value!r}", pos)
            return EdgeLabel(value)
        raise ParseError(f"expected an expression, got {value!r}" if value else "unexpected end of input", pos)


def parse(text: str, alphabet=None) -> Expr:
    """Parse the concrete grammar.  `alphabet` (an iterable of labels) is only
    needed when the text uses the E shorthand."""
    return _Parser(text, alphabet).parse()


_PREC = {
    Union: 1, Difference: 2, Intersect: 3, Compose: 4, TransClosure: 5,
}
_BIN_SYM = {Union: "|", Difference: "\\", Intersect: "&", Compose: "."}
_FUN_SYM = {Converse: "conv", Proj1: "pi1", Proj2: "pi2", Coproj1: "copi1", Coproj2: "copi2"}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 6)


def render(e: Expr) -> str:
    """Produce concrete syntax that parses back to the same tree (no sugar)."""
    t = type(e)
    if t is Empty:
        return "0"
    if t is Identity:
        return "id"
    if t is Diversity:
        return "di"
    if t is EdgeLabel:
        return e.name
    if t in _FUN_SYM:
        return f"{_FUN_SYM[t]}({render(e.child)})"
    if t is TransClosure:
        inner = render(e.child)
        if _prec(e.child) < 5:
            inner = f"({inner})"
        return inner + "+"
    p = _PREC[t]
    left, right = render(e.left), render(e.right)
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {_BIN_SYM[t]} {right}"
