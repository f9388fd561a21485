"""Capture regexes: parsing, direct reference evaluation, and
compilation to a variable-set automaton.

Concrete grammar: juxtaposition concatenates, `|` alternates, `*` is a
postfix repetition, `x{...}` captures into variable x, `()` groups, `.`
matches any declared symbol, and `\\` escapes a metacharacter.  An
identifier run directly followed by `{` is read as a capture variable,
so write `a(b{...})` for a symbol `a` followed by a capture named `b`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .automata import EPSILON, VA
from .errors import FormatError, RegexSyntaxError
from .model import Document, Mapping, Marker, Span

_METACHARS = set("|*(){}.\\")
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")


class RegexAst:
    __slots__ = ()


@dataclass(frozen=True)
class Epsilon(RegexAst):
    pass


@dataclass(frozen=True)
class Symbol(RegexAst):
    symbol: str


@dataclass(frozen=True)
class Capture(RegexAst):
    var: str
    child: RegexAst


@dataclass(frozen=True)
class Concat(RegexAst):
    left: RegexAst
    right: RegexAst


@dataclass(frozen=True)
class Alt(RegexAst):
    left: RegexAst
    right: RegexAst


@dataclass(frozen=True)
class Star(RegexAst):
    child: RegexAst


def rgx_variables(node: RegexAst) -> FrozenSet[str]:
    if isinstance(node, Capture):
        return rgx_variables(node.child) | {node.var}
    if isinstance(node, (Concat, Alt)):
        return rgx_variables(node.left) | rgx_variables(node.right)
    if isinstance(node, Star):
        return rgx_variables(node.child)
    return frozenset()


def rgx_size(node: RegexAst) -> int:
    if isinstance(node, (Concat, Alt)):
        return 1 + rgx_size(node.left) + rgx_size(node.right)
    if isinstance(node, (Star, Capture)):
        return 1 + rgx_size(node.child)
    return 1


def rgx_literal_symbols(node: RegexAst) -> FrozenSet[str]:
    if isinstance(node, Symbol):
        return frozenset([node.symbol])
    if isinstance(node, (Concat, Alt)):
        return rgx_literal_symbols(node.left) | rgx_literal_symbols(node.right)
    if isinstance(node, (Star, Capture)):
        return rgx_literal_symbols(node.child)
    return frozenset()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, alphabet: FrozenSet[str]):
        self.text = text
        self.alphabet = alphabet
        self.i = 0

    def error(self, message: str) -> RegexSyntaxError:
        return RegexSyntaxError(message, self.i)

    def peek(self) -> Optional[str]:
        return self.text[self.i] if self.i < len(self.text) else None

    def parse(self) -> RegexAst:
        node = self.parse_alt()
        if self.i != len(self.text):
            raise self.error(f"unexpected {self.text[self.i]!r}")
        return node

    def parse_alt(self) -> RegexAst:
        node = self.parse_concat()
        while self.peek() == "|":
            self.i += 1
            node = Alt(node, self.parse_concat())
        return node

    def parse_concat(self) -> RegexAst:
        parts: List[RegexAst] = []
        while True:
            c = self.peek()
            if c is None or c in "|)}":
                break
            parts.append(self.parse_repetition())
        if not parts:
            return Epsilon()
        node = parts[0]
        for part in parts[1:]:
            node = Concat(node, part)
        return node

    def parse_repetition(self) -> RegexAst:
        node = self.parse_atom()
        while self.peek() == "*":
            self.i += 1
            node = Star(node)
        return node

    def any_symbol(self) -> RegexAst:
        symbols = sorted(self.alphabet)
        if not symbols:
            raise self.error("'.' needs a nonempty alphabet")
        node: RegexAst = Symbol(symbols[0])
        for s in symbols[1:]:
            node = Alt(node, Symbol(s))
        return node

    def symbol(self, ch: str) -> RegexAst:
        if ch not in self.alphabet:
            raise self.error(f"symbol {ch!r} is not in the declared alphabet")
        return Symbol(ch)

    def parse_atom(self) -> RegexAst:
        c = self.peek()
        if c is None:
            raise self.error("unexpected end of input")
        if c == "(":
            self.i += 1
            node = self.parse_alt()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.i += 1
            return node
        if c == ".":
            self.i += 1
            return self.any_symbol()
        if c == "\\":
            if self.i + 1 >= len(self.text):
                raise self.error("dangling escape")
            self.i += 2
            return self.symbol(self.text[self.i - 1])
        if c in "*|){}":
            raise self.error(f"unexpected {c!r}")
        if c in _IDENT_START:
            j = self.i + 1
            while j < len(self.text) and self.text[j] in _IDENT_CONT:
                j += 1
            if j < len(self.text) and self.text[j] == "{":
                var = self.text[self.i : j]
                self.i = j + 1
                child = self.parse_alt()
                if self.peek() != "}":
                    raise self.error("expected '}'")
                self.i += 1
                return Capture(var, child)
        self.i += 1
        return self.symbol(c)


def parse_rgx(text: str, alphabet: Iterable[str]) -> RegexAst:
    """Parse the concrete grammar against a declared alphabet."""
    return _Parser(text, frozenset(alphabet)).parse()


def infer_alphabet(text: str) -> FrozenSet[str]:
    """Literal symbols occurring in a pattern, lexically: escaped
    characters count, capture-variable names and metacharacters do not.
    The default when no alphabet is declared."""
    out = set()
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            out.add(text[i + 1])
            i += 2
            continue
        if c in _IDENT_START:
            j = i + 1
            while j < len(text) and text[j] in _IDENT_CONT:
                j += 1
            if j < len(text) and text[j] == "{":
                i = j + 1
                continue
        if c not in _METACHARS:
            out.add(c)
        i += 1
    return frozenset(out)


# ---------------------------------------------------------------------------
# JSON round trip (test fixtures)
# ---------------------------------------------------------------------------

def rgx_to_json(node: RegexAst) -> Dict:
    if isinstance(node, Epsilon):
        return {"kind": "epsilon"}
    if isinstance(node, Symbol):
        return {"kind": "symbol", "symbol": node.symbol}
    if isinstance(node, Capture):
        return {"kind": "capture", "var": node.var, "child": rgx_to_json(node.child)}
    if isinstance(node, Concat):
        return {"kind": "concat", "left": rgx_to_json(node.left), "right": rgx_to_json(node.right)}
    if isinstance(node, Alt):
        return {"kind": "alt", "left": rgx_to_json(node.left), "right": rgx_to_json(node.right)}
    if isinstance(node, Star):
        return {"kind": "star", "child": rgx_to_json(node.child)}
    raise TypeError(f"not a regex node: {node!r}")


def rgx_from_json(obj: Dict) -> RegexAst:
    try:
        kind = obj["kind"]
        if kind == "epsilon":
            return Epsilon()
        if kind == "symbol":
            return Symbol(obj["symbol"])
        if kind == "capture":
            return Capture(obj["var"], rgx_from_json(obj["child"]))
        if kind == "concat":
            return Concat(rgx_from_json(obj["left"]), rgx_from_json(obj["right"]))
        if kind == "alt":
            return Alt(rgx_from_json(obj["left"]), rgx_from_json(obj["right"]))
        if kind == "star":
            return Star(rgx_from_json(obj["child"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad regex JSON: {exc}") from exc
    raise FormatError(f"unknown regex node kind {kind!r}")


# ---------------------------------------------------------------------------
# Reference semantics
# ---------------------------------------------------------------------------

Pair = Tuple[Span, Mapping]


def _concat_pairs(left: Set[Pair], right: Set[Pair]) -> Set[Pair]:
    by_start: Dict[int, List[Pair]] = {}
    for span, mapping in right:
        by_start.setdefault(span.start, []).append((span, mapping))
    out: Set[Pair] = set()
    for span1, m1 in left:
        for span2, m2 in by_start.get(span1.end, ()):
            # Reusing a variable on both sides is simply not a match.
            if m1.domain() & m2.domain():
                continue
            out.add((Span(span1.start, span2.end), m1.union(m2)))
    return out


def rgx_eval_reference(node: RegexAst, doc: Document) -> Set[Mapping]:
    """Direct two-layer evaluation; the oracle the compiled automata are
    checked against.

    The span-level layer computes, per subformula, every (span, mapping)
    pair it matches; the document-level result keeps the mappings whose
    span is the whole document.  Starred subformulas are evaluated as a
    least fixpoint of span concatenation, which is finite because both
    spans and mappings over a fixed document are finite.
    """
    n = len(doc)
    empty = Mapping()

    def eval_pairs(node: RegexAst) -> Set[Pair]:
        if isinstance(node, Epsilon):
            return {(Span(i, i), empty) for i in range(1, n + 2)}
        if isinstance(node, Symbol):
            return {
                (Span(i, i + 1), empty)
                for i in range(1, n + 1)
                if doc.symbol(i) == node.symbol
            }
        if isinstance(node, Capture):
            out: Set[Pair] = set()
            for span, mapping in eval_pairs(node.child):
                if node.var in mapping:
                    continue
                out.add((span, mapping.union(Mapping({node.var: span}))))
            return out
        if isinstance(node, Concat):
            return _concat_pairs(eval_pairs(node.left), eval_pairs(node.right))
        if isinstance(node, Alt):
            return eval_pairs(node.left) | eval_pairs(node.right)
        if isinstance(node, Star):
            child = eval_pairs(node.child)
            acc = {(Span(i, i), empty) for i in range(1, n + 2)} | child
            frontier = child
            while frontier:
                grown = _concat_pairs(frontier, child) - acc
                acc |= grown
                frontier = grown
            return acc
        raise TypeError(f"not a regex node: {node!r}")

    whole = Span(1, n + 1)
    return {mapping for span, mapping in eval_pairs(node) if span == whole}


# ---------------------------------------------------------------------------
# Compilation to VA
# ---------------------------------------------------------------------------

def rgx_to_va(node: RegexAst, alphabet: Iterable[str]) -> VA:
    """Thompson-style construction, then epsilon elimination.

    Capture(x, child) becomes an open-x transition into the child
    fragment and a close-x transition out of it.  The result has O(|g|)
    states and the same semantics as the reference evaluation on every
    document.
    """
    alphabet = frozenset(alphabet)
    counter = 0
    transitions: List[Tuple[int, object, int]] = []

    def fresh() -> int:
        nonlocal counter
        counter += 1
        return counter - 1

    def build(node: RegexAst) -> Tuple[int, int]:
        if isinstance(node, Epsilon):
            s, e = fresh(), fresh()
            transitions.append((s, EPSILON, e))
            return s, e
        if isinstance(node, Symbol):
            s, e = fresh(), fresh()
            transitions.append((s, node.symbol, e))
            return s, e
        if isinstance(node, Capture):
            cs, ce = build(node.child)
            s, e = fresh(), fresh()
            transitions.append((s, Marker.open(node.var), cs))
            transitions.append((ce, Marker.close(node.var), e))
            return s, e
        if isinstance(node, Concat):
            ls, le = build(node.left)
            rs, re = build(node.right)
            transitions.append((le, EPSILON, rs))
            return ls, re
        if isinstance(node, Alt):
            ls, le = build(node.left)
            rs, re = build(node.right)
            s, e = fresh(), fresh()
            transitions.extend(
                [(s, EPSILON, ls), (s, EPSILON, rs), (le, EPSILON, e), (re, EPSILON, e)]
            )
            return s, e
        if isinstance(node, Star):
            cs, ce = build(node.child)
            s, e = fresh(), fresh()
            transitions.extend(
                [(s, EPSILON, e), (s, EPSILON, cs), (ce, EPSILON, e), (ce, EPSILON, cs)]
            )
            return s, e
        raise TypeError(f"not a regex node: {node!r}")

    start, end = build(node)

    # Full epsilon closure: a VA run has no alternation discipline, so
    # markers eliminate exactly like NFA letters.
    eps_out: Dict[int, List[int]] = {}
    real_out: Dict[int, List[Tuple[object, int]]] = {}
    for q, label, p in transitions:
        if label is EPSILON:
            eps_out.setdefault(q, []).append(p)
        else:
            real_out.setdefault(q, []).append((label, p))

    closures: Dict[int, FrozenSet[int]] = {}

    def closure(q: int) -> FrozenSet[int]:
        if q in closures:
            return closures[q]
        seen = {q}
        stack = [q]
        while stack:
            cur = stack.pop()
            for nxt in eps_out.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        closures[q] = frozenset(seen)
        return closures[q]

    new_transitions: Set[Tuple[int, object, int]] = set()
    finals: Set[int] = set()
    reachable = {start}
    stack = [start]
    while stack:
        q = stack.pop()
        if end in closure(q):
            finals.add(q)
        for via in closure(q):
            for label, p in real_out.get(via, ()):
                new_transitions.add((q, label, p))
                if p not in reachable:
                    reachable.add(p)
                    stack.append(p)

    names = {q: f"q{i}" for i, q in enumerate(sorted(reachable))}
    return VA(
        names.values(),
        names[start],
        [names[q] for q in finals],
        [(names[q], label, names[p]) for q, label, p in new_transitions],
        alphabet,
        rgx_variables(node),
    )
