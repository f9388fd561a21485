"""Spanner algebra over functional extended automata: join, union (a
linear construction and a determinism-preserving one), projection, and
compilation of whole expressions to a deterministic sequential EVA.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union as TUnion

from .automata import EPSILON, EVA, VA, State, classify
from .errors import FormatError, InputError, PreconditionError
from .model import MarkerSet, markers_of
from .rgx import RegexAst, infer_alphabet, parse_rgx, rgx_literal_symbols, rgx_to_va
from .transform import determinize_eva, eliminate_epsilon, trim, va_to_eva

logger = logging.getLogger(__name__)


def _check_bound(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(message)


def _require_functional_eva(automaton: EVA, role: str) -> None:
    if automaton.has_epsilon:
        raise PreconditionError(f"{role} must be epsilon-free")
    report = classify(automaton)
    if not report.functional:
        raise PreconditionError(
            f"{role} must be functional: {report.functional_witness}",
            witness=report.functional_witness,
        )


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def join_eva(a1: EVA, a2: EVA, validate: bool = True) -> EVA:
    """Product automaton computing the join of two functional EVA.

    Letter moves synchronize; a marker set free of shared markers moves
    one component alone; two marker sets agreeing on the shared markers
    merge and move both.  Only reachable product states are built, so
    the state count is at most |Q1| * |Q2|.
    """
    if validate:
        _require_functional_eva(a1, "join operand")
        _require_functional_eva(a2, "join operand")
    shared = markers_of(a1.variables & a2.variables)

    start = (a1.initial, a2.initial)
    seen: Set[Tuple[State, State]] = {start}
    frontier = [start]
    transitions: List[Tuple[State, object, State]] = []
    finals: List[State] = []
    while frontier:
        state = frontier.pop()
        p1, p2 = state
        if p1 in a1.finals and p2 in a2.finals:
            finals.append(state)
        moves: List[Tuple[object, Tuple[State, State]]] = []
        letters2: Dict[str, List[State]] = {}
        markers2 = a2.marker_transitions(p2)
        for label, q2 in a2.out(p2):
            if isinstance(label, str):
                letters2.setdefault(label, []).append(q2)
        for label, q1 in a1.out(p1):
            if isinstance(label, str):
                for q2 in letters2.get(label, ()):
                    moves.append((label, (q1, q2)))
            else:
                if not label & shared:
                    moves.append((label, (q1, p2)))
                for set2, q2 in markers2:
                    if label & shared == set2 & shared:
                        moves.append((label | set2, (q1, q2)))
        for set2, q2 in markers2:
            if not set2 & shared:
                moves.append((set2, (p1, q2)))
        for label, target in moves:
            transitions.append((state, label, target))
            if target not in seen:
                seen.add(target)
                frontier.append(target)

    result = EVA(
        seen, start, finals, transitions,
        a1.alphabet | a2.alphabet, a1.variables | a2.variables,
    )
    _check_bound(
        len(result.states) <= len(a1.states) * len(a2.states),
        f"join exceeded |Q1|*|Q2| states: {len(result.states)}",
    )
    return result


def union_eva_linear(a1: EVA, a2: EVA, validate: bool = True) -> EVA:
    """Disjoint union behind a fresh initial state with epsilon edges,
    then epsilon elimination.  Linear size; need not be deterministic."""
    if validate:
        _require_functional_eva(a1, "union operand")
        _require_functional_eva(a2, "union operand")
    if a1.variables != a2.variables:
        raise InputError(
            f"union operands must use the same variables: "
            f"{sorted(a1.variables)} vs {sorted(a2.variables)}"
        )
    fresh = ("u", 0)
    states = [fresh]
    transitions: List[Tuple[State, object, State]] = [
        (fresh, EPSILON, ("u1", a1.initial)),
        (fresh, EPSILON, ("u2", a2.initial)),
    ]
    finals: List[State] = []
    for tag, automaton in (("u1", a1), ("u2", a2)):
        states.extend((tag, q) for q in automaton.states)
        transitions.extend(
            ((tag, q), label, (tag, p)) for q, label, p in automaton.transitions
        )
        finals.extend((tag, q) for q in automaton.finals)
    merged = EVA(
        states, fresh, finals, transitions,
        a1.alphabet | a2.alphabet, a1.variables,
    )
    result = eliminate_epsilon(merged)
    _check_bound(
        len(result.states) <= len(a1.states) + len(a2.states) + 1,
        "linear union grew beyond |Q1|+|Q2|+1 states",
    )
    return result


def union_eva_deterministic(a1: EVA, a2: EVA, validate: bool = True) -> EVA:
    """Union that preserves determinism: run both components in lockstep
    and branch off into a single component exactly when the other has no
    transition for the current label.  Size at most |A1| * |A2|."""
    if validate:
        _require_functional_eva(a1, "union operand")
        _require_functional_eva(a2, "union operand")
        for automaton in (a1, a2):
            report = classify(automaton)
            if report.deterministic is not True:
                raise PreconditionError(
                    f"deterministic union needs deterministic operands: "
                    f"{report.deterministic_witness}"
                )
    if a1.variables != a2.variables:
        raise InputError(
            f"union operands must use the same variables: "
            f"{sorted(a1.variables)} vs {sorted(a2.variables)}"
        )

    start = ("u12", a1.initial, a2.initial)
    seen: Set[State] = {start}
    frontier: List[State] = [start]
    transitions: List[Tuple[State, object, State]] = []
    finals: List[State] = []

    def push(state: State) -> None:
        if state not in seen:
            seen.add(state)
            frontier.append(state)

    while frontier:
        state = frontier.pop()
        tag = state[0]
        if tag == "u12":
            _, p1, p2 = state
            if p1 in a1.finals or p2 in a2.finals:
                finals.append(state)
            out2 = {}
            for label, q2 in a2.out(p2):
                out2[_label_id(label)] = (label, q2)
            matched = set()
            for label, q1 in a1.out(p1):
                key = _label_id(label)
                if key in out2:
                    matched.add(key)
                    target = ("u12", q1, out2[key][1])
                else:
                    target = ("u1", q1)
                transitions.append((state, label, target))
                push(target)
            for key, (label, q2) in out2.items():
                if key not in matched:
                    target = ("u2", q2)
                    transitions.append((state, label, target))
                    push(target)
        else:
            automaton = a1 if tag == "u1" else a2
            q = state[1]
            if q in automaton.finals:
                finals.append(state)
            for label, p in automaton.out(q):
                target = (tag, p)
                transitions.append((state, label, target))
                push(target)

    result = EVA(
        seen, start, finals, transitions,
        a1.alphabet | a2.alphabet, a1.variables,
    )
    bound = (len(a1.states) + 1) * (len(a2.states) + 1)
    _check_bound(
        len(result.states) <= bound,
        f"deterministic union exceeded its size bound: {len(result.states)} > {bound}",
    )
    return result


def _label_id(label) -> Tuple:
    if isinstance(label, str):
        return ("sym", label)
    return ("set", frozenset(label))


def project_eva(automaton: EVA, variables: Iterable[str], validate: bool = True) -> EVA:
    """Strip markers of variables outside the projection set; transitions
    whose set empties become epsilon edges, which are then eliminated."""
    if validate:
        _require_functional_eva(automaton, "projection operand")
    keep = frozenset(variables)
    dropped: MarkerSet = markers_of(automaton.variables - keep)
    transitions: List[Tuple[State, object, State]] = []
    for q, label, p in automaton.transitions:
        if isinstance(label, str):
            transitions.append((q, label, p))
            continue
        remaining = label - dropped
        transitions.append((q, remaining if remaining else EPSILON, p))
    projected = EVA(
        automaton.states, automaton.initial, automaton.finals, transitions,
        automaton.alphabet, automaton.variables & keep,
    )
    return eliminate_epsilon(projected)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class AlgebraExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(AlgebraExpr):
    """Leaf spanner: a VA, an EVA, or a regex with its alphabet."""

    value: TUnion[VA, EVA, RegexAst]
    alphabet: Optional[FrozenSet[str]] = None


@dataclass(frozen=True)
class Project(AlgebraExpr):
    variables: FrozenSet[str]
    child: AlgebraExpr


@dataclass(frozen=True)
class Union(AlgebraExpr):
    left: AlgebraExpr
    right: AlgebraExpr


@dataclass(frozen=True)
class Join(AlgebraExpr):
    left: AlgebraExpr
    right: AlgebraExpr


def expr_atoms(expr: AlgebraExpr) -> List[Atom]:
    if isinstance(expr, Atom):
        return [expr]
    if isinstance(expr, Project):
        return expr_atoms(expr.child)
    return expr_atoms(expr.left) + expr_atoms(expr.right)


def expr_has_project(expr: AlgebraExpr) -> bool:
    if isinstance(expr, Atom):
        return False
    if isinstance(expr, Project):
        return True
    return expr_has_project(expr.left) or expr_has_project(expr.right)


def _atom_to_feva(atom: Atom) -> EVA:
    value = atom.value
    if isinstance(value, RegexAst):
        alphabet = atom.alphabet if atom.alphabet is not None else rgx_literal_symbols(value)
        value = rgx_to_va(value, alphabet)
    if isinstance(value, VA):
        trimmed = trim(value)
        report = classify(trimmed)
        if not report.functional:
            raise PreconditionError(
                f"algebra atoms must be functional: {report.functional_witness}"
            )
        return va_to_eva(trimmed)
    if isinstance(value, EVA):
        if value.has_epsilon:
            value = eliminate_epsilon(value)
        trimmed = trim(value)
        report = classify(trimmed)
        if not report.functional:
            raise PreconditionError(
                f"algebra atoms must be functional: {report.functional_witness}"
            )
        return trimmed
    raise TypeError(f"unsupported atom value: {value!r}")


def compile_expr(expr: AlgebraExpr, strategy: str = "auto") -> EVA:
    """Compile an expression tree to a deterministic sequential EVA.

    Without projections the operand automata are determinized first and
    combined with the determinism-preserving join/union (single
    exponential in total atom size); with projections the combination is
    done with the cheap non-deterministic constructions and a single
    determinization happens at the root.  The strategy switch is
    automatic but can be forced for experiments.
    """
    if strategy not in ("auto", "prop7", "prop8"):
        raise InputError(f"unknown strategy {strategy!r}")
    if strategy == "auto":
        strategy = "prop7" if expr_has_project(expr) else "prop8"
    if strategy == "prop8" and expr_has_project(expr):
        raise InputError("the determinize-atoms-first strategy cannot handle projections")

    atoms = expr_atoms(expr)
    atom_sizes = []

    def build(node: AlgebraExpr, determinize_leaves: bool) -> EVA:
        if isinstance(node, Atom):
            feva = _atom_to_feva(node)
            atom_sizes.append(len(feva.states))
            if determinize_leaves:
                det = determinize_eva(feva)
                logger.info("atom determinized: %d -> %d states", len(feva.states), len(det.states))
                return det
            return feva
        if isinstance(node, Join):
            return join_eva(
                build(node.left, determinize_leaves),
                build(node.right, determinize_leaves),
                validate=False,
            )
        if isinstance(node, Union):
            left = build(node.left, determinize_leaves)
            right = build(node.right, determinize_leaves)
            if left.variables != right.variables:
                raise InputError(
                    f"union operands must use the same variables: "
                    f"{sorted(left.variables)} vs {sorted(right.variables)}"
                )
            if determinize_leaves:
                return union_eva_deterministic(left, right, validate=False)
            return union_eva_linear(left, right, validate=False)
        if isinstance(node, Project):
            return project_eva(build(node.child, determinize_leaves),
                               node.variables, validate=False)
        raise TypeError(f"not an algebra node: {node!r}")

    if strategy == "prop8":
        result = build(expr, determinize_leaves=True)
    else:
        combined = build(expr, determinize_leaves=False)
        logger.info(
            "root determinization input: %d states, %d transitions",
            len(combined.states), len(combined.transitions),
        )
        result = determinize_eva(combined)

    k = len(atoms)
    n_eff = max(2, max(atom_sizes, default=1))
    if strategy == "prop8":
        bound = 2 ** (n_eff * k)
        _check_bound(
            len(result.states) <= bound,
            f"compiled automaton exceeded 2^(n*k) states: {len(result.states)} > {bound}",
        )
    else:
        bound = 2 ** (n_eff ** k)
        _check_bound(
            len(result.states) <= bound,
            f"compiled automaton exceeded 2^(n^k) states: {len(result.states)} > {bound}",
        )
    return result


# ---------------------------------------------------------------------------
# Expression text and JSON forms
# ---------------------------------------------------------------------------

AtomLoader = Callable[[str], TUnion[VA, EVA]]

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _ExprParser:
    def __init__(self, text: str, atom_loader: Optional[AtomLoader],
                 default_alphabet: Optional[FrozenSet[str]]):
        self.text = text
        self.i = 0
        self.atom_loader = atom_loader
        self.default_alphabet = default_alphabet

    def error(self, message: str) -> FormatError:
        return FormatError(f"{message} (at position {self.i} of expression)")

    def skip_ws(self) -> None:
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def expect(self, char: str) -> None:
        self.skip_ws()
        if self.i >= len(self.text) or self.text[self.i] != char:
            raise self.error(f"expected {char!r}")
        self.i += 1

    def name(self) -> str:
        self.skip_ws()
        match = _NAME.match(self.text, self.i)
        if match is None:
            raise self.error("expected a name")
        self.i = match.end()
        return match.group()

    def string(self) -> str:
        self.skip_ws()
        if self.i >= len(self.text) or self.text[self.i] != '"':
            raise self.error("expected a quoted string")
        self.i += 1
        out = []
        while self.i < len(self.text) and self.text[self.i] != '"':
            if self.text[self.i] == "\\" and self.i + 1 < len(self.text):
                out.append(self.text[self.i + 1])
                self.i += 2
            else:
                out.append(self.text[self.i])
                self.i += 1
        if self.i >= len(self.text):
            raise self.error("unterminated string")
        self.i += 1
        return "".join(out)

    def raw_until_close(self) -> str:
        """Bare token up to the closing paren (atom file paths)."""
        self.skip_ws()
        end = self.text.find(")", self.i)
        if end < 0:
            raise self.error("expected ')'")
        value = self.text[self.i : end].strip()
        self.i = end
        return value

    def parse(self) -> AlgebraExpr:
        node = self.node()
        self.skip_ws()
        if self.i != len(self.text):
            raise self.error("trailing input after expression")
        return node

    def node(self) -> AlgebraExpr:
        head = self.name()
        self.expect("(")
        if head in ("join", "union"):
            left = self.node()
            self.expect(",")
            right = self.node()
            self.expect(")")
            return Join(left, right) if head == "join" else Union(left, right)
        if head == "project":
            self.expect("[")
            variables = [self.name()]
            self.skip_ws()
            while self.i < len(self.text) and self.text[self.i] == ",":
                self.i += 1
                variables.append(self.name())
                self.skip_ws()
            self.expect("]")
            self.expect(",")
            child = self.node()
            self.expect(")")
            return Project(frozenset(variables), child)
        if head == "atom":
            self.skip_ws()
            path = self.string() if self.text[self.i : self.i + 1] == '"' else self.raw_until_close()
            self.expect(")")
            if self.atom_loader is None:
                raise self.error("no atom loader supplied for atom(...)")
            return Atom(self.atom_loader(path))
        if head == "rgx":
            pattern = self.string()
            alphabet = self.default_alphabet
            self.skip_ws()
            if self.i < len(self.text) and self.text[self.i] == ",":
                self.i += 1
                alphabet = frozenset(self.string())
            self.expect(")")
            if alphabet is None:
                alphabet = infer_alphabet(pattern)
            ast = parse_rgx(pattern, alphabet)
            return Atom(ast, frozenset(alphabet))
        raise self.error(f"unknown expression operator {head!r}")


def parse_expr(
    text: str,
    atom_loader: Optional[AtomLoader] = None,
    default_alphabet: Optional[Iterable[str]] = None,
) -> AlgebraExpr:
    """Parse `join(e,e)`, `union(e,e)`, `project([x,y], e)`,
    `atom(file.json)`, `rgx("...")` expression text."""
    alphabet = frozenset(default_alphabet) if default_alphabet is not None else None
    return _ExprParser(text, atom_loader, alphabet).parse()


def expr_from_json(
    obj: Dict,
    atom_loader: Optional[AtomLoader] = None,
    default_alphabet: Optional[Iterable[str]] = None,
) -> AlgebraExpr:
    from .automata import load_automaton

    try:
        op = obj["op"]
        if op == "join":
            return Join(
                expr_from_json(obj["left"], atom_loader, default_alphabet),
                expr_from_json(obj["right"], atom_loader, default_alphabet),
            )
        if op == "union":
            return Union(
                expr_from_json(obj["left"], atom_loader, default_alphabet),
                expr_from_json(obj["right"], atom_loader, default_alphabet),
            )
        if op == "project":
            return Project(
                frozenset(obj["vars"]),
                expr_from_json(obj["child"], atom_loader, default_alphabet),
            )
        if op == "atom":
            if "automaton" in obj:
                return Atom(load_automaton(obj["automaton"]))
            if atom_loader is None:
                raise FormatError("no atom loader supplied for atom path")
            return Atom(atom_loader(obj["path"]))
        if op == "rgx":
            alphabet = obj.get("alphabet", default_alphabet)
            if alphabet is None:
                alphabet = infer_alphabet(obj["pattern"])
            ast = parse_rgx(obj["pattern"], frozenset(alphabet))
            return Atom(ast, frozenset(alphabet))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad expression JSON: {exc}") from exc
    raise FormatError(f"unknown expression op {op!r}")
