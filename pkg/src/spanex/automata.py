"""Variable-set automata, their extended variant, the exhaustive run
oracle and the sequential/functional/deterministic classifier.

A VA is an NFA whose transitions carry either an alphabet symbol or a
single variable marker.  An extended automaton (EVA) carries nonempty
marker *sets* instead, and its runs alternate between one variable step
(possibly skipped) and one letter step.  Epsilon labels are accepted on
EVA only as a transient device for the algebra constructions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .errors import ClassificationTooLarge, FormatError, PreconditionError
from .model import (
    Document,
    Mapping,
    Marker,
    MarkerSet,
    Span,
    format_marker_set,
    marker_set_key,
)


class _Epsilon:
    __slots__ = ()

    def __repr__(self) -> str:
        return "EPSILON"


EPSILON = _Epsilon()

State = Any
Label = Any  # str | Marker | frozenset[Marker] | EPSILON
Transition = Tuple[State, Label, State]


def canon_key(obj: Any) -> Tuple:
    """Total order over the heterogeneous state/label values we use."""
    if isinstance(obj, bool):
        return ("b", obj)
    if isinstance(obj, str):
        return ("s", obj)
    if isinstance(obj, int):
        return ("i", obj)
    if isinstance(obj, Marker):
        return ("m",) + obj.sort_key()
    if isinstance(obj, frozenset):
        return ("f", tuple(sorted(canon_key(e) for e in obj)))
    if isinstance(obj, tuple):
        return ("t", tuple(canon_key(e) for e in obj))
    if obj is EPSILON:
        return ("e",)
    return ("o", str(obj))


def label_key(label: Label) -> Tuple:
    if label is EPSILON:
        return (2,)
    if isinstance(label, str):
        return (0, label)
    if isinstance(label, Marker):
        return (1, marker_set_key(frozenset([label])))
    return (1, marker_set_key(label))


def state_name(state: State) -> str:
    """Stable printable name; structured states keep their provenance."""
    if isinstance(state, str):
        return state
    if isinstance(state, frozenset):
        return "{" + "|".join(sorted(state_name(e) for e in state)) + "}"
    if isinstance(state, tuple):
        return "(" + ",".join(state_name(e) for e in state) + ")"
    if isinstance(state, Marker):
        return str(state)
    return str(state)


def format_label(label: Label) -> str:
    if label is EPSILON:
        return "eps"
    if isinstance(label, str):
        return label
    if isinstance(label, Marker):
        return str(label)
    return format_marker_set(label)


class _AutomatonBase:
    """Shared structure of VA and EVA; immutable after construction."""

    __slots__ = ("alphabet", "states", "initial", "finals", "transitions",
                 "variables", "_out", "_size")

    def __init__(
        self,
        states: Iterable[State],
        initial: State,
        finals: Iterable[State],
        transitions: Iterable[Transition],
        alphabet: Iterable[str],
        variables: Optional[Iterable[str]] = None,
    ):
        self.states = frozenset(states)
        self.initial = initial
        self.finals = frozenset(finals)
        self.transitions = frozenset(transitions)
        self.alphabet = frozenset(alphabet)
        mentioned = self._mentioned_variables()
        if variables is None:
            self.variables = mentioned
        else:
            self.variables = frozenset(variables)
            missing = mentioned - self.variables
            if missing:
                raise FormatError(
                    f"markers reference undeclared variables: {sorted(missing)}"
                )
        self._validate()
        out: Dict[State, List[Tuple[Label, State]]] = {q: [] for q in self.states}
        for q, label, p in self.transitions:
            out[q].append((label, p))
        for q in out:
            out[q].sort(key=lambda t: (label_key(t[0]), canon_key(t[1])))
        self._out = out
        self._size = len(self.states) + len(self.transitions)

    def _mentioned_variables(self) -> FrozenSet[str]:
        found: Set[str] = set()
        for _, label, _ in self.transitions:
            if isinstance(label, Marker):
                found.add(label.var)
            elif isinstance(label, frozenset):
                found.update(m.var for m in label)
        return frozenset(found)

    def _validate(self) -> None:
        if self.initial not in self.states:
            raise FormatError("initial state is not a declared state")
        if not self.finals <= self.states:
            raise FormatError("final states must be declared states")
        for q, label, p in self.transitions:
            if q not in self.states or p not in self.states:
                raise FormatError(
                    f"transition endpoint not declared: {state_name(q)} -> {state_name(p)}"
                )
            self._validate_label(label)

    def _validate_label(self, label: Label) -> None:
        raise NotImplementedError

    @property
    def size(self) -> int:
        """|A| = number of states + number of transitions."""
        return self._size

    def out(self, q: State) -> List[Tuple[Label, State]]:
        return self._out[q]

    def state_order(self) -> List[State]:
        return sorted(self.states, key=canon_key)

    def letter_successors(self, q: State, a: str) -> List[State]:
        return [p for label, p in self._out[q] if label == a]

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(states={len(self.states)}, "
            f"transitions={len(self.transitions)}, vars={len(self.variables)})"
        )


class VA(_AutomatonBase):
    """Variable-set automaton: labels are symbols or single markers."""

    __slots__ = ()

    def _validate_label(self, label: Label) -> None:
        if isinstance(label, str):
            if label not in self.alphabet:
                raise FormatError(f"symbol {label!r} is not in the alphabet")
        elif not isinstance(label, Marker):
            raise FormatError(f"VA labels must be symbols or single markers, got {label!r}")

    def variable_transitions(self, q: State) -> List[Tuple[Marker, State]]:
        return [(label, p) for label, p in self.out(q) if isinstance(label, Marker)]


class EVA(_AutomatonBase):
    """Extended automaton: labels are symbols, nonempty marker sets, or
    (transiently) epsilon."""

    __slots__ = ()

    def _validate_label(self, label: Label) -> None:
        if isinstance(label, str):
            if label not in self.alphabet:
                raise FormatError(f"symbol {label!r} is not in the alphabet")
        elif isinstance(label, frozenset):
            if not label:
                raise FormatError("extended transitions must carry a nonempty marker set")
            for m in label:
                if not isinstance(m, Marker):
                    raise FormatError(f"marker set contains a non-marker: {m!r}")
        elif label is not EPSILON:
            raise FormatError(f"EVA labels must be symbols, marker sets or epsilon, got {label!r}")

    @property
    def has_epsilon(self) -> bool:
        return any(label is EPSILON for _, label, _ in self.transitions)

    def marker_transitions(self, q: State) -> List[Tuple[MarkerSet, State]]:
        return [(label, p) for label, p in self.out(q) if isinstance(label, frozenset)]

    def epsilon_successors(self, q: State) -> List[State]:
        return [p for label, p in self.out(q) if label is EPSILON]


# ---------------------------------------------------------------------------
# JSON automaton format
# ---------------------------------------------------------------------------

def _marker_from_string(text: str) -> Marker:
    if text.startswith("open:"):
        return Marker.open(text[5:])
    if text.startswith("close:"):
        return Marker.close(text[6:])
    raise FormatError(f"bad marker {text!r}; expected 'open:<var>' or 'close:<var>'")


def _label_from_json(obj: Any) -> Label:
    if not isinstance(obj, dict):
        raise FormatError(f"transition label must be an object, got {obj!r}")
    if obj.get("epsilon"):
        return EPSILON
    if "symbol" in obj:
        return obj["symbol"]
    if "markers" in obj:
        markers = [_marker_from_string(m) for m in obj["markers"]]
        if not markers:
            raise FormatError("empty marker set in transition label")
        if len(markers) == 1:
            return markers[0]
        return frozenset(markers)
    raise FormatError(f"unrecognized transition label: {obj!r}")


def _label_to_json(label: Label) -> Dict[str, Any]:
    if label is EPSILON:
        return {"epsilon": True}
    if isinstance(label, str):
        return {"symbol": label}
    if isinstance(label, Marker):
        return {"markers": [str(label)]}
    return {"markers": [str(m) for m in sorted(label, key=Marker.sort_key)]}


def load_automaton(data: Dict[str, Any]):
    """Build a VA or EVA from the JSON object format.

    The optional ``kind`` field ("va" or "eva") settles the reading of
    automata whose marker labels are all singletons, where the two run
    semantics differ; without it, single markers load as a VA and marker
    sets or epsilons force an EVA.
    """
    try:
        alphabet = list(data["alphabet"])
        states = list(data["states"])
        initial = data["initial"]
        finals = list(data["finals"])
        raw_transitions = data["transitions"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"automaton object is missing field: {exc}") from exc
    variables = data.get("variables")

    labels: List[Tuple[str, Label, str]] = []
    needs_eva = False
    for t in raw_transitions:
        try:
            label = _label_from_json(t["label"])
            labels.append((t["from"], label, t["to"]))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad transition entry {t!r}") from exc
        if label is EPSILON or (isinstance(label, frozenset) and len(label) > 1):
            needs_eva = True

    kind = data.get("kind")
    if kind not in (None, "va", "eva"):
        raise FormatError(f"unknown automaton kind {kind!r}")
    if kind == "va" and needs_eva:
        raise FormatError("kind 'va' conflicts with marker-set or epsilon labels")
    make_eva = needs_eva or kind == "eva"

    if make_eva:
        transitions = [
            (q, frozenset([label]) if isinstance(label, Marker) else label, p)
            for q, label, p in labels
        ]
        return EVA(states, initial, finals, transitions, alphabet, variables)
    return VA(states, initial, finals, labels, alphabet, variables)


def dump_automaton(automaton: _AutomatonBase) -> Dict[str, Any]:
    names = {q: state_name(q) for q in automaton.states}
    if len(set(names.values())) != len(names):
        names = {q: f"s{i}" for i, q in enumerate(automaton.state_order())}
    transitions = [
        {"from": names[q], "label": _label_to_json(label), "to": names[p]}
        for q, label, p in sorted(
            automaton.transitions,
            key=lambda t: (canon_key(t[0]), label_key(t[1]), canon_key(t[2])),
        )
    ]
    return {
        "kind": "eva" if isinstance(automaton, EVA) else "va",
        "alphabet": sorted(automaton.alphabet),
        "variables": sorted(automaton.variables),
        "states": sorted(names.values()),
        "initial": names[automaton.initial],
        "finals": sorted(names[q] for q in automaton.finals),
        "transitions": transitions,
    }


# ---------------------------------------------------------------------------
# Exhaustive run oracle
# ---------------------------------------------------------------------------

def _apply_marker_set(
    markers: MarkerSet,
    open_at: Dict[str, int],
    done: Dict[str, Span],
    position: int,
) -> Optional[Tuple[Dict[str, int], Dict[str, Span]]]:
    """Advance the open/closed bookkeeping by one marker set, or None if
    the step would reuse a marker (no valid run continues from there)."""
    new_open = dict(open_at)
    new_done = dict(done)
    by_var: Dict[str, List[Marker]] = {}
    for m in markers:
        by_var.setdefault(m.var, []).append(m)
    for var, ms in by_var.items():
        opens = any(m.is_open for m in ms)
        closes = any(not m.is_open for m in ms)
        if opens and closes:
            if var in new_open or var in new_done:
                return None
            new_done[var] = Span(position, position)
        elif opens:
            if var in new_open or var in new_done:
                return None
            new_open[var] = position
        else:
            if var not in new_open:
                return None
            new_done[var] = Span(new_open.pop(var), position)
    return new_open, new_done


def _brute_va(automaton: VA, doc: Document) -> Set[Mapping]:
    # Validity is positional: a close may precede its open within the
    # same position (empty span), so such closes stay pending until the
    # matching open; a letter step with a pending close cannot lead to a
    # valid run any more.
    n = len(doc)
    results: Set[Mapping] = set()

    def explore(
        q: State,
        pos: int,
        open_at: Dict[str, int],
        pending: FrozenSet[str],
        done: Dict[str, Span],
    ) -> None:
        if pos == n + 1 and q in automaton.finals and not open_at and not pending:
            results.add(Mapping(done))
        for label, p in automaton.out(q):
            if isinstance(label, str):
                if pos <= n and doc.symbol(pos) == label and not pending:
                    explore(p, pos + 1, open_at, pending, done)
                continue
            var = label.var
            if var in done or (var in open_at and label.is_open):
                continue
            if label.is_open:
                if var in pending:
                    explore(p, pos, open_at, pending - {var},
                            {**done, var: Span(pos, pos)})
                else:
                    explore(p, pos, {**open_at, var: pos}, pending, done)
            else:
                if var in pending:
                    continue
                if var in open_at:
                    rest = dict(open_at)
                    start = rest.pop(var)
                    explore(p, pos, rest, pending, {**done, var: Span(start, pos)})
                else:
                    explore(p, pos, open_at, pending | {var}, done)

    explore(automaton.initial, 1, {}, frozenset(), {})
    return results


def _brute_eva(automaton: EVA, doc: Document) -> Set[Mapping]:
    n = len(doc)
    results: Set[Mapping] = set()

    def explore(
        q: State,
        pos: int,
        open_at: Dict[str, int],
        done: Dict[str, Span],
        can_var: bool,
        can_eps: bool,
    ) -> None:
        if pos == n + 1 and q in automaton.finals and not open_at:
            results.add(Mapping(done))
        for label, p in automaton.out(q):
            if isinstance(label, str):
                if pos <= n and doc.symbol(pos) == label:
                    explore(p, pos + 1, open_at, done, True, True)
            elif label is EPSILON:
                # Epsilon moves are position-transparent but never chain.
                if can_eps:
                    explore(p, pos, open_at, done, can_var, False)
            elif can_var:
                stepped = _apply_marker_set(label, open_at, done, pos)
                if stepped is not None:
                    explore(p, pos, stepped[0], stepped[1], False, True)

    explore(automaton.initial, 1, {}, {}, True, True)
    return results


def brute_enumerate_va(automaton, doc: Document) -> Set[Mapping]:
    """All mappings of valid accepting runs, by exhaustive search.

    Works on any VA or EVA; prefixes that reuse a marker are pruned,
    which loses no output (valid runs never reuse markers) and bounds
    the number of variable steps between letters.
    """
    doc.validate_against(automaton.alphabet)
    if isinstance(automaton, VA):
        return _brute_va(automaton, doc)
    if isinstance(automaton, EVA):
        return _brute_eva(automaton, doc)
    raise TypeError(f"expected VA or EVA, got {type(automaton).__name__}")


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

UNSEEN, OPEN, CLOSED, PENDING_CLOSE = 0, 1, 2, 3
_INVALID = "INVALID"

#: Refuse classification beyond this many variables (3^l status space).
DEFAULT_VARIABLE_CAP = 16


@dataclass
class ClassificationReport:
    sequential: bool
    functional: bool
    deterministic: Optional[bool]
    sequential_witness: Optional[str] = None
    functional_witness: Optional[str] = None
    deterministic_witness: Optional[str] = None

    def summary(self) -> str:
        parts = [f"sequential={self.sequential}", f"functional={self.functional}"]
        if self.deterministic is not None:
            parts.append(f"deterministic={self.deterministic}")
        return " ".join(parts)


def _describe_path(parents, config, extra: str) -> str:
    steps = []
    cur = config
    while cur is not None:
        entry = parents[cur]
        if entry is None:
            break
        prev, label = entry
        steps.append(format_label(label))
        cur = prev
    path = " ".join(reversed(steps)) if steps else "(empty run)"
    return f"run [{path}] {extra}"


def _status_after_set(status: Tuple[int, ...], markers: MarkerSet, var_index: Dict[str, int]):
    """Apply one extended marker set to a status vector; None means
    invalid.  A set holding both markers of a variable closes it at one
    position (empty span), which is a valid step from unseen."""
    new = list(status)
    opens = {m.var for m in markers if m.is_open}
    closes = {m.var for m in markers if not m.is_open}
    for var in opens | closes:
        i = var_index[var]
        if var in opens and var in closes:
            if new[i] != UNSEEN:
                return None
            new[i] = CLOSED
        elif var in opens:
            if new[i] != UNSEEN:
                return None
            new[i] = OPEN
        else:
            if new[i] != OPEN:
                return None
            new[i] = CLOSED
    return tuple(new)


def _status_after_marker(status: Tuple[int, ...], marker: Marker, var_index: Dict[str, int]):
    """Single VA marker step.  Validity is positional, so a close before
    its open is pending until an open at the same position matches it;
    a letter step with a pending close can never become valid."""
    i = var_index[marker.var]
    new = list(status)
    if marker.is_open:
        if new[i] == UNSEEN:
            new[i] = OPEN
        elif new[i] == PENDING_CLOSE:
            new[i] = CLOSED
        else:
            return None
    else:
        if new[i] == OPEN:
            new[i] = CLOSED
        elif new[i] == UNSEEN:
            new[i] = PENDING_CLOSE
        else:
            return None
    return tuple(new)


def classify(automaton, variable_cap: int = DEFAULT_VARIABLE_CAP) -> ClassificationReport:
    """Decide sequential / functional (and deterministic for EVA) by
    reachability over (state, per-variable status) configurations."""
    variables = sorted(automaton.variables)
    if len(variables) > variable_cap:
        raise ClassificationTooLarge(
            f"classification too large: {len(variables)} variables exceeds cap {variable_cap}"
        )
    var_index = {v: i for i, v in enumerate(variables)}
    is_eva = isinstance(automaton, EVA)
    if is_eva and automaton.has_epsilon:
        raise PreconditionError("classification requires an epsilon-free automaton")

    initial_status = tuple([UNSEEN] * len(variables))
    # Config: (state, status-or-_INVALID) for VA,
    #         (state, status-or-_INVALID, var_step_available) for EVA.
    if is_eva:
        start = (automaton.initial, initial_status, True)
    else:
        start = (automaton.initial, initial_status)
    parents: Dict[Any, Optional[Tuple[Any, Label]]] = {start: None}
    queue = [start]
    seq_bad = None
    fun_bad = None

    while queue:
        config = queue.pop()
        state, status = config[0], config[1]
        if state in automaton.finals:
            bad_seq = status is _INVALID or OPEN in status or PENDING_CLOSE in status
            if bad_seq and seq_bad is None:
                seq_bad = config
            if status is not _INVALID and UNSEEN in status and fun_bad is None:
                fun_bad = config
        for label, p in automaton.out(state):
            if isinstance(label, str):
                stepped = status
                if status is not _INVALID and PENDING_CLOSE in status:
                    stepped = _INVALID
                nxt = (p, stepped, True) if is_eva else (p, stepped)
            elif is_eva:
                if not config[2]:
                    continue
                if status is _INVALID:
                    stepped = _INVALID
                else:
                    stepped = _status_after_set(status, label, var_index)
                    stepped = _INVALID if stepped is None else stepped
                nxt = (p, stepped, False)
            else:
                if status is _INVALID:
                    stepped = _INVALID
                else:
                    stepped = _status_after_marker(status, label, var_index)
                    stepped = _INVALID if stepped is None else stepped
                nxt = (p, stepped)
            if nxt not in parents:
                parents[nxt] = (config, label)
                queue.append(nxt)

    sequential = seq_bad is None
    functional = sequential and fun_bad is None
    seq_witness = None
    fun_witness = None
    if not sequential:
        status = seq_bad[1]
        if status is _INVALID:
            reason = "reuses or mis-nests a marker and still accepts"
        else:
            dangling = [
                v for v in variables
                if status[var_index[v]] in (OPEN, PENDING_CLOSE)
            ]
            reason = "accepts with unmatched variables: " + ",".join(dangling)
        seq_witness = _describe_path(parents, seq_bad, reason)
    if not functional:
        if not sequential:
            fun_witness = "not sequential"
        else:
            status = fun_bad[1]
            reason = "accepts without using: " + ",".join(
                v for v in variables if status[var_index[v]] == UNSEEN
            )
            fun_witness = _describe_path(parents, fun_bad, reason)

    deterministic: Optional[bool] = None
    det_witness = None
    if is_eva:
        seen: Dict[Tuple[Any, Tuple], State] = {}
        deterministic = True
        for q, label, p in automaton.transitions:
            key = (q, label_key(label))
            if key in seen and seen[key] != p:
                deterministic = False
                det_witness = (
                    f"state {state_name(q)} has two transitions on "
                    f"{format_label(label)}: to {state_name(seen[key])} and {state_name(p)}"
                )
                break
            seen[key] = p

    return ClassificationReport(
        sequential=sequential,
        functional=functional,
        deterministic=deterministic,
        sequential_witness=seq_witness,
        functional_witness=fun_witness,
        deterministic_witness=det_witness,
    )


def require_det_seva(automaton: EVA, variable_cap: int = DEFAULT_VARIABLE_CAP) -> None:
    """Precondition guard used by the evaluation and counting engines."""
    report = classify(automaton, variable_cap)
    if report.deterministic is not True:
        raise PreconditionError(
            f"automaton is not deterministic: {report.deterministic_witness}",
            witness=report.deterministic_witness,
        )
    if not report.sequential:
        raise PreconditionError(
            f"automaton is not sequential: {report.sequential_witness}",
            witness=report.sequential_witness,
        )
