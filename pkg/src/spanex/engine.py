"""Evaluation of a deterministic sequential EVA over a document.

The preprocessing pass scans the document once, alternating a capturing
stage (simulate the variable transitions that can fire before the next
letter) and a reading stage (move lists along letter transitions).  It
builds a DAG whose nodes are marker events (S, i) and whose backward
paths to the sink encode exactly the runs; enumeration then walks that
DAG depth-first and emits each output mapping once, with work between
two outputs bounded by the automaton alone.
"""

from __future__ import annotations

from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple

from .automata import EVA, State, require_det_seva
from .errors import PreconditionError
from .instrument import DelayReport, OpCounter
from .model import Document, Mapping, MarkerSet, Span


class _Bottom:
    __slots__ = ()

    def __repr__(self) -> str:
        return "BOTTOM"


BOTTOM = _Bottom()


class _Element:
    """Singly linked list element; write-once except that an unset next
    pointer may be set exactly once (the append hook)."""

    __slots__ = ("payload", "next")

    def __init__(self, payload: Any, nxt: Optional["_Element"]):
        self.payload = payload
        self.next = nxt


class NodeList:
    """List as a (start, end) handle pair into a shared element chain.

    Iteration is bounded by the recorded end handle, never by an unset
    next pointer; that makes a lazy copy stable even when the copied
    range's last element later has its next pointer set by an append to
    the original list.  All operations are O(1).
    """

    __slots__ = ("start", "end", "consumed")

    def __init__(self, start: Optional[_Element] = None, end: Optional[_Element] = None):
        self.start = start
        self.end = end
        self.consumed = False  # set once this list was appended into another

    @property
    def is_empty(self) -> bool:
        return self.start is None

    def add(self, payload: Any) -> None:
        """Prepend a payload; the end handle is unchanged."""
        element = _Element(payload, self.start)
        self.start = element
        if self.end is None:
            self.end = element

    def lazycopy(self) -> "NodeList":
        return NodeList(self.start, self.end)

    def append(self, other: "NodeList") -> None:
        """Concatenate ``other`` after this list in O(1).

        Each list may be appended somewhere at most once; violating that
        would splice one chain into two targets and corrupt the DAG, so
        it is a hard assertion (determinism of the automaton guarantees
        it never fires).
        """
        if other.is_empty:
            raise AssertionError("append requires a nonempty argument")
        if other.consumed:
            raise AssertionError("append-once discipline violated: list already appended")
        other.consumed = True
        if self.start is None:
            self.start = other.start
            self.end = other.end
            return
        if self.end.next is not None:
            raise AssertionError("append target's end element already has a successor")
        self.end.next = other.start
        self.end = other.end

    def payloads(self) -> Iterator[Any]:
        """Plain traversal for tests and trace dumps (not instrumented)."""
        element = self.start
        while element is not None:
            yield element.payload
            if element is self.end:
                break
            element = element.next


class DagNode:
    """A marker event (S, i) plus the list of its predecessor nodes."""

    __slots__ = ("markers", "position", "list")

    def __init__(self, markers: MarkerSet, position: int, predecessors: NodeList):
        self.markers = markers
        self.position = position
        self.list = predecessors

    def __repr__(self) -> str:
        return f"DagNode({sorted(str(m) for m in self.markers)}, {self.position})"


class EvaluationState:
    """Result of preprocessing: per-state lists over the finished DAG."""

    __slots__ = ("automaton", "document", "lists", "live", "counter", "order")

    def __init__(self, automaton: EVA, document: Document, lists, live, counter, order):
        self.automaton = automaton
        self.document = document
        self.lists: Dict[State, NodeList] = lists
        self.live: Set[State] = live
        self.counter: OpCounter = counter
        self.order: Dict[State, int] = order

    def expand_list(self, q: State):
        """Structural expansion of a state's list, for trace comparisons."""
        nodelist = self.lists.get(q)
        if nodelist is None:
            return ()
        return _expand(nodelist)


def _expand(nodelist: NodeList):
    out = []
    for payload in nodelist.payloads():
        if payload is BOTTOM:
            out.append("BOTTOM")
        else:
            out.append((payload.markers, payload.position, _expand(payload.list)))
    return tuple(out)


PhaseHook = Callable[[str, int, "EvaluationState"], None]


def evaluate_preprocess(
    automaton: EVA,
    document: Document,
    validate: bool = True,
    counter: Optional[OpCounter] = None,
    on_phase: Optional[PhaseHook] = None,
) -> EvaluationState:
    """Build the run DAG for a deterministic sequential EVA.

    ``validate`` may be disabled by callers that already checked the
    automaton; running on other inputs is undefined output (duplicates).
    The capturing stage never clears lists (a state stays live across a
    skipped variable step); the reading stage clears and moves them.
    Work per position is proportional to the live part of the automaton.
    """
    if automaton.has_epsilon:
        raise PreconditionError("evaluation requires an epsilon-free automaton")
    if validate:
        require_det_seva(automaton)
    document.validate_against(automaton.alphabet)
    counter = counter if counter is not None else OpCounter()

    order = {q: i for i, q in enumerate(automaton.state_order())}
    marker_out: Dict[State, List[Tuple[MarkerSet, State]]] = {
        q: automaton.marker_transitions(q) for q in automaton.states
    }
    letter_out: Dict[State, Dict[str, State]] = {}
    for q in automaton.states:
        targets: Dict[str, State] = {}
        for label, p in automaton.out(q):
            if isinstance(label, str):
                targets[label] = p
        letter_out[q] = targets

    lists: Dict[State, NodeList] = {automaton.initial: NodeList()}
    lists[automaton.initial].add(BOTTOM)
    counter.preprocess += 1
    live: Set[State] = {automaton.initial}
    state = EvaluationState(automaton, document, lists, live, counter, order)

    def capturing(i: int) -> None:
        snapshot = sorted(live, key=order.__getitem__)
        old = {}
        for q in snapshot:
            old[q] = lists[q].lazycopy()
            counter.preprocess += 1
        counter.note("lazycopy", len(snapshot))
        for q in snapshot:
            counter.preprocess += 1
            for markers, p in marker_out[q]:
                node = DagNode(markers, i, old[q])
                target = lists.get(p)
                if target is None:
                    target = lists[p] = NodeList()
                target.add(node)
                counter.preprocess += 2
                counter.note("node", 1)
                live.add(p)
        if on_phase is not None:
            on_phase("capturing", i, state)

    def reading(i: int) -> None:
        symbol = document.symbol(i)
        snapshot = sorted(live, key=order.__getitem__)
        old = {q: lists[q] for q in snapshot}
        for q in snapshot:
            lists[q] = NodeList()
        live.clear()
        for q in snapshot:
            counter.preprocess += 1
            p = letter_out[q].get(symbol)
            if p is None:
                continue
            target = lists.get(p)
            if target is None:
                target = lists[p] = NodeList()
            target.append(old[q])
            counter.preprocess += 1
            counter.note("append", 1)
            live.add(p)
        if on_phase is not None:
            on_phase("reading", i, state)

    for i in range(1, len(document) + 1):
        capturing(i)
        reading(i)
    capturing(len(document) + 1)
    return state


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def _mapping_from_events(events: Tuple[Tuple[MarkerSet, int], ...]) -> Mapping:
    starts: Dict[str, int] = {}
    bindings: Dict[str, Span] = {}
    for markers, position in events:
        # Opens before closes: one set may both open and close a variable.
        for m in markers:
            if m.is_open:
                starts[m.var] = position
        for m in markers:
            if not m.is_open:
                bindings[m.var] = Span(starts.pop(m.var), position)
    if starts:
        raise AssertionError(f"unclosed variables in emitted run: {sorted(starts)}")
    return Mapping(bindings)


class _ListCursor:
    """Iteration state over one list: begin/next/atEnd folded together."""

    __slots__ = ("nxt", "end")

    def __init__(self, nodelist: NodeList):
        self.nxt = nodelist.start
        self.end = nodelist.end

    def advance(self) -> Optional[_Element]:
        element = self.nxt
        if element is None:
            return None
        self.nxt = None if element is self.end else element.next
        return element


def enumerate_raw(
    state: EvaluationState,
    finals: Optional[Set[State]] = None,
    counter: Optional[OpCounter] = None,
) -> Iterator[Tuple[Tuple[MarkerSet, int], ...]]:
    """Depth-first traversal of the DAG, yielding (S, i) event sequences
    in increasing position order, one per accepting run.

    The explicit stack mirrors the recursive traversal exactly (finals
    in canonical state order, list elements in list order), so the
    emission order is deterministic.
    """
    counter = counter if counter is not None else state.counter
    if finals is None:
        finals = state.automaton.finals
    for q in sorted(finals, key=state.order.__getitem__):
        nodelist = state.lists.get(q)
        counter.enum_work += 1
        if nodelist is None or nodelist.is_empty:
            continue
        # Frame: (cursor, entered_via_node); partial holds events deepest-last.
        stack: List[Tuple[_ListCursor, bool]] = [(_ListCursor(nodelist), False)]
        partial: List[Tuple[MarkerSet, int]] = []
        while stack:
            cursor, via_node = stack[-1]
            element = cursor.advance()
            counter.enum_work += 1
            if element is None:
                stack.pop()
                if via_node:
                    partial.pop()
                continue
            payload = element.payload
            if payload is BOTTOM:
                yield tuple(reversed(partial))
            else:
                partial.append((payload.markers, payload.position))
                stack.append((_ListCursor(payload.list), True))
                counter.enum_work += 1


def enumerate_stream(
    state: EvaluationState,
    finals: Optional[Set[State]] = None,
    counter: Optional[OpCounter] = None,
) -> Iterator[Mapping]:
    """All mappings of the evaluated automaton, each exactly once."""
    for events in enumerate_raw(state, finals, counter):
        yield _mapping_from_events(events)


def evaluate(
    automaton: EVA,
    document: Document,
    validate: bool = True,
) -> Iterator[Mapping]:
    """Preprocess then stream every output mapping."""
    return enumerate_stream(evaluate_preprocess(automaton, document, validate=validate))


def measure_delay(
    state: EvaluationState,
    finals: Optional[Set[State]] = None,
) -> DelayReport:
    """Instrumented enumeration: maximum work between consecutive
    outputs, including before the first and after the last."""
    counter = OpCounter()
    last = 0
    max_segment = 0
    outputs = 0
    for _ in enumerate_raw(state, finals, counter):
        segment = counter.enum_work - last
        last = counter.enum_work
        max_segment = max(max_segment, segment)
        outputs += 1
    max_segment = max(max_segment, counter.enum_work - last)
    return DelayReport(
        outputs=outputs,
        max_inter_output_work=max_segment,
        preprocessing_ops=state.counter.preprocess,
    )
