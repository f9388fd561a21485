"""Shared test utilities: tiny constructors, document universes, and the
independent run-search oracle used by the engine invariants."""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, List, Tuple

from spanex import Document, EVA, Mapping, Span
from spanex.automata import State
from spanex.engine import BOTTOM, NodeList
from spanex.model import Marker, MarkerSet, marker_set_key


def span(i: int, j: int) -> Span:
    return Span(i, j)


def mapping(**bindings: Tuple[int, int]) -> Mapping:
    return Mapping({var: Span(*pair) for var, pair in bindings.items()})


def canon(mappings: Iterable[Mapping]) -> List[str]:
    return sorted(m.canonical() for m in mappings)


def all_docs(alphabet: str, max_length: int) -> List[Document]:
    docs = []
    for n in range(max_length + 1):
        for word in itertools.product(alphabet, repeat=n):
            docs.append(Document("".join(word)))
    return docs


def open_m(var: str) -> Marker:
    return Marker.open(var)


def close_m(var: str) -> Marker:
    return Marker.close(var)


def mset(*markers: Marker) -> MarkerSet:
    return frozenset(markers)


# ---------------------------------------------------------------------------
# Independent engine oracles
# ---------------------------------------------------------------------------

Event = Tuple[MarkerSet, int]


def partial_outputs(nodelist: NodeList) -> List[Tuple[Event, ...]]:
    """All event sequences reachable from a list down to the sink, via a
    plain recursive walk independent of the streaming enumerator."""
    found: List[Tuple[Event, ...]] = []

    def walk(nl: NodeList, acc: List[Event]) -> None:
        for payload in nl.payloads():
            if payload is BOTTOM:
                found.append(tuple(reversed(acc)))
            else:
                acc.append((payload.markers, payload.position))
                walk(payload.list, acc)
                acc.pop()

    walk(nodelist, [])
    return found


def event_key(events: Tuple[Event, ...]) -> Tuple:
    return tuple((marker_set_key(s), i) for s, i in events)


def runs_after_capturing(automaton: EVA, prefix: str) -> Dict[State, List[Tuple[Event, ...]]]:
    """Exhaustive search over runs of an EVA on a prefix, ending right
    after the (len(prefix)+1)-th variable step; per end state, the
    partial outputs (nonempty marker sets with their positions)."""
    configs: List[Tuple[State, Tuple[Event, ...]]] = [(automaton.initial, ())]
    for i in range(1, len(prefix) + 2):
        stepped: List[Tuple[State, Tuple[Event, ...]]] = []
        for state, out in configs:
            stepped.append((state, out))
            for markers, target in automaton.marker_transitions(state):
                stepped.append((target, out + ((markers, i),)))
        if i == len(prefix) + 1:
            grouped: Dict[State, List[Tuple[Event, ...]]] = {}
            for state, out in stepped:
                grouped.setdefault(state, []).append(out)
            return grouped
        symbol = prefix[i - 1]
        configs = [
            (target, out)
            for state, out in stepped
            for label, target in automaton.out(state)
            if label == symbol
        ]
    raise AssertionError("unreachable")
