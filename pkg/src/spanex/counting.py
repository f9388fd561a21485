"""Output counting.

For a deterministic sequential EVA the number of output mappings equals
the number of accepting runs, so one integer per state propagated
through the same capturing/reading alternation as the evaluator counts
the outputs in time proportional to |A| * |d|.  Counters are Python
integers, hence arbitrary precision: output counts grow like |d|^l in
the number of variables, far past any machine word.
"""

from __future__ import annotations

from typing import Dict, Optional

from .automata import EVA, State, brute_enumerate_va, require_det_seva
from .errors import PreconditionError
from .instrument import OpCounter
from .model import Document


def count_det_seva(
    automaton: EVA,
    document: Document,
    validate: bool = True,
    counter: Optional[OpCounter] = None,
) -> int:
    """Count |output| of a deterministic sequential EVA on a document.

    Capturing adds the pre-stage count of each state into its marker
    successors without clearing anything; reading rebuilds the counts
    along letter transitions.  The result is the sum over final states
    after the last capturing stage.
    """
    if automaton.has_epsilon:
        raise PreconditionError("counting requires an epsilon-free automaton")
    if validate:
        require_det_seva(automaton)
    document.validate_against(automaton.alphabet)
    counter = counter if counter is not None else OpCounter()

    marker_out = {q: automaton.marker_transitions(q) for q in automaton.states}
    letter_out: Dict[State, Dict[str, State]] = {}
    for q in automaton.states:
        letter_out[q] = {
            label: p for label, p in automaton.out(q) if isinstance(label, str)
        }

    counts: Dict[State, int] = {automaton.initial: 1}

    def capturing() -> None:
        for q, amount in list(counts.items()):
            counter.count_ops += 1
            for _, p in marker_out[q]:
                counts[p] = counts.get(p, 0) + amount
                counter.count_ops += 1

    def reading(i: int) -> None:
        nonlocal counts
        symbol = document.symbol(i)
        before = counts
        counts = {}
        for q, amount in before.items():
            counter.count_ops += 1
            p = letter_out[q].get(symbol)
            if p is None:
                continue
            counts[p] = counts.get(p, 0) + amount
            counter.count_ops += 1

    for i in range(1, len(document) + 1):
        capturing()
        reading(i)
    capturing()
    return sum(counts.get(q, 0) for q in automaton.finals)


def count_oracle(automaton, document: Document) -> int:
    """|brute-force enumeration|; the independent cross-check."""
    return len(brute_enumerate_va(automaton, document))
