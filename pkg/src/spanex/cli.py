"""Command line surface: compile, check, enumerate, count, bench.

Exit codes: 0 success, 1 semantic error (classification, alphabet or
variable mismatch), 2 I/O or parse error.  Documents are read as raw
files; symbols outside the declared alphabet are a semantic error.
"""

from __future__ import annotations

import json
import sys
import time
from typing import List, Optional, Tuple

import click

from .algebra import compile_expr, parse_expr
from .automata import EVA, classify, dump_automaton, load_automaton
from .counting import count_det_seva
from .engine import enumerate_stream, evaluate_preprocess, measure_delay
from .errors import FormatError, SpanexError
from .instrument import OpCounter
from .model import Document
from .rgx import infer_alphabet, parse_rgx, rgx_to_va
from .transform import (
    determinize_eva,
    eliminate_epsilon,
    eva_to_va,
    functional_va_to_det_seva,
    va_to_det_seva_general,
)

Stage = Tuple[str, int, int]


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    try:
        fn()
    except FormatError as exc:
        _fail(2, str(exc))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(2, str(exc))
    except SpanexError as exc:
        _fail(1, str(exc))


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _load_spanner(rgx: Optional[str], automaton: Optional[str], expr: Optional[str],
                  alphabet: Optional[str]):
    given = [x for x in (rgx, automaton, expr) if x is not None]
    if len(given) != 1:
        raise FormatError("exactly one of --rgx, --automaton, --expr is required")
    if rgx is not None:
        sigma = frozenset(alphabet) if alphabet else infer_alphabet(rgx)
        return ("rgx", parse_rgx(rgx, sigma), sigma)
    if automaton is not None:
        return ("automaton", load_automaton(_load_json(automaton)), None)
    sigma = frozenset(alphabet) if alphabet else None
    parsed = parse_expr(expr, atom_loader=lambda p: load_automaton(_load_json(p)),
                        default_alphabet=sigma)
    return ("expr", parsed, sigma)


def _compile_det_seva(kind: str, value, sigma, strategy: str) -> Tuple[EVA, List[Stage]]:
    stages: List[Stage] = []

    def note(name: str, a) -> None:
        stages.append((name, len(a.states), len(a.transitions)))

    if kind == "expr":
        result = compile_expr(value, strategy=strategy)
        note("compiled expression", result)
        return result, stages
    if kind == "rgx":
        value = rgx_to_va(value, sigma)
        note("regex to VA", value)
        kind = "automaton"
    automaton = value
    note("input", automaton)
    if isinstance(automaton, EVA):
        if automaton.has_epsilon:
            automaton = eliminate_epsilon(automaton)
            note("epsilon eliminated", automaton)
        report = classify(automaton)
        if report.deterministic and report.sequential:
            return automaton, stages
        if report.sequential:
            result = determinize_eva(automaton)
            note("determinized", result)
            return result, stages
        automaton = eva_to_va(automaton)
        note("expanded to VA", automaton)
    report = classify(automaton)
    if report.functional:
        result = functional_va_to_det_seva(automaton)
        note("functional pipeline", result)
    else:
        result = va_to_det_seva_general(automaton)
        note("general pipeline", result)
    return result, stages


def _print_stage_report(stages: List[Stage]) -> None:
    previous = None
    for name, n_states, n_transitions in stages:
        growth = ""
        if previous is not None and previous[0] > 0:
            growth = f"  (x{n_states / previous[0]:.2f} states)"
        click.echo(f"# {name}: states={n_states} transitions={n_transitions}{growth}", err=True)
        previous = (n_states, n_transitions)


def _read_document(doc: Optional[str], doc_inline: Optional[str], automaton: EVA) -> Document:
    if (doc is None) == (doc_inline is None):
        raise FormatError("exactly one of --doc, --doc-inline is required")
    if doc is not None:
        with open(doc, "r", encoding="utf-8") as handle:
            text = handle.read()
    else:
        text = doc_inline
    document = Document(text)
    document.validate_against(automaton.alphabet)
    return document


_INPUT_OPTIONS = [
    click.option("--rgx", help="regex formula text"),
    click.option("--automaton", type=click.Path(), help="automaton JSON file"),
    click.option("--expr", help="algebra expression text"),
    click.option("--alphabet", help="declared alphabet as a string of symbols"),
]


def _with_input(fn):
    for option in reversed(_INPUT_OPTIONS):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """Evaluate capture regexes and variable-set automata on documents."""


@main.command("compile")
@_with_input
@click.option("--strategy", type=click.Choice(["auto", "prop7", "prop8"]), default="auto",
              help="expression compilation strategy")
@click.option("--out", type=click.Path(), help="write the automaton JSON here")
def cmd_compile(rgx, automaton, expr, alphabet, strategy, out) -> None:
    """Compile the input spanner to a deterministic sequential EVA."""

    def run() -> None:
        kind, value, sigma = _load_spanner(rgx, automaton, expr, alphabet)
        result, stages = _compile_det_seva(kind, value, sigma, strategy)
        _print_stage_report(stages)
        payload = json.dumps(dump_automaton(result), indent=2, sort_keys=True)
        if out:
            with open(out, "w", encoding="utf-8") as handle:
                handle.write(payload + "\n")
        else:
            click.echo(payload)

    _guard(run)


@main.command("check")
@_with_input
@click.option("--sequential", "need_sequential", is_flag=True, help="require sequential")
@click.option("--functional", "need_functional", is_flag=True, help="require functional")
@click.option("--deterministic", "need_deterministic", is_flag=True, help="require deterministic")
def cmd_check(rgx, automaton, expr, alphabet,
              need_sequential, need_functional, need_deterministic) -> None:
    """Classify the input automaton and verify requested properties."""

    def run() -> None:
        kind, value, sigma = _load_spanner(rgx, automaton, expr, alphabet)
        if kind == "expr":
            raise FormatError("check operates on an automaton or regex, not an expression")
        if kind == "rgx":
            value = rgx_to_va(value, sigma)
        report = classify(value)
        click.echo(report.summary())
        for name in ("sequential", "functional", "deterministic"):
            witness = getattr(report, f"{name}_witness")
            if witness:
                click.echo(f"witness[{name}]: {witness}")
        failed = []
        if need_sequential and not report.sequential:
            failed.append("sequential")
        if need_functional and not report.functional:
            failed.append("functional")
        if need_deterministic and report.deterministic is not True:
            failed.append("deterministic")
        if failed:
            raise SpanexError(f"required properties do not hold: {', '.join(failed)}")

    _guard(run)


@main.command("enumerate")
@_with_input
@click.option("--doc", type=click.Path(), help="document file (read raw)")
@click.option("--doc-inline", help="document text")
@click.option("--limit", type=int, help="stop after this many mappings")
@click.option("--stats", is_flag=True, help="print a delay report to stderr")
@click.option("--skip-validation", is_flag=True, help="skip the det/sequential precondition check")
@click.option("--strategy", type=click.Choice(["auto", "prop7", "prop8"]), default="auto")
@click.option("--out", type=click.Path(), help="write NDJSON here instead of stdout")
def cmd_enumerate(rgx, automaton, expr, alphabet, doc, doc_inline, limit, stats,
                  skip_validation, strategy, out) -> None:
    """Stream the output mappings as NDJSON, one mapping per line."""

    def run() -> None:
        if limit is not None and limit < 0:
            raise FormatError("--limit must be nonnegative")
        kind, value, sigma = _load_spanner(rgx, automaton, expr, alphabet)
        result, _ = _compile_det_seva(kind, value, sigma, strategy)
        document = _read_document(doc, doc_inline, result)
        state = evaluate_preprocess(result, document, validate=not skip_validation)
        sink = open(out, "w", encoding="utf-8") if out else sys.stdout
        try:
            emitted = 0
            for mapping in enumerate_stream(state):
                if limit is not None and emitted >= limit:
                    break
                sink.write(json.dumps(mapping.to_json_obj(), sort_keys=True) + "\n")
                emitted += 1
        finally:
            if out:
                sink.close()
        if stats:
            report = measure_delay(state)
            click.echo(json.dumps(report.as_dict(), sort_keys=True), err=True)

    _guard(run)


@main.command("count")
@_with_input
@click.option("--doc", type=click.Path(), help="document file (read raw)")
@click.option("--doc-inline", help="document text")
@click.option("--skip-validation", is_flag=True)
@click.option("--strategy", type=click.Choice(["auto", "prop7", "prop8"]), default="auto")
def cmd_count(rgx, automaton, expr, alphabet, doc, doc_inline, skip_validation, strategy) -> None:
    """Print the number of output mappings."""

    def run() -> None:
        kind, value, sigma = _load_spanner(rgx, automaton, expr, alphabet)
        result, _ = _compile_det_seva(kind, value, sigma, strategy)
        document = _read_document(doc, doc_inline, result)
        click.echo(str(count_det_seva(result, document, validate=not skip_validation)))

    _guard(run)


@main.command("bench")
@_with_input
@click.option("--lengths", default="10,100,1000", help="comma-separated document lengths")
@click.option("--fill", default="a", help="symbol repeated to reach each length")
@click.option("--suffix", default="", help="fixed document suffix")
@click.option("--strategy", type=click.Choice(["auto", "prop7", "prop8"]), default="auto")
@click.option("--out", type=click.Path(), help="write the CSV here instead of stdout")
def cmd_bench(rgx, automaton, expr, alphabet, lengths, fill, suffix, strategy, out) -> None:
    """Preprocess and enumerate over generated documents of increasing
    length; emit one CSV row per length with instrumented counts."""

    def run() -> None:
        kind, value, sigma = _load_spanner(rgx, automaton, expr, alphabet)
        result, _ = _compile_det_seva(kind, value, sigma, strategy)
        try:
            sizes = [int(x) for x in lengths.split(",") if x.strip()]
        except ValueError as exc:
            raise FormatError(f"bad --lengths: {exc}") from exc
        rows = ["length,preprocess_ops,preprocess_seconds,outputs,max_inter_output_work"]
        for n in [0] + sizes:
            if n >= len(suffix):
                text = fill * (n - len(suffix)) + suffix
            else:
                text = fill * n
            document = Document(text)
            counter = OpCounter()
            started = time.perf_counter()
            state = evaluate_preprocess(result, document, validate=False, counter=counter)
            elapsed = time.perf_counter() - started
            report = measure_delay(state)
            rows.append(
                f"{n},{counter.preprocess},{elapsed:.6f},"
                f"{report.outputs},{report.max_inter_output_work}"
            )
        payload = "\n".join(rows) + "\n"
        if out:
            with open(out, "w", encoding="utf-8") as handle:
                handle.write(payload)
        else:
            click.echo(payload, nl=False)

    _guard(run)


if __name__ == "__main__":
    main()
