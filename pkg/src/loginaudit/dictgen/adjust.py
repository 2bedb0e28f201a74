"""Hint-driven re-weighting of a trained grammar.

Hints become ``H`` segments.  Every structure holding an ``L`` slot whose
length equals some hint's length spawns sibling structures with that slot
swapped for ``H``; the siblings take ``boost`` of the parent's mass.  This
is the only place that decides how hints compose with L/D/S segments.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Collection, Dict, Iterable, Iterator, List, Optional, Tuple

from .pcfg import PcfgGrammar, Slot, format_structure, iter_guesses, parse_structure

DEFAULT_HINT_BOOST = 0.5


def with_hints(grammar: PcfgGrammar, hints: Iterable[str], boost: float = DEFAULT_HINT_BOOST) -> PcfgGrammar:
    if not 0.0 <= boost < 1.0:
        raise ValueError("boost must be in [0, 1)")
    keywords = list(dict.fromkeys(h.strip().lower() for h in hints if h and h.strip()))
    if not keywords or boost == 0.0:
        return PcfgGrammar(dict(grammar.structures), {k: dict(v) for k, v in grammar.segments.items()}, list(grammar.hints))

    h_buckets: Dict[Slot, Dict[str, float]] = defaultdict(dict)
    for word in keywords:
        h_buckets[("H", len(word))][word] = 0.0
    for bucket in h_buckets.values():
        for word in bucket:
            bucket[word] = 1.0 / len(bucket)

    structures: Dict[str, float] = defaultdict(float)
    touched = False
    for structure, p in grammar.structures.items():
        slots = parse_structure(structure)
        positions = [i for i, (cls, n) in enumerate(slots) if cls == "L" and ("H", n) in h_buckets]
        if not positions:
            structures[structure] += p
            continue
        touched = True
        structures[structure] += (1.0 - boost) * p
        share = boost * p / len(positions)
        for i in positions:
            variant = slots[:i] + [("H", slots[i][1])] + slots[i + 1:]
            structures[format_structure(variant)] += share

    # splitting preserves mass; renormalize only to absorb rounding
    total = sum(structures.values()) if touched else 1.0
    segments = {k: dict(v) for k, v in grammar.segments.items()}
    segments.update({k: dict(v) for k, v in h_buckets.items()})
    return PcfgGrammar(
        structures={s: p / total for s, p in structures.items()},
        segments=segments,
        hints=list(dict.fromkeys(list(grammar.hints) + keywords)),
    )


class GuessStream:
    """Descending-probability guesses that skip anything already tried.

    When the failures point at a nonexistent username the stream starts
    suspended: iteration yields nothing until :meth:`resume` is called,
    which is the engine's cue to run the username prober first.
    """

    def __init__(self, grammar: PcfgGrammar, attempted: Collection[str] = (), suspended: bool = False):
        self.grammar = grammar
        self.attempted = set(attempted)
        self.suspended = suspended
        self._it = iter_guesses(grammar)

    @property
    def needs_username_probe(self) -> bool:
        return self.suspended

    def resume(self) -> None:
        self.suspended = False

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return self

    def __next__(self) -> Tuple[str, float]:
        if self.suspended:
            raise StopIteration
        for pw, p in self._it:
            if pw not in self.attempted:
                self.attempted.add(pw)
                return pw, p
        raise StopIteration

    def take(self, n: int) -> List[Tuple[str, float]]:
        return list(itertools.islice(self, n))


def adjust_dictionary(
    grammar: PcfgGrammar,
    hints: Iterable[str],
    history: Collection[str] = (),
    failure_cause=None,
    boost: float = DEFAULT_HINT_BOOST,
) -> GuessStream:
    """Fold ``hints`` into ``grammar`` and return the re-sorted guess stream.

    ``history`` holds passwords already submitted; they are never emitted
    again.  ``failure_cause`` is the dominant cause of the previous round.
    """
    from ..events import Cause

    adjusted = with_hints(grammar, hints, boost)
    suspended = getattr(failure_cause, "cause", failure_cause) is Cause.USERNAME_NONEXISTENT
    return GuessStream(adjusted, attempted=history, suspended=suspended)
