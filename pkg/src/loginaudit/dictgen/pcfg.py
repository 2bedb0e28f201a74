"""Probabilistic context-free grammar over letter/digit/special segments.

Training counts structures (``L8D4S1``) and the literals filling each
``(class, length)`` slot; guessing walks the cross product in descending
probability with a priority queue, so nothing is materialized up front.
"""

from __future__ import annotations

import heapq
import itertools
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

SEGMENT_CLASSES = ("L", "D", "S", "H")
NORMALIZATION_TOL = 1e-9

Slot = Tuple[str, int]

_STRUCT_TOKEN = re.compile(r"([LDSH])(\d+)")


class TrainingError(ValueError):
    pass


def _char_class(ch: str) -> str:
    if ch.isascii() and ch.isalpha():
        return "L"
    if ch.isascii() and ch.isdigit():
        return "D"
    return "S"


def split_password(pw: str) -> Tuple[str, List[Tuple[Slot, str]]]:
    """Split ``pw`` into maximal same-class runs.

    >>> split_password("password6789!")[0]
    'L8D4S1'
    """
    if not pw:
        raise ValueError("password must be non-empty")
    segments: List[Tuple[Slot, str]] = []
    for cls, run in itertools.groupby(pw, key=_char_class):
        text = "".join(run)
        segments.append(((cls, len(text)), text))
    structure = "".join(f"{c}{n}" for (c, n), _ in segments)
    return structure, segments


def parse_structure(structure: str) -> List[Slot]:
    slots = [(m.group(1), int(m.group(2))) for m in _STRUCT_TOKEN.finditer(structure)]
    if not slots or "".join(f"{c}{n}" for c, n in slots) != structure or any(n < 1 for _, n in slots):
        raise ValueError(f"malformed structure {structure!r}")
    return slots


def format_structure(slots: Sequence[Slot]) -> str:
    return "".join(f"{c}{n}" for c, n in slots)


@dataclass
class PcfgGrammar:
    structures: Dict[str, float]
    segments: Dict[Slot, Dict[str, float]]
    hints: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._sorted: Dict[Slot, List[Tuple[str, float]]] = {}

    def validate(self) -> None:
        if abs(sum(self.structures.values()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError("structure probabilities do not sum to 1")
        for structure in self.structures:
            parse_structure(structure)
        for (cls, length), table in self.segments.items():
            if cls not in SEGMENT_CLASSES:
                raise ValueError(f"unknown segment class {cls!r}")
            if abs(sum(table.values()) - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"bucket {cls}{length} does not sum to 1")
            for literal in table:
                if len(literal) != length:
                    raise ValueError(f"literal {literal!r} does not fit {cls}{length}")

    def ranked(self, slot: Slot) -> List[Tuple[str, float]]:
        """Bucket literals by descending probability, ties lexicographic."""
        if slot not in self._sorted:
            table = self.segments.get(slot, {})
            self._sorted[slot] = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
        return self._sorted[slot]

    def space_size(self) -> int:
        total = 0
        for structure in self.structures:
            n = 1
            for slot in parse_structure(structure):
                n *= len(self.segments.get(slot, {}))
            total += n
        return total

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "pcfg-grammar/1",
            "structures": dict(sorted(self.structures.items())),
            "segments": {
                f"{c}{n}": dict(sorted(table.items()))
                for (c, n), table in sorted(self.segments.items())
            },
            "hints": list(self.hints),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcfgGrammar":
        segments = {}
        for key, table in data["segments"].items():
            (slot,) = parse_structure(key)
            segments[slot] = {str(k): float(v) for k, v in table.items()}
        grammar = cls(
            structures={str(k): float(v) for k, v in data["structures"].items()},
            segments=segments,
            hints=list(data.get("hints", [])),
        )
        grammar.validate()
        return grammar

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PcfgGrammar":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_pcfg(corpus: Iterable[str]) -> PcfgGrammar:
    structure_counts: Counter = Counter()
    literal_counts: Dict[Slot, Counter] = defaultdict(Counter)
    for pw in corpus:
        pw = pw.rstrip("\r\n")
        if not pw:
            continue
        structure, segments = split_password(pw)
        structure_counts[structure] += 1
        for slot, literal in segments:
            literal_counts[slot][literal] += 1
    total = sum(structure_counts.values())
    if total == 0:
        raise TrainingError("cannot train on an empty corpus")
    structures = {s: c / total for s, c in structure_counts.items()}
    segments = {}
    for slot, counts in literal_counts.items():
        n = sum(counts.values())
        segments[slot] = {lit: c / n for lit, c in counts.items()}
    return PcfgGrammar(structures=structures, segments=segments)


def load_corpus(path: Union[str, Path]) -> List[str]:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return [line.rstrip("\r\n") for line in fh if line.strip("\r\n")]


def derivation_probability(grammar: PcfgGrammar, structure: str, literals: Sequence[str]) -> float:
    """Structure probability times each slot's literal probability, left to right."""
    p = grammar.structures.get(structure, 0.0)
    for slot, literal in zip(parse_structure(structure), literals):
        p *= grammar.segments.get(slot, {}).get(literal, 0.0)
    return p


def password_probability(grammar: PcfgGrammar, pw: str) -> float:
    structure, segments = split_password(pw)
    if structure not in grammar.structures:
        return 0.0
    return derivation_probability(grammar, structure, [lit for _, lit in segments])


def iter_guesses(grammar: PcfgGrammar) -> Iterator[Tuple[str, float]]:
    """Yield ``(password, probability)`` in non-increasing probability.

    Each queue state is a structure plus one rank index per slot.  A popped
    state spawns children by bumping one index at or after its pivot, which
    reaches every index vector exactly once.  Equal-probability states are
    all expanded before any of them is emitted so ties come out in
    lexicographic order.  A password reachable through several derivations
    (only possible with hint slots) is emitted once, at its best derivation.
    """
    heap: list = []

    def push(structure: str, slots: List[Slot], idx: Tuple[int, ...], pivot: int) -> None:
        literals = [grammar.ranked(slot)[i][0] for slot, i in zip(slots, idx)]
        p = grammar.structures[structure]
        for slot, i in zip(slots, idx):
            p *= grammar.ranked(slot)[i][1]
        # stage 0 (unexpanded) sorts ahead of stage 1 at equal probability
        heapq.heappush(heap, (-p, 0, "".join(literals), structure, idx, pivot))

    parsed: Dict[str, List[Slot]] = {}
    for structure, p in grammar.structures.items():
        if p <= 0:
            continue
        slots = parse_structure(structure)
        if all(grammar.ranked(s) for s in slots):
            parsed[structure] = slots
            push(structure, slots, (0,) * len(slots), 0)

    emitted = set()
    while heap:
        neg_p, stage, pw, structure, idx, pivot = heap[0]
        if stage == 0:
            heapq.heapreplace(heap, (neg_p, 1, pw, structure, idx, pivot))
            slots = parsed[structure]
            for pos in range(pivot, len(slots)):
                if idx[pos] + 1 < len(grammar.ranked(slots[pos])):
                    child = idx[:pos] + (idx[pos] + 1,) + idx[pos + 1:]
                    push(structure, slots, child, pos)
            continue
        heapq.heappop(heap)
        if pw in emitted:
            continue
        emitted.add(pw)
        yield pw, -neg_p


def generate_guesses(grammar: PcfgGrammar, n: int) -> List[Tuple[str, float]]:
    if n < 1:
        raise ValueError("n must be at least 1")
    return list(itertools.islice(iter_guesses(grammar), n))

