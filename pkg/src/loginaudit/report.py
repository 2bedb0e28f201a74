"""Batch scanning, metrics and the false-alarm estimate."""

from __future__ import annotations

import ipaddress
import json
import logging
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
from urllib.parse import urlsplit

from .dictgen.dictionaries import CmsRule
from .engine import BlastConfig, BlastResult, Outcome, blast

logger = logging.getLogger(__name__)

DEFAULT_CONCURRENCY = 8

# Which judgment step can reject which interference event.  Steps: A is the
# keyword blacklist, B the surviving login keys, C the error-length check
# and D the recheck.
COVERAGE: Dict[str, Tuple[int, ...]] = {
    "A": (2, 3, 4, 5, 6),
    "B": (1, 2, 3),
    "C": (1, 2, 4),
    "D": (3, 5),
}
INTERFERENCE_EVENTS = (1, 2, 3, 4, 5, 6)


class TargetsError(ValueError):
    pass


class AuthorizationRequired(PermissionError):
    """A non-loopback target was given without explicit authorization."""


# -- targets -----------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    url: str
    site_host: Optional[str] = None


def _check_url(url: str, where: str) -> None:
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.hostname:
        raise TargetsError(f"{where}: not an http(s) URL: {url!r}")


def parse_targets(text: str, source: str = "<targets>") -> List[Target]:
    """One target per line: ``URL [site-host]``; blank lines and ``#`` comments skipped.

    The optional second column names the site whose domain feeds the
    dynamic dictionary when the URL itself points at an address.
    """
    targets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        cols = line.split()
        if len(cols) > 2:
            raise TargetsError(f"{source}:{lineno}: expected 'URL [site-host]', got {len(cols)} columns")
        _check_url(cols[0], f"{source}:{lineno}")
        targets.append(Target(cols[0], cols[1] if len(cols) == 2 else None))
    return targets


def load_targets(source: str) -> List[Target]:
    """A single URL, or the path of a targets file."""
    if "://" in source:
        _check_url(source, "target")
        return [Target(source)]
    try:
        text = Path(source).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise TargetsError(f"cannot read targets file {source}: {exc}") from exc
    targets = parse_targets(text, source)
    if not targets:
        raise TargetsError(f"{source}: no targets")
    return targets


def is_loopback(url: str) -> bool:
    host = urlsplit(url).hostname or ""
    if host == "localhost" or host.endswith(".localhost"):
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def check_authorization(targets: Iterable[Target], authorized: bool) -> None:
    outside = [t.url for t in targets if not is_loopback(t.url)]
    if outside and not authorized:
        raise AuthorizationRequired(
            f"{len(outside)} non-loopback target(s), e.g. {outside[0]}; "
            "pass --i-am-authorized only for systems you are permitted to test"
        )


# -- metrics -----------------------------------------------------------------


@dataclass
class Metrics:
    n_success: int
    n_fail: int
    n_error: int
    n_effect: Optional[int] = None
    n_wrong: Optional[int] = None

    @property
    def p_correct(self) -> Optional[Fraction]:
        if self.n_effect is None or self.n_success == 0:
            return None
        return Fraction(self.n_effect, self.n_success)

    @property
    def p_recognize(self) -> Optional[Fraction]:
        if self.n_effect is None:
            return None
        judged = self.n_success + self.n_fail
        return Fraction(self.n_effect, judged) if judged else Fraction(0)

    def to_dict(self) -> dict:
        def frac(f: Optional[Fraction]) -> Optional[dict]:
            if f is None:
                return None
            return {"ratio": f"{f.numerator}/{f.denominator}", "percent": round(float(f) * 100, 4)}

        return {
            "n_success": self.n_success,
            "n_fail": self.n_fail,
            "n_error": self.n_error,
            "n_effect": self.n_effect,
            "n_wrong": self.n_wrong,
            "p_correct": frac(self.p_correct),
            "p_recognize": frac(self.p_recognize),
        }


def metrics_from_counts(n_effect: int, n_success: int, n_fail: int, n_error: int = 0) -> Metrics:
    if not 0 <= n_effect <= n_success:
        raise ValueError("n_effect must lie between 0 and n_success")
    return Metrics(n_success=n_success, n_fail=n_fail, n_error=n_error, n_effect=n_effect, n_wrong=n_success - n_effect)


def _summary(result: Union[BlastResult, Mapping]) -> Tuple[str, str, Optional[Tuple[str, str]]]:
    if isinstance(result, BlastResult):
        cred = (result.credential.username, result.credential.password) if result.credential else None
        return result.target, result.outcome.value, cred
    cred = result.get("credential")
    return result["target"], result["outcome"], (cred["username"], cred["password"]) if cred else None


def _matches_truth(outcome: str, cred: Optional[Tuple[str, str]], truth) -> bool:
    if outcome == Outcome.UNIVERSAL_PASSWORD.value:
        return truth == "universal"
    if isinstance(truth, Mapping):
        return cred == (truth.get("username"), truth.get("password"))
    return False


def compute_metrics(
    results: Iterable[Union[BlastResult, Mapping]],
    ground_truth: Optional[Mapping[str, object]] = None,
) -> Metrics:
    """Count outcomes and, given ground truth, score the reported successes.

    ``ground_truth`` maps a target URL to ``{"username", "password"}``, the
    string ``"universal"`` or ``None`` (nothing to find).  Every reported
    success must have an entry.
    """
    counts = Counter()
    effect = wrong = 0
    for result in results:
        target, outcome, cred = _summary(result)
        if outcome in (Outcome.WEAK_PASSWORD.value, Outcome.UNIVERSAL_PASSWORD.value):
            counts["success"] += 1
            if ground_truth is not None:
                if target not in ground_truth:
                    raise ValueError(f"no ground truth for reported success {target}")
                if _matches_truth(outcome, cred, ground_truth[target]):
                    effect += 1
                else:
                    wrong += 1
        elif outcome == Outcome.STRONG_NO_FINDING.value:
            counts["fail"] += 1
        else:
            counts["error"] += 1
    metrics = Metrics(n_success=counts["success"], n_fail=counts["fail"], n_error=counts["error"])
    if ground_truth is not None:
        metrics.n_effect, metrics.n_wrong = effect, wrong
    return metrics


# -- false-alarm estimate ----------------------------------------------------


@dataclass
class EventModel:
    """Occurrence probabilities of events 1..7 and exclusion rates for 1..6."""

    event_probs: Sequence[float]
    exclusion_probs: Sequence[float]

    def __post_init__(self) -> None:
        self.event_probs = tuple(float(p) for p in self.event_probs)
        self.exclusion_probs = tuple(float(q) for q in self.exclusion_probs)
        if len(self.event_probs) != 7 or len(self.exclusion_probs) != 6:
            raise ValueError("need 7 event probabilities and 6 exclusion probabilities")
        for p in self.event_probs + self.exclusion_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range: {p}")


def estimate_false_positive(model: EventModel) -> float:
    """Chance that an interference response is taken for a success."""
    total = 0.0
    for p, q in zip(model.event_probs[:6], model.exclusion_probs):
        total += p * (1.0 - q)
    return total + model.event_probs[6]


def covering_steps(event: int, coverage: Mapping[str, Sequence[int]] = COVERAGE) -> Tuple[str, ...]:
    return tuple(step for step in sorted(coverage) if event in coverage[step])


def union_expressions(coverage: Mapping[str, Sequence[int]] = COVERAGE) -> Dict[int, str]:
    """``{i: "Q(R_i)=Q(X_i∪Y_i)"}`` for every interference event."""
    out = {}
    for event in INTERFERENCE_EVENTS:
        terms = "∪".join(f"{s}{event}" for s in covering_steps(event, coverage))
        out[event] = f"Q(R{event})=Q({terms})"
    return out


def exclusion_from_steps(
    step_rates: Mapping[str, Mapping[int, float]],
    coverage: Mapping[str, Sequence[int]] = COVERAGE,
) -> Tuple[float, ...]:
    """Combine per-step rejection rates into Q(R1..R6), assuming independent steps.

    ``step_rates[step][event]`` is the chance that ``step`` rejects
    ``event``; steps that cannot see an event contribute nothing.
    """
    rates = []
    for event in INTERFERENCE_EVENTS:
        miss = 1.0
        for step in covering_steps(event, coverage):
            miss *= 1.0 - step_rates.get(step, {}).get(event, 0.0)
        rates.append(1.0 - miss)
    return tuple(rates)


# -- batch -------------------------------------------------------------------


@dataclass
class ScanReport:
    results: List[BlastResult]
    metrics: Metrics
    events: Dict[str, int] = field(default_factory=dict)
    outcomes: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, results: Sequence[BlastResult], ground_truth: Optional[Mapping[str, object]] = None) -> "ScanReport":
        events = Counter(e.value for r in results for e in r.events)
        outcomes = Counter(r.outcome.value for r in results)
        return cls(
            results=list(results),
            metrics=compute_metrics(results, ground_truth),
            events=dict(sorted(events.items())),
            outcomes=dict(sorted(outcomes.items())),
        )

    def to_dict(self) -> dict:
        return {
            "targets": len(self.results),
            "outcomes": self.outcomes,
            "events": self.events,
            "metrics": self.metrics.to_dict(),
            "results": [r.to_dict(timings=False) for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def write_attempt_log(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for i, result in enumerate(self.results):
                result.log.write_csv(fh, header=(i == 0))

    def text_summary(self) -> str:
        lines = []
        for r in self.results:
            found = f" {r.credential.username}/{r.credential.password}" if r.credential else ""
            note = f" ({r.note})" if r.note else ""
            lines.append(f"{r.outcome.value:<18} {r.target}{found}{note}")
        m = self.metrics
        lines.append(f"success={m.n_success} fail={m.n_fail} error={m.n_error}")
        return "\n".join(lines)


def target_seed(seed: Optional[int], url: str) -> Optional[int]:
    if seed is None:
        return None
    return zlib.crc32(f"{seed}|{url}".encode("utf-8"))


def run_batch(
    targets: Sequence[Union[str, Target]],
    config: Optional[BlastConfig] = None,
    rules: Optional[Sequence[CmsRule]] = None,
    concurrency: int = DEFAULT_CONCURRENCY,
    authorized: bool = False,
    ground_truth: Optional[Mapping[str, object]] = None,
) -> ScanReport:
    """Blast every target with bounded concurrency.

    Targets run in waves of ``concurrency``; usernames found in earlier
    waves become hints for later ones, so the report does not depend on
    thread scheduling.
    """
    items = [t if isinstance(t, Target) else Target(t) for t in targets]
    if not items:
        raise TargetsError("at least one target is required")
    if concurrency < 1:
        raise ValueError("concurrency must be positive")
    check_authorization(items, authorized)
    config = config or BlastConfig()
    results: List[BlastResult] = []
    history: List[str] = []

    def one(target: Target, hist: Tuple[str, ...]) -> BlastResult:
        session = replace(config.session, seed=target_seed(config.session.seed, target.url))
        cfg = replace(config, session=session, site_host=target.site_host or config.site_host)
        logger.info("blasting %s", target.url)
        return blast(target.url, rules, cfg, history=hist)

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        for start in range(0, len(items), concurrency):
            wave = items[start:start + concurrency]
            snapshot = tuple(history)
            for result in pool.map(lambda t: one(t, snapshot), wave):
                results.append(result)
                if result.credential is not None and result.outcome is Outcome.WEAK_PASSWORD:
                    if result.credential.username not in history:
                        history.append(result.credential.username)
    return ScanReport.build(results, ground_truth)
