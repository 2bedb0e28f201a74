"""Per-target blasting engine.

One call to :func:`blast` drives a single login endpoint through page
analysis, preprocessing, dictionary submission, the four-step judgment and
recheck.  Everything submitted is written to an :class:`AttemptLog`.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import random
import string
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

from .dictgen.adjust import DEFAULT_HINT_BOOST, adjust_dictionary
from .dictgen.dictionaries import (
    BASE_DICTIONARY,
    DEFAULT_SUFFIXES,
    CmsRule,
    Credential,
    Origin,
    dynamic_dict,
    general_dict,
    match_rule,
    universal_dict,
)
from .dictgen.pcfg import PcfgGrammar
from .events import (
    JUDGE_CATEGORIES,
    AttemptKind,
    Blacklist,
    BlastEvent,
    Cause,
    FailureCause,
    classify_event,
    collect_hints,
    failure_cause,
)
from .http_session import HttpSession, ResponsePage, SessionConfig, TargetUnreachable, TransportError
from .page_analyzer import (
    AnalysisFailed,
    FormDescriptor,
    LoginPageVerdict,
    extract_form,
    form_keys_present,
    identify_login_page,
)
from .prober import DEFAULT_MARGIN, DEFAULT_PASSWORD_LENGTH, DEFAULT_ROUNDS, ProbeAborted, ProbeReport, probe_usernames

logger = logging.getLogger(__name__)

WRONG_PASSWORD_LENGTH = 16


class Outcome(enum.Enum):
    WEAK_PASSWORD = "WeakPassword"
    UNIVERSAL_PASSWORD = "UniversalPassword"
    STRONG_NO_FINDING = "StrongNoFinding"
    UNSTABLE = "Unstable"
    CAPTCHA = "Captcha"
    ANALYSIS_FAILED = "AnalysisFailed"
    UNREACHABLE = "Unreachable"

    @property
    def success(self) -> bool:
        return self in (Outcome.WEAK_PASSWORD, Outcome.UNIVERSAL_PASSWORD)


class Verdict(enum.Enum):
    REJECTED_STEP1 = "RejectedStep1"
    REJECTED_STEP2 = "RejectedStep2"
    REJECTED_STEP3 = "RejectedStep3"
    CANDIDATE = "Candidate"


@dataclass
class Baseline:
    stable: bool
    error_length: Optional[int]
    established_at: int = 0
    lengths: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.stable and self.error_length is None:
            raise ValueError("a stable baseline needs an error length")
        if not self.stable and self.error_length is not None:
            raise ValueError("error length is only defined for stable pages")


@dataclass
class StepOutcome:
    verdict: Verdict
    matched_keyword: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.verdict is Verdict.REJECTED_STEP1) != (self.matched_keyword is not None):
            raise ValueError("matched_keyword is set exactly for step-1 rejections")


# -- attempt log ----------------------------------------------------------

CSV_COLUMNS = ("timestamp", "target", "username", "password", "event", "body_length", "phase", "status", "elapsed_ms")
PHASES = (
    "prerequest", "preprocess", "attempt", "universal",
    "recheck_prerequest", "recheck_wrong", "recheck_candidate", "probe",
)
SUBMIT_PHASES = frozenset(PHASES) - {"prerequest", "recheck_prerequest"}


@dataclass
class AttemptRecord:
    timestamp: float
    target: str
    username: str
    password: str
    event: str
    body_length: int
    phase: str
    status: int
    elapsed_ms: float

    def row(self) -> List[str]:
        return [
            f"{self.timestamp:.6f}", self.target, self.username, self.password, self.event,
            str(self.body_length), self.phase, str(self.status), f"{self.elapsed_ms:.3f}",
        ]


@dataclass
class AttemptLog:
    """Every request made for one target, in order.

    Pre-requests are logged with an empty event; every other row is a
    submission with its classified event.
    """

    records: List[AttemptRecord] = field(default_factory=list)

    def append(self, record: AttemptRecord) -> None:
        self.records.append(record)

    def __iter__(self) -> Iterator[AttemptRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def submissions(self) -> List[AttemptRecord]:
        return [r for r in self.records if r.phase in SUBMIT_PHASES]

    def phase(self, *phases: str) -> List[AttemptRecord]:
        return [r for r in self.records if r.phase in phases]

    def write_csv(self, out: Union[str, Path, TextIO], header: bool = True) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="", encoding="utf-8") as fh:
                self.write_csv(fh, header)
            return
        writer = csv.writer(out)
        if header:
            writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(r.row())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


# -- configuration and result -----------------------------------------------


@dataclass
class BlastConfig:
    """Knobs for one :func:`blast` run.

    ``site_host`` replaces the target's host when deriving the dynamic
    dictionary, useful when the endpoint is reached by IP.  ``grammar``
    enables the PCFG stream after the fixed dictionaries; ``pcfg_budget``
    caps its length per username.
    """

    session: SessionConfig = field(default_factory=SessionConfig)
    usernames: Sequence[str] = ("admin",)
    base_dictionary: Sequence[str] = BASE_DICTIONARY
    dynamic_suffixes: Sequence[str] = DEFAULT_SUFFIXES
    site_host: Optional[str] = None
    grammar: Optional[PcfgGrammar] = None
    pcfg_budget: int = 200
    hint_boost: float = DEFAULT_HINT_BOOST
    universal: bool = True
    blacklist: Optional[Blacklist] = None
    recheck: bool = True
    length_tolerance: int = 0
    probe_candidates: Sequence[str] = ()
    probe_rounds: int = DEFAULT_ROUNDS
    probe_password_length: int = DEFAULT_PASSWORD_LENGTH
    probe_margin: float = DEFAULT_MARGIN

    def __post_init__(self) -> None:
        self.usernames = list(self.usernames)
        if not self.usernames:
            raise ValueError("at least one username is required")
        if self.length_tolerance < 0:
            raise ValueError("length_tolerance must be non-negative")
        if self.pcfg_budget < 0:
            raise ValueError("pcfg_budget must be non-negative")
        if self.blacklist is None:
            self.blacklist = Blacklist.default()


@dataclass
class BlastResult:
    target: str
    outcome: Outcome
    credential: Optional[Credential] = None
    attempts: int = 0
    events: List[BlastEvent] = field(default_factory=list)
    found_at: Optional[int] = None
    log: AttemptLog = field(default_factory=AttemptLog)
    probe: Optional[ProbeReport] = None
    note: str = ""
    rule: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.credential is not None) != self.outcome.success:
            raise ValueError(f"credential must be set exactly for success outcomes, got {self.outcome.value}")

    def to_dict(self, timings: bool = True) -> dict:
        """Plain-data view; ``timings=False`` drops measured latencies."""
        cred = None
        if self.credential is not None:
            cred = {
                "username": self.credential.username,
                "password": self.credential.password,
                "origin": self.credential.origin.value,
            }
        return {
            "target": self.target,
            "outcome": self.outcome.value,
            "credential": cred,
            "attempts": self.attempts,
            "found_at": self.found_at,
            "events": [e.value for e in self.events],
            "rule": self.rule,
            "note": self.note,
            "probe": self._probe_dict(timings),
        }

    def _probe_dict(self, timings: bool) -> Optional[dict]:
        if self.probe is None:
            return None
        if timings:
            return self.probe.to_dict()
        return {"confirmed": self.probe.confirmed, "leader": self.probe.leader}


# -- the four steps ---------------------------------------------------------

Recorder = Callable[[str, str, str, AttemptKind, ResponsePage], None]


def wrong_password(rng: random.Random) -> str:
    alphabet = string.ascii_letters + string.digits
    return "".join(rng.choice(alphabet) for _ in range(WRONG_PASSWORD_LENGTH))


def preprocess(
    session: HttpSession,
    form: FormDescriptor,
    username: str = "admin",
    length_mode: str = "body",
    rng: Optional[random.Random] = None,
    record: Optional[Recorder] = None,
) -> Baseline:
    """Submit two distinct wrong passwords and compare the response lengths.

    Call after the pre-request.  Transport errors propagate.
    """
    rng = rng or session.rng
    first = wrong_password(rng)
    second = wrong_password(rng)
    while second == first:
        second = wrong_password(rng)
    pages = [(pw, session.submit(form, form.payload(username, pw))) for pw in (first, second)]
    lengths = tuple(p.length(length_mode) for _, p in pages)
    if lengths[0] == lengths[1]:
        baseline = Baseline(True, lengths[0], established_at=0, lengths=lengths)
    else:
        baseline = Baseline(False, None, established_at=0, lengths=lengths)
    if record is not None:
        for pw, page in pages:
            record("preprocess", username, pw, AttemptKind.WRONG, page)
    return baseline


def judge(
    page: ResponsePage,
    baseline: Baseline,
    form: FormDescriptor,
    blacklist: Blacklist,
    length_mode: str = "body",
    tolerance: int = 0,
) -> StepOutcome:
    """Steps 1 to 3: blacklist keywords, surviving login keys, error length."""
    if not baseline.stable:
        raise ValueError("judge needs a stable baseline")
    hit = blacklist.match(page.decoded_text, JUDGE_CATEGORIES)
    if hit:
        return StepOutcome(Verdict.REJECTED_STEP1, hit[1])
    present, route = form_keys_present(page, form)
    if present:
        logger.debug("step 2 rejection via %s match", route)
        return StepOutcome(Verdict.REJECTED_STEP2)
    if abs(page.length(length_mode) - baseline.error_length) <= tolerance:
        return StepOutcome(Verdict.REJECTED_STEP3)
    return StepOutcome(Verdict.CANDIDATE)


def recheck(
    session: HttpSession,
    form: FormDescriptor,
    candidate: Credential,
    login_url: Optional[str] = None,
    wrong_username: Optional[str] = None,
    length_mode: str = "body",
    rng: Optional[random.Random] = None,
    record: Optional[Recorder] = None,
) -> bool:
    """Step 4: pre-request, one fresh wrong password, then the candidate again.

    The candidate is confirmed when the two lengths differ.  Lockout and
    block pages answer both submissions identically and are rejected here.
    """
    rng = rng or session.rng
    url = login_url or form.page_url or form.action_url
    page = session.pre_request(url)
    if record is not None:
        record("recheck_prerequest", "", "", AttemptKind.WRONG, page)
    user = candidate.username if wrong_username is None else wrong_username
    e1 = wrong_password(rng)
    wrong = session.submit(form, form.payload(user, e1))
    if record is not None:
        record("recheck_wrong", user, e1, AttemptKind.WRONG, wrong)
    again = session.submit(form, form.payload(candidate.username, candidate.password))
    if record is not None:
        kind = AttemptKind.UNIVERSAL if candidate.origin is Origin.UNIVERSAL else AttemptKind.GUESS
        record("recheck_candidate", candidate.username, candidate.password, kind, again)
    return wrong.length(length_mode) != again.length(length_mode)


# -- orchestration ----------------------------------------------------------


class _Abort(Exception):
    def __init__(self, outcome: Outcome, note: str = ""):
        super().__init__(note)
        self.outcome = outcome
        self.note = note


class _Run:
    """State of one blast: session, form, baseline, log and counters."""

    def __init__(self, target: str, config: BlastConfig, rule: Optional[CmsRule], session: HttpSession):
        self.target = target
        self.config = config
        self.rule = rule
        self.session = session
        self.form: Optional[FormDescriptor] = None
        self.baseline: Optional[Baseline] = None
        self.log = AttemptLog()
        self.events: List[BlastEvent] = []
        self.attempts = 0
        self.index = 0
        self.submitted: set = set()
        self.failures: List[FailureCause] = []
        self._cause_cache: Dict[bytes, FailureCause] = {}
        self.probe: Optional[ProbeReport] = None

    @property
    def length_mode(self) -> str:
        return self.config.session.length_mode

    def record(self, phase: str, username: str, password: str, kind: AttemptKind, page: ResponsePage) -> None:
        event = ""
        if phase in SUBMIT_PHASES:
            ev = classify_event(kind, page, self.baseline, self.form, self.config.blacklist, self.length_mode)
            self.events.append(ev)
            event = ev.value
            if phase not in ("preprocess", "probe"):
                self.attempts += 1
        if phase == "probe":
            password = f"<long:{len(password)}>"
        self.log.append(AttemptRecord(
            timestamp=time.time(), target=self.target, username=username, password=password,
            event=event, body_length=page.length(self.length_mode), phase=phase,
            status=page.status, elapsed_ms=page.elapsed,
        ))

    def note_failure(self, page: ResponsePage) -> None:
        cause = self._cause_cache.get(page.body)
        if cause is None:
            cause = failure_cause(page, self.config.blacklist)
            self._cause_cache[page.body] = cause
        self.failures.append(cause)

    def dominant_cause(self) -> Optional[FailureCause]:
        counted = [f for f in self.failures if f.cause is not Cause.OTHER]
        if not counted:
            return self.failures[-1] if self.failures else None
        order = [Cause.FIREWALL, Cause.MAX_ATTEMPTS, Cause.USERNAME_NONEXISTENT, Cause.PASSWORD_ERROR]
        tally = Counter(f.cause for f in counted)
        best = max(tally, key=lambda c: (tally[c], -order.index(c)))
        return next(f for f in reversed(counted) if f.cause is best)

    def try_credential(self, cred: Credential) -> bool:
        """Submit one credential and run it through steps 1 to 4."""
        self.index += 1
        self.submitted.add((cred.username, cred.password))
        kind = AttemptKind.UNIVERSAL if cred.origin is Origin.UNIVERSAL else AttemptKind.GUESS
        phase = "universal" if kind is AttemptKind.UNIVERSAL else "attempt"
        page = self.session.submit(self.form, self.form.payload(cred.username, cred.password))
        self.record(phase, cred.username, cred.password, kind, page)
        rule = self.rule
        if rule is not None and rule.fail_flag and rule.fail_flag in page.decoded_text:
            raise _Abort(Outcome.STRONG_NO_FINDING, f"rule {rule.name}: fail flag {rule.fail_flag!r} seen")
        if rule is not None and rule.success_flag and rule.success_flag in page.decoded_text:
            logger.info("%s: rule %s success flag confirms %s", self.target, rule.name, cred.username)
            return True
        step = judge(page, self.baseline, self.form, self.config.blacklist, self.length_mode, self.config.length_tolerance)
        if step.verdict is not Verdict.CANDIDATE:
            if step.verdict is Verdict.REJECTED_STEP1:
                self.note_failure(page)
            return False
        if not self.config.recheck:
            return True
        wrong_user = self.config.usernames[0] if kind is AttemptKind.UNIVERSAL else cred.username
        confirmed = recheck(
            self.session, self.form, cred, login_url=self.target, wrong_username=wrong_user,
            length_mode=self.length_mode, record=self.record,
        )
        if not confirmed:
            logger.info("%s: recheck rejected %s/%s", self.target, cred.username, cred.password)
        return confirmed

    def fixed_dictionary(self) -> Iterator[Credential]:
        host = self.config.site_host or self.target
        extra = dynamic_dict(host, self.config.dynamic_suffixes)
        for username in self.config.usernames:
            yield from general_dict(username, self.config.base_dictionary)
            for pw in extra:
                yield Credential(username, pw, Origin.DYNAMIC)

    def pcfg_dictionary(self, login_page: ResponsePage, history: Sequence[str]) -> Iterator[Credential]:
        grammar = self.config.grammar
        if grammar is None or self.config.pcfg_budget == 0:
            return
        hints = collect_hints(login_page, self.failures, history)
        cause = self.dominant_cause()
        passwords = {p for _, p in self.submitted}
        stream = adjust_dictionary(grammar, hints, history=(), failure_cause=cause, boost=self.config.hint_boost)
        usernames = list(self.config.usernames)
        if stream.needs_username_probe:
            leader = self.run_probe(list(history) + [h for h in hints.keywords if h not in history])
            if leader is not None:
                usernames = [leader]
            stream.resume()
        hinted = set(hints.keywords)
        guesses = stream.take(self.config.pcfg_budget + len(passwords))
        for username in usernames:
            sent = 0
            for pw, _ in guesses:
                if sent >= self.config.pcfg_budget:
                    break
                if (username, pw) in self.submitted:
                    continue
                sent += 1
                origin = Origin.HINT if any(h in pw for h in hinted) else Origin.PCFG
                yield Credential(username, pw, origin)

    def run_probe(self, extra_candidates: Sequence[str]) -> Optional[str]:
        candidates = list(dict.fromkeys(
            list(self.config.probe_candidates) + list(self.config.usernames) + list(extra_candidates)
        ))
        if len(candidates) < 2:
            logger.info("%s: username probe needs two candidates, skipped", self.target)
            return None

        def on_submit(user: str, password: str, page: ResponsePage) -> None:
            self.record("probe", user, password, AttemptKind.WRONG, page)

        try:
            self.probe = probe_usernames(
                self.session, self.form, candidates, rounds=self.config.probe_rounds,
                long_password_length=self.config.probe_password_length,
                margin=self.config.probe_margin, seed=self.session.rng.randrange(2**32),
                on_submit=on_submit,
            )
        except ProbeAborted as exc:
            logger.warning("%s: username probe aborted: %s", self.target, exc)
            return None
        return self.probe.leader if self.probe.confirmed else None

    def result(self, outcome: Outcome, credential: Optional[Credential] = None, note: str = "") -> BlastResult:
        return BlastResult(
            target=self.target, outcome=outcome, credential=credential,
            attempts=self.attempts, events=list(self.events),
            found_at=self.index if credential is not None else None,
            log=self.log, probe=self.probe, note=note,
            rule=self.rule.name if self.rule else None,
        )


def blast(
    target: str,
    rules: Optional[Sequence[CmsRule]] = None,
    config: Optional[BlastConfig] = None,
    history: Sequence[str] = (),
) -> BlastResult:
    """Run the whole workflow against one login URL.

    Args:
        target: absolute URL of the login page.
        rules: custom CMS rules; the first whose keywords appear on the
            login page applies.
        config: engine settings, defaults when omitted.
        history: usernames found on other targets of the same batch, used
            as hints.

    Returns:
        A :class:`BlastResult`; every failure mode maps to an outcome rather
        than an exception.
    """
    config = config or BlastConfig()
    with HttpSession(config.session) as session:
        run = _Run(target, config, None, session)
        try:
            return _blast(run, rules or (), history)
        except _Abort as exc:
            return run.result(exc.outcome, note=exc.note)
        except TargetUnreachable as exc:
            return run.result(Outcome.UNREACHABLE, note=str(exc))
        except TransportError as exc:
            return run.result(Outcome.UNREACHABLE, note=f"{type(exc).__name__}: {exc}")


def _blast(run: _Run, rules: Sequence[CmsRule], history: Sequence[str]) -> BlastResult:
    config, session, target = run.config, run.session, run.target
    login_page = session.pre_request(target)
    run.record("prerequest", "", "", AttemptKind.WRONG, login_page)

    run.rule = match_rule(rules, login_page.decoded_text) if rules else None
    if run.rule is not None:
        logger.info("%s: matched rule %s", target, run.rule.name)
        if run.rule.alert:
            logger.warning("%s: rule %s: %s", target, run.rule.name, run.rule.note)
        if run.rule.captcha:
            return run.result(Outcome.CAPTCHA, note=f"rule {run.rule.name} marks a captcha")
        if run.rule.fail_flag and run.rule.fail_flag in login_page.decoded_text:
            return run.result(Outcome.STRONG_NO_FINDING, note=f"rule {run.rule.name}: fail flag on login page")

    verdict = identify_login_page(login_page)
    if verdict is LoginPageVerdict.CAPTCHA:
        return run.result(Outcome.CAPTCHA)
    if verdict is LoginPageVerdict.NOT_LOGIN:
        return run.result(Outcome.ANALYSIS_FAILED, note="no login form found")
    try:
        run.form = extract_form(login_page, login_page.final_url)
    except AnalysisFailed as exc:
        return run.result(Outcome.ANALYSIS_FAILED, note=str(exc))

    run.baseline = preprocess(session, run.form, username=config.usernames[0], length_mode=run.length_mode, record=run.record)
    if not run.baseline.stable:
        a, b = run.baseline.lengths
        return run.result(Outcome.UNSTABLE, note=f"wrong-password lengths differ: {a} vs {b}")
    run.baseline.established_at = run.attempts

    for cred in run.fixed_dictionary():
        if run.try_credential(cred):
            return run.result(Outcome.WEAK_PASSWORD, cred)
    for cred in run.pcfg_dictionary(login_page, history):
        if run.try_credential(cred):
            return run.result(Outcome.WEAK_PASSWORD, cred)

    if config.universal:
        run.index = 0
        for cred in universal_dict(run.rule):
            if run.try_credential(cred):
                return run.result(Outcome.UNIVERSAL_PASSWORD, cred)
    return run.result(Outcome.STRONG_NO_FINDING)
