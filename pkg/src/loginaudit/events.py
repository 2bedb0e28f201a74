"""Response-event discrimination, failure causes and hint harvesting."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union
from urllib.parse import urlsplit

from bs4 import BeautifulSoup

from .dictgen.dictionaries import meaningful_labels
from .http_session import ResponsePage
from .page_analyzer import FormDescriptor, form_keys_present

JUDGE_CATEGORIES = ("username_error", "password_error", "max_attempts", "firewall")
ERROR_CATEGORIES = ("username_error", "password_error")


class BlastEvent(enum.Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"
    E5 = "E5"
    E6 = "E6"
    E7 = "E7"
    E8 = "E8"
    E9 = "E9"
    OTHER = "E7"  # alias: the taxonomy's catch-all is event 7

    @property
    def interference(self) -> bool:
        return self not in (BlastEvent.E8, BlastEvent.E9)


class AttemptKind(enum.Enum):
    """What was submitted, as far as the sender knows.

    WRONG is a password generated to be wrong (stability probes, recheck
    e1, timing probes); GUESS is a dictionary password of unknown
    correctness; UNIVERSAL is an injection payload.
    """

    WRONG = "wrong"
    GUESS = "guess"
    UNIVERSAL = "universal"


class Cause(enum.Enum):
    USERNAME_NONEXISTENT = "UsernameNonexistent"
    PASSWORD_ERROR = "PasswordError"
    MAX_ATTEMPTS = "MaxAttemptsExceeded"
    FIREWALL = "FirewallBlocked"
    OTHER = "Other"


@dataclass
class Blacklist:
    """Keyword lists by category; matching is case-insensitive substring."""

    categories: Dict[str, List[str]]

    @classmethod
    def default(cls) -> "Blacklist":
        text = resources.files("loginaudit.data").joinpath("blacklist.json").read_text(encoding="utf-8")
        return cls(json.loads(text))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Blacklist":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def extended(self, extra: Dict[str, Iterable[str]]) -> "Blacklist":
        merged = {k: list(v) for k, v in self.categories.items()}
        for cat, words in extra.items():
            merged.setdefault(cat, []).extend(w for w in words if w not in merged[cat])
        return Blacklist(merged)

    def without(self, *categories: str) -> "Blacklist":
        return Blacklist({k: list(v) for k, v in self.categories.items() if k not in categories})

    def match(self, text: str, categories: Sequence[str] = JUDGE_CATEGORIES) -> Optional[Tuple[str, str]]:
        lowered = text.lower()
        for cat in categories:
            for word in self.categories.get(cat, ()):
                if word.lower() in lowered:
                    return cat, word
        return None


def _same_page(url: str, form: FormDescriptor) -> bool:
    def norm(u: str) -> Tuple[str, str, str]:
        parts = urlsplit(u)
        return parts.scheme.lower(), parts.netloc.lower(), parts.path or "/"

    target = norm(url)
    return any(target == norm(u) for u in (form.page_url, form.action_url) if u)


def classify_event(
    kind: AttemptKind,
    page: ResponsePage,
    baseline,
    form: FormDescriptor,
    blacklist: Blacklist,
    length_mode: str = "body",
) -> BlastEvent:
    original = _same_page(page.final_url, form)
    text = page.decoded_text
    if blacklist.match(text, ("firewall",)):
        return BlastEvent.E6 if kind is AttemptKind.UNIVERSAL and not original else BlastEvent.E7
    if blacklist.match(text, ("max_attempts",)):
        return BlastEvent.E3 if original else BlastEvent.E5
    if blacklist.match(text, ERROR_CATEGORIES):
        return BlastEvent.E2 if original else BlastEvent.E4
    keys, _ = form_keys_present(page, form)
    if original:
        at_error_length = (
            baseline is not None and baseline.stable
            and page.length(length_mode) == baseline.error_length
        )
        return BlastEvent.E1 if keys or at_error_length else BlastEvent.E7
    if keys or kind is AttemptKind.WRONG:
        return BlastEvent.E7
    if blacklist.match(text, ("success_prompt",)):
        return BlastEvent.E8
    return BlastEvent.E9


# -- hints ----------------------------------------------------------------

STOPWORDS = frozenset("""
a an the of and or to for in on at by with from is are was were be been not no does do did
this that these those it its your you we our please again here there click browser
login logon log sign signin signon admin administrator administration panel page system
management manager manage console dashboard backend background control center centre
user username users name password passwd pass pwd account email error errors wrong
incorrect invalid failed failure fail exist exists exceeded exceed maximum number times
too many attempts attempt later try locked blocked firewall request security success
successful successfully welcome home index main default site web website portal platform
cms info information message notice tip tips prompt corp corporation inc ltd llc co
company group limited www com net org cn edu gov http https html php asp jsp true false
copyright all rights reserved powered version
""".split())

_TOKEN = re.compile(r"[A-Za-z][A-Za-z0-9]{2,}")
_CAPITALIZED = re.compile(r"\b[A-Z][A-Za-z0-9]{2,}\b")
_QUOTED = re.compile(r"[\"“'‘]([A-Za-z][A-Za-z0-9 ]{1,30}?)[\"”'’]")
_ORG = re.compile(
    r"\b((?:[A-Z][A-Za-z0-9]+\s+){1,3})(?:Corp(?:oration)?|Inc|Ltd|LLC|Co|Company|Group|University|Institute|Bank|Limited)\b"
)


def _words(text: str) -> List[str]:
    return [t.lower() for t in _TOKEN.findall(text) if t.lower() not in STOPWORDS]


def _visible_text(page: Union[ResponsePage, str]) -> Tuple[str, str]:
    html = page if isinstance(page, str) else page.decoded_text
    soup = BeautifulSoup(html, "html.parser")
    for tag in soup(["script", "style"]):
        tag.decompose()
    title = soup.title.get_text(" ") if soup.title else ""
    return title, soup.get_text(" ")


def scrape_hints(text: str) -> List[str]:
    """Capitalized tokens, organization names and quoted names in ``text``."""
    found: List[str] = []
    for m in _ORG.finditer(text):
        found.extend(_words(m.group(1)))
    for m in _QUOTED.finditer(text):
        found.extend(_words(m.group(1)))
    for m in _CAPITALIZED.finditer(text):
        found.extend(_words(m.group(0)))
    return list(dict.fromkeys(found))


@dataclass
class FailureCause:
    cause: Cause
    hints: List[str] = field(default_factory=list)
    keyword: Optional[str] = None


_CAUSE_ORDER = (
    ("firewall", Cause.FIREWALL),
    ("max_attempts", Cause.MAX_ATTEMPTS),
    ("username_error", Cause.USERNAME_NONEXISTENT),
    ("password_error", Cause.PASSWORD_ERROR),
)


def failure_cause(page: Union[ResponsePage, str], blacklist: Blacklist) -> FailureCause:
    raw = page if isinstance(page, str) else page.decoded_text
    _, text = _visible_text(raw)
    hints = scrape_hints(text)
    for category, cause in _CAUSE_ORDER:
        hit = blacklist.match(raw, (category,))
        if hit:
            return FailureCause(cause, hints, hit[1])
    return FailureCause(Cause.OTHER, hints)


SOURCES = ("login-page", "failure-page", "success-history")


@dataclass
class HintSet:
    entries: List[Tuple[str, str]] = field(default_factory=list)

    def add(self, keyword: str, source: str) -> None:
        if source not in SOURCES:
            raise ValueError(f"unknown hint source {source!r}")
        keyword = keyword.strip().lower()
        if keyword and keyword not in self.keywords:
            self.entries.append((keyword, source))

    @property
    def keywords(self) -> List[str]:
        return [k for k, _ in self.entries]

    def source_of(self, keyword: str) -> Optional[str]:
        return next((s for k, s in self.entries if k == keyword), None)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keywords)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, keyword: object) -> bool:
        return keyword in self.keywords


def collect_hints(
    login_page: Optional[ResponsePage],
    failures: Iterable[FailureCause] = (),
    history: Iterable[str] = (),
) -> HintSet:
    hints = HintSet()
    if login_page is not None:
        host = urlsplit(login_page.final_url).hostname or ""
        for label in meaningful_labels(host):
            hints.add(label, "login-page")
        title, text = _visible_text(login_page)
        for word in _words(title):
            hints.add(word, "login-page")
        for m in _ORG.finditer(text):
            for word in _words(m.group(1)):
                hints.add(word, "login-page")
    for failure in failures:
        for word in failure.hints:
            hints.add(word, "failure-page")
    for username in history:
        hints.add(username, "success-history")
    return hints
