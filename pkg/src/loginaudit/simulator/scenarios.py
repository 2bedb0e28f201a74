"""Scenario definitions for the local login-target simulator.

A scenario fixes how one fake login endpoint reacts to wrong, correct and
injection input.  Every page the simulator can serve is rendered here so
lengths can be checked before anything is spawned.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

STRONG_PASSWORD = "eaa4a6d7a3ed765985758796f13bd26a"

WRONG_EVENTS = ("E1", "E2", "E4", "E7")
LOCKOUT_EVENTS = ("E3", "E5")
SUCCESS_EVENTS = ("E8", "E9")

REDIRECTS = {"E4": "/error", "E5": "/locked", "E6": "/blocked", "E7": "/signin", "E8": "/welcome", "E9": "/admin"}

DEFAULT_MESSAGES = {
    "error": "Invalid password, please try again.",
    "lockout": "Too many failed login attempts. Please try again later.",
    "firewall": "Your request has been blocked by the web application firewall.",
    "success": "Login successful, redirecting to the dashboard.",
    "first_visit": "New visitor session started.",
}

_TAUTOLOGY = re.compile(r"'\s*\)?\s*or\s*\(?\s*'?\w*'?\s*=", re.I)


def is_tautology(value: str) -> bool:
    return bool(_TAUTOLOGY.search(value or ""))


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    description: str = ""
    title: str = "Admin Login"
    charset: str = "utf-8"
    user_field: str = "username"
    pass_field: str = "password"
    hidden_fields: Dict[str, str] = field(default_factory=dict)
    form_action: str = "login"
    valid_credential: Optional[Tuple[str, str]] = None
    wrong_event: str = "E2"
    success_event: str = "E9"
    lockout_threshold: Optional[int] = None
    lockout_event: str = "E5"
    sqli_vulnerable: bool = False
    firewall_on_injection: bool = False
    hash_delay_per_char: Optional[float] = None  # milliseconds
    timing_users: List[str] = field(default_factory=list)
    base_latency_ms: float = 0.0
    jitter_ms: float = 0.0
    unstable: bool = False
    cookie_on_first: bool = False
    captcha: bool = False
    page_lengths: Dict[str, int] = field(default_factory=dict)
    messages: Dict[str, str] = field(default_factory=dict)
    site_host: Optional[str] = None
    allow_equal_lengths: bool = False
    # ground truth under the default engine configuration
    expected_outcome: str = "StrongNoFinding"
    expected_events: List[str] = field(default_factory=list)
    expected_credential: Optional[Tuple[str, str]] = None
    expected_found_at: Optional[int] = None
    expected_prober_leader: Optional[str] = None

    def __post_init__(self) -> None:
        if self.valid_credential is not None:
            self.valid_credential = tuple(self.valid_credential)
        if self.expected_credential is not None:
            self.expected_credential = tuple(self.expected_credential)
        if self.wrong_event not in WRONG_EVENTS:
            raise ScenarioError(f"{self.name}: wrong_event must be one of {WRONG_EVENTS}")
        if self.success_event not in SUCCESS_EVENTS:
            raise ScenarioError(f"{self.name}: success_event must be one of {SUCCESS_EVENTS}")
        if self.lockout_event not in LOCKOUT_EVENTS:
            raise ScenarioError(f"{self.name}: lockout_event must be one of {LOCKOUT_EVENTS}")
        if self.lockout_threshold is not None and self.lockout_threshold < 1:
            raise ScenarioError(f"{self.name}: lockout_threshold must be positive")

    # -- state model ---------------------------------------------------
    @property
    def stateful(self) -> bool:
        return self.cookie_on_first or self.lockout_threshold is not None

    @property
    def existing_users(self) -> List[str]:
        users = list(self.timing_users)
        if self.valid_credential:
            users.insert(0, self.valid_credential[0])
        return list(dict.fromkeys(users))

    def message(self, key: str) -> str:
        return self.messages.get(key, DEFAULT_MESSAGES[key])

    def outcome_for(self, username: str, password: str, failures: int) -> str:
        """Event the scenario produces for one submission."""
        if self.lockout_threshold is not None and failures >= self.lockout_threshold:
            return self.lockout_event
        injection = is_tautology(username) or is_tautology(password)
        if injection and self.firewall_on_injection:
            return "E6"
        if self.valid_credential == (username, password) or (self.sqli_vulnerable and injection):
            return self.success_event
        return self.wrong_event

    # -- rendering -----------------------------------------------------
    def _meta(self) -> str:
        if self.charset.lower() in ("gbk", "gb2312", "gb18030"):
            return '<meta http-equiv="Content-Type" content="text/html; charset=gb2312" />'
        return f'<meta charset="{self.charset}">'

    def _doc(self, title: str, body: str) -> str:
        return f"<html>\n<head>\n{self._meta()}\n<title>{title}</title>\n</head>\n<body>\n{body}\n</body>\n</html>\n"

    def _form(self, heading: str, message: str = "") -> str:
        hidden = "".join(
            f'<input type="hidden" name="{k}" value="{v}">\n' for k, v in self.hidden_fields.items()
        )
        captcha = ""
        if self.captcha:
            captcha = '<input type="text" name="verifycode"><img src="/captcha.php?verifycode=1">\n'
        note = f'<div class="msg">{message}</div>\n' if message else ""
        return (
            f"<h2>{heading}</h2>\n{note}"
            f'<form method="post" action="{self.form_action}">\n'
            f'<label>Username</label> <input type="text" name="{self.user_field}">\n'
            f'<label>Password</label> <input type="password" name="{self.pass_field}">\n'
            f"{hidden}{captcha}"
            '<input type="reset" name="reset" value="Reset">\n'
            '<input type="submit" name="submit" value="Login">\n'
            "</form>"
        )

    def render(self, page: str) -> str:
        """HTML text for ``page``: ``login`` or an event id."""
        if page in ("login", "E1"):
            return self._doc(self.title, self._form(self.title))
        if page == "E2":
            return self._doc(self.title, self._form(self.title, self.message("error")))
        if page == "E3":
            return self._doc(self.title, self._form(self.title, self.message("lockout")))
        if page == "E4":
            return self._doc("Notice", f'<div class="msg">{self.message("error")}</div>\n<a href="login">Back</a>')
        if page == "E5":
            return self._doc("Notice", f'<div class="msg">{self.message("lockout")}</div>')
        if page == "E6":
            return self._doc("403", f'<div class="waf">{self.message("firewall")}</div>')
        if page == "E7":
            return self._doc("Sign on", self._form("Please sign on to continue"))
        if page == "E8":
            return self._doc("Notice", f'<div class="msg">{self.message("success")}</div>\n<a href="admin">Go</a>')
        if page == "E9":
            return self._doc(
                "Dashboard",
                "<h1>Dashboard</h1>\n<ul><li>Articles: 42</li><li>Comments: 7</li></ul>\n<a href=\"logout\">Logout</a>",
            )
        raise KeyError(page)

    def render_bytes(self, page: str) -> bytes:
        html = self.render(page)
        data = html.encode(self._codec())
        target = self.page_lengths.get(page)
        if target is not None:
            data = _pad(data, target, self.name, page)
        return data

    def _codec(self) -> str:
        return "gb18030" if self.charset.lower() in ("gbk", "gb2312", "gb18030") else self.charset

    def encode(self, text: str) -> bytes:
        return text.encode(self._codec())

    def reachable_pages(self) -> List[str]:
        pages = ["login", self.wrong_event]
        if self.lockout_threshold is not None:
            pages.append(self.lockout_event)
        if self.firewall_on_injection:
            pages.append("E6")
        if self.valid_credential or self.sqli_vulnerable:
            pages.append(self.success_event)
        return list(dict.fromkeys(pages))

    def validate(self) -> None:
        """Distinct pages must differ in byte length (EL discrimination)."""
        if self.allow_equal_lengths or self.unstable:
            return
        seen: Dict[int, Tuple[str, bytes]] = {}
        for page in self.reachable_pages():
            body = self.render_bytes(page)
            other = seen.get(len(body))
            if other is not None and other[1] != body:
                raise ScenarioError(f"{self.name}: pages {other[0]} and {page} share length {len(body)}")
            seen[len(body)] = (page, body)

    # -- (de)serialization ----------------------------------------------
    def to_dict(self) -> dict:
        data = asdict(self)
        for key in ("valid_credential", "expected_credential"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        if "name" not in data:
            raise ScenarioError("scenario needs a name")
        return cls(**data)


def _pad(data: bytes, target: int, name: str, page: str) -> bytes:
    marker = b"</body>"
    overhead = len(b"<!--  -->")
    missing = target - len(data)
    if missing == 0:
        return data
    if missing < overhead:
        raise ScenarioError(f"{name}: page {page} is {len(data)} bytes, cannot pad to {target}")
    filler = b"<!-- " + b"x" * (missing - overhead) + b" -->"
    i = data.rfind(marker)
    return data[:i] + filler + data[i:]


def load_scenario(path: Union[str, Path]) -> Scenario:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    scenario = Scenario.from_dict(data)
    scenario.validate()
    return scenario


def _dede_messages() -> Dict[str, str]:
    return {
        "error": "你的密码错误！",
        "success": "成功登录，正在转向管理管理主页！",
        "first_visit": "欢迎首次访问，已为您分配会话。",
    }


def scenario_catalog() -> List[Scenario]:
    """Canonical scenarios with their expected outcomes and event sequences."""
    s = STRONG_PASSWORD
    catalog = [
        Scenario("e1_no_prompt", "wrong input re-renders the login box without a message",
                 valid_credential=("admin", s), wrong_event="E1",
                 expected_events=["E1"]),
        Scenario("e2_error_prompt", "wrong input re-renders the login box with an error",
                 valid_credential=("admin", s), wrong_event="E2",
                 expected_events=["E2"]),
        Scenario("e3_lockout_same_page", "error prompt, then a lockout prompt on the same URL",
                 valid_credential=("admin", s), wrong_event="E2", lockout_threshold=5, lockout_event="E3",
                 expected_events=["E2", "E3"]),
        Scenario("e4_error_redirect", "wrong input redirects to an error page",
                 valid_credential=("admin", s), wrong_event="E4",
                 expected_events=["E4"]),
        Scenario("lockout", "error redirect, then every response is the lockout page",
                 valid_credential=("admin", s), wrong_event="E4", lockout_threshold=5, lockout_event="E5",
                 expected_events=["E4", "E5"]),
        Scenario("e6_firewall", "injection payloads are answered by a firewall block page",
                 valid_credential=("admin", s), wrong_event="E1", firewall_on_injection=True,
                 expected_events=["E1", "E6"]),
        Scenario("e7_relocated_login", "wrong input redirects to a login box at another URL",
                 valid_credential=("admin", s), wrong_event="E7",
                 expected_events=["E7"]),
        Scenario("e8_success_prompt", "correct input redirects to a success prompt",
                 valid_credential=("admin", "admin123"), wrong_event="E2", success_event="E8",
                 expected_outcome="WeakPassword", expected_credential=("admin", "admin123"),
                 expected_found_at=10, expected_events=["E2", "E8"]),
        Scenario("e9_backend", "correct input redirects into the backend",
                 valid_credential=("admin", "123456"), wrong_event="E4", success_event="E9",
                 expected_outcome="WeakPassword", expected_credential=("admin", "123456"),
                 expected_found_at=2, expected_events=["E4", "E9"]),
        Scenario("unstable", "a random-length banner makes wrong responses differ",
                 valid_credential=("admin", s), wrong_event="E2", unstable=True,
                 expected_outcome="Unstable", expected_events=["E2"]),
        Scenario("cookie_counter", "first contact issues a session cookie and a one-off banner",
                 valid_credential=("admin", "password"), wrong_event="E2", cookie_on_first=True,
                 expected_outcome="WeakPassword", expected_credential=("admin", "password"),
                 expected_found_at=8, expected_events=["E2", "E9"]),
        Scenario("sqli_vulnerable", "tautologies in either field open the backend",
                 valid_credential=("admin", s), wrong_event="E2", sqli_vulnerable=True,
                 expected_outcome="UniversalPassword",
                 expected_credential=("admin' or 'a'='a", "admin' or 'a'='a"),
                 expected_found_at=1, expected_events=["E2", "E9"]),
        Scenario("timing", "existing accounts pay a per-character hashing delay",
                 valid_credential=("admin", s), wrong_event="E2",
                 messages={"error": "Username or password is incorrect."},
                 hash_delay_per_char=0.5, base_latency_ms=2.0, jitter_ms=1.0,
                 expected_events=["E2"], expected_prober_leader="admin"),
        Scenario("strong_password", "nothing in any dictionary opens this one",
                 valid_credential=("admin", s), wrong_event="E2",
                 expected_events=["E2"]),
        Scenario("captcha", "login page carries a verification code",
                 valid_credential=("admin", "admin"), captcha=True,
                 expected_outcome="Captcha", expected_events=[]),
    ]
    catalog += [
        dedecms_like(), dedecms_like(strong=True), discuz_like(), discuz_like(strong=True),
    ]
    return catalog


def dedecms_like(strong: bool = False) -> Scenario:
    password = STRONG_PASSWORD if strong else "yzddmr6123"
    return Scenario(
        "dedecms_strong" if strong else "dedecms_like",
        "GBK CMS: cookie on first visit, error and success prompts on new pages",
        title="DedeCMS 管理登录",
        charset="gbk",
        user_field="userid",
        pass_field="pwd",
        hidden_fields={"dopost": "login", "gotopage": ""},
        form_action="login",
        valid_credential=("admin", password),
        wrong_event="E4",
        success_event="E8",
        cookie_on_first=True,
        page_lengths={"E4": 1490, "E8": 1920},
        messages=_dede_messages(),
        site_host="yzddmr6.com",
        expected_outcome="StrongNoFinding" if strong else "WeakPassword",
        expected_credential=None if strong else ("admin", password),
        expected_found_at=None if strong else 30,
        expected_events=["E4"] if strong else ["E4", "E8"],
    )


def discuz_like(strong: bool = False) -> Scenario:
    password = STRONG_PASSWORD if strong else "admin888"
    return Scenario(
        "discuz_strong" if strong else "discuz_like",
        "forum admin: silent re-render on failure, redirect into the backend on success",
        title="Discuz! Administrator's Control Panel",
        user_field="admin_username",
        pass_field="admin_password",
        hidden_fields={"formhash": "8f3c1a2b", "frames": "yes"},
        form_action="login",
        valid_credential=("admin", password),
        wrong_event="E1",
        success_event="E9",
        site_host="yzddmr6.com",
        expected_outcome="StrongNoFinding" if strong else "WeakPassword",
        expected_credential=None if strong else ("admin", password),
        expected_found_at=None if strong else 3,
        expected_events=["E1"] if strong else ["E1", "E9"],
    )


def get_scenario(name: str) -> Scenario:
    for scenario in scenario_catalog():
        if scenario.name == name:
            return scenario
    raise KeyError(f"no built-in scenario named {name!r}")
