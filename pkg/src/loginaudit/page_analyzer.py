"""Static login-page analysis: verdict, form extraction, parameter roles."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union
from urllib.parse import urljoin

from bs4 import BeautifulSoup

from .http_session import ResponsePage

logger = logging.getLogger(__name__)

USER_KEYWORDS = ("user", "name", "zhanghao", "yonghu", "email", "account")
PASS_KEYWORDS = ("pass", "pw", "mima")
CAPTCHA_KEYWORDS = ("captcha", "verifycode", "checkcode", "validate", "yanzhengma", "seccode")
RESET_KEYWORDS = ("reset",)

# Extension point: pages need at least one of these besides a password input.
LOGIN_KEYWORDS = (
    "login", "log in", "logon", "sign in", "signin", "password", "passwd",
    "username", "admin", "登录", "登陆", "密码", "用户名", "管理",
)
_DESCRIPTIVE_ATTRS = ("name", "id", "value", "placeholder", "action", "title", "alt")


class AnalysisFailed(Exception):
    """The page has no usable login form."""


class LoginPageVerdict(enum.Enum):
    LOGIN = "Login"
    NOT_LOGIN = "NotLogin"
    CAPTCHA = "Captcha"


@dataclass
class FormDescriptor:
    action_url: str
    method: str
    params: Dict[str, str]
    user_key: str
    pass_key: str
    page_url: str = ""

    def payload(self, username: str, password: str) -> Dict[str, str]:
        """Form defaults with the credential filled in; tokens pass through."""
        data = dict(self.params)
        if self.user_key:
            data[self.user_key] = username
        data[self.pass_key] = password
        return data


@dataclass
class RawField:
    name: str
    type: str = "text"
    value: str = ""


@dataclass
class RawForm:
    action: Optional[str]
    method: str
    fields: List[RawField] = field(default_factory=list)


def _soup(page: Union[ResponsePage, str]) -> BeautifulSoup:
    text = page if isinstance(page, str) else page.decoded_text
    return BeautifulSoup(text, "html.parser")


def _has_password_input(tag) -> bool:
    return tag.find("input", attrs={"type": lambda t: t and t.lower() == "password"}) is not None


def _has_captcha(soup: BeautifulSoup) -> bool:
    for tag in soup.find_all(["input", "img"]):
        attrs = " ".join(str(tag.get(a, "")) for a in ("name", "id", "src")).lower()
        if any(k in attrs for k in CAPTCHA_KEYWORDS):
            return True
    return False


def identify_login_page(page: Union[ResponsePage, str]) -> LoginPageVerdict:
    soup = _soup(page)
    if _has_captcha(soup):
        return LoginPageVerdict.CAPTCHA
    if not any(_has_password_input(f) for f in soup.find_all("form")):
        return LoginPageVerdict.NOT_LOGIN
    # the type attribute is left out: "password" there would match every candidate
    words = [soup.get_text(" ")]
    for tag in soup.find_all(True):
        words.extend(str(tag.get(a, "")) for a in _DESCRIPTIVE_ATTRS)
    haystack = " ".join(words).lower()
    if any(k in haystack for k in LOGIN_KEYWORDS):
        return LoginPageVerdict.LOGIN
    return LoginPageVerdict.NOT_LOGIN


def _raw_form(form_tag) -> RawForm:
    fields = []
    for tag in form_tag.find_all(["input", "select", "textarea", "button"]):
        name = tag.get("name")
        if not name:
            continue
        if tag.name == "select":
            opt = tag.find("option", selected=True) or tag.find("option")
            value = (opt.get("value", opt.get_text()) if opt else "") or ""
            ftype = "select"
        elif tag.name == "textarea":
            value, ftype = tag.get_text(), "textarea"
        else:
            value = tag.get("value", "") or ""
            ftype = (tag.get("type") or ("submit" if tag.name == "button" else "text")).lower()
        if ftype in ("checkbox", "radio") and not tag.has_attr("checked"):
            continue
        fields.append(RawField(name=name, type=ftype, value=value))
    return RawForm(action=form_tag.get("action"), method=(form_tag.get("method") or "POST").upper(), fields=fields)


def _first_match(fields: Sequence[RawField], keywords: Sequence[str], skip: Tuple[str, ...] = ()) -> Optional[str]:
    for f in fields:
        if f.name in skip:
            continue
        lname = f.name.lower()
        if any(k in lname for k in keywords):
            return f.name
    return None


def identify_params(form: RawForm, action_url: str = "", page_url: str = "") -> FormDescriptor:
    """Assign user/pass roles, drop reset controls, keep everything else."""
    fields = [f for f in form.fields if not any(k in f.name.lower() for k in RESET_KEYWORDS) and f.type != "reset"]
    # a password-typed input is authoritative when its name is not keyword-like
    pass_key = _first_match([f for f in fields if f.type == "password"], PASS_KEYWORDS)
    if pass_key is None:
        pass_key = _first_match(fields, PASS_KEYWORDS)
    if pass_key is None:
        typed = [f.name for f in fields if f.type == "password"]
        pass_key = typed[0] if typed else None
    if pass_key is None:
        raise AnalysisFailed("no password field identified")
    text_like = [f for f in fields if f.type not in ("hidden", "submit", "button", "image", "password")]
    user_key = _first_match(text_like, USER_KEYWORDS, skip=(pass_key,))
    if user_key is None:
        user_key = _first_match(fields, USER_KEYWORDS, skip=(pass_key,))
    if user_key is None:
        logger.info("no username field, treating form as password-only")
        user_key = ""
    params = {f.name: f.value for f in fields}
    params.setdefault(pass_key, "")
    if user_key:
        params.setdefault(user_key, "")
    return FormDescriptor(
        action_url=action_url, method=form.method, params=params,
        user_key=user_key, pass_key=pass_key, page_url=page_url,
    )


def extract_form(page: Union[ResponsePage, str], base_url: str) -> FormDescriptor:
    soup = _soup(page)
    for form_tag in soup.find_all("form"):
        if not _has_password_input(form_tag):
            continue
        raw = _raw_form(form_tag)
        base = soup.find("base", href=True)
        anchor = urljoin(base_url, base["href"]) if base else base_url
        action = (raw.action or "").strip()
        action_url = urljoin(anchor, action) if action else base_url
        return identify_params(raw, action_url=action_url, page_url=base_url)
    raise AnalysisFailed("no form with a password input")


def form_keys_present(page: Union[ResponsePage, str], form: FormDescriptor) -> Tuple[bool, str]:
    """Whether the login keys survive on ``page``.

    Returns ``(present, route)``: route ``"attribute"`` when an element
    carries the key as its ``name``, ``"substring"`` when only a quoted
    occurrence (e.g. in script-built markup) was found, ``""`` otherwise.
    """
    text = page if isinstance(page, str) else page.decoded_text
    keys = [k for k in (form.user_key, form.pass_key) if k]
    soup = BeautifulSoup(text, "html.parser")
    for tag in soup.find_all(["input", "textarea", "select"]):
        if tag.get("name") in keys:
            logger.debug("login key %r found as element name", tag.get("name"))
            return True, "attribute"
    for key in keys:
        if f'"{key}"' in text or f"'{key}'" in text:
            logger.debug("login key %r found by substring fallback", key)
            return True, "substring"
    return False, ""
