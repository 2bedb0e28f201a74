"""HTTP transport for login auditing.

A :class:`HttpSession` keeps cookies across requests, follows redirects to
the final page and stamps every submission with a fresh set of camouflage
headers.  All length comparisons downstream work on :class:`ResponsePage`.
"""

from __future__ import annotations

import logging
import random
import re
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional
from urllib.parse import urlparse

import requests

logger = logging.getLogger(__name__)

DEFAULT_USER_AGENTS: List[str] = [
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_4) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/16.5 Safari/605.1.15",
    "Mozilla/5.0 (X11; Linux x86_64; rv:121.0) Gecko/20100101 Firefox/121.0",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:115.0) Gecko/20100101 Firefox/115.0",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 16_5 like Mac OS X) AppleWebKit/605.1.15 (KHTML, like Gecko) Mobile/15E148",
    "Mozilla/5.0 (Windows NT 6.1; WOW64; Trident/7.0; rv:11.0) like Gecko",
    "Mozilla/5.0 (Linux; Android 13; Pixel 7) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/119.0 Mobile Safari/537.36",
]

LENGTH_MODES = ("body", "total")

_CHARSET_HEADER = re.compile(r"charset\s*=\s*[\"']?([\w.:-]+)", re.I)
_CHARSET_META = re.compile(rb"<meta[^>]+charset\s*=\s*[\"']?([\w.:-]+)", re.I)


class TransportError(Exception):
    """Base class for transport failures."""


class TargetUnreachable(TransportError):
    """Connection refused, DNS failure or timeout."""


class RedirectLoop(TransportError):
    """More redirects than ``SessionConfig.max_redirects``."""


@dataclass
class SessionConfig:
    timeout: float = 10.0
    max_redirects: int = 5
    seed: Optional[int] = None
    user_agent_pool: List[str] = field(default_factory=lambda: list(DEFAULT_USER_AGENTS))
    length_mode: str = "body"

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_redirects < 1:
            raise ValueError("max_redirects must be at least 1")
        if not self.user_agent_pool:
            raise ValueError("user_agent_pool must not be empty")
        if self.length_mode not in LENGTH_MODES:
            raise ValueError(f"length_mode must be one of {LENGTH_MODES}")


@dataclass(frozen=True)
class HeaderSet:
    user_agent: str
    x_forwarded_for: str
    client_ip: str

    def as_headers(self) -> Dict[str, str]:
        return {
            "User-Agent": self.user_agent,
            "X-Forwarded-For": self.x_forwarded_for,
            "Client-IP": self.client_ip,
        }


@dataclass(frozen=True)
class ResponsePage:
    """The final page of a request after all redirects were followed.

    ``elapsed`` is in milliseconds and spans request start to last body byte.
    ``header_length`` is the size of the serialized status line and headers
    of the final response, used only in ``total`` length mode.
    """

    status: int
    final_url: str
    body: bytes
    elapsed: float
    decoded_text: str
    header_length: int = 0
    redirects: int = 0

    @property
    def body_length(self) -> int:
        return len(self.body)

    def length(self, mode: str = "body") -> int:
        if mode == "total":
            return self.header_length + len(self.body)
        return len(self.body)


def sniff_charset(body: bytes, content_type: Optional[str] = None) -> Optional[str]:
    """Charset from the Content-Type header, then from a ``<meta>`` tag."""
    if content_type:
        m = _CHARSET_HEADER.search(content_type)
        if m:
            return m.group(1).lower()
    m = _CHARSET_META.search(body[:4096])
    if m:
        return m.group(1).decode("ascii", "ignore").lower()
    return None


def decode_body(body: bytes, content_type: Optional[str] = None) -> str:
    charset = sniff_charset(body, content_type)
    if charset:
        # gb2312 pages routinely contain GBK-only characters
        if charset in ("gb2312", "gbk"):
            charset = "gb18030"
        try:
            return body.decode(charset, errors="replace")
        except LookupError:
            logger.debug("unknown charset %r, falling back", charset)
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError:
        return body.decode("gb18030", errors="replace")


def _header_block_length(resp: requests.Response) -> int:
    reason = resp.reason or ""
    size = len(f"HTTP/1.1 {resp.status_code} {reason}\r\n".encode("latin-1", "replace"))
    for key, value in resp.raw.headers.items() if resp.raw is not None else resp.headers.items():
        size += len(f"{key}: {value}\r\n".encode("latin-1", "replace"))
    return size + 2


class HttpSession:
    """One cookie jar, one target, strictly sequential requests.

    Sessions can be handed to another thread but must never be shared.
    """

    def __init__(self, config: Optional[SessionConfig] = None):
        self.config = config or SessionConfig()
        self.rng = random.Random(self.config.seed)
        self._http = requests.Session()
        self._http.max_redirects = self.config.max_redirects
        self.requests_sent = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "HttpSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def cookies(self) -> Dict[str, str]:
        return self._http.cookies.get_dict()

    def random_headers(self) -> HeaderSet:
        def ip() -> str:
            return ".".join(str(self.rng.randint(1, 254)) for _ in range(4))

        return HeaderSet(
            user_agent=self.rng.choice(self.config.user_agent_pool),
            x_forwarded_for=ip(),
            client_ip=ip(),
        )

    def pre_request(self, url: str) -> ResponsePage:
        """Fetch ``url`` so any first-visit cookie is absorbed by the jar."""
        return self._send("GET", url, headers=self.random_headers().as_headers())

    def submit(self, form, payload: Mapping[str, str]) -> ResponsePage:
        """Send ``payload`` to ``form.action_url`` and return the final page."""
        headers = self.random_headers().as_headers()
        method = (form.method or "POST").upper()
        if method == "GET":
            return self._send("GET", form.action_url, headers=headers, params=dict(payload))
        headers["Referer"] = form.page_url or form.action_url
        return self._send(method, form.action_url, headers=headers, data=dict(payload))

    def _send(self, method: str, url: str, **kwargs) -> ResponsePage:
        parsed = urlparse(url)
        if not parsed.scheme or not parsed.netloc:
            raise ValueError(f"absolute URL required: {url!r}")
        start = time.perf_counter()
        try:
            resp = self._http.request(
                method, url, timeout=self.config.timeout, allow_redirects=True, **kwargs
            )
            body = resp.content
        except requests.TooManyRedirects as exc:
            raise RedirectLoop(f"{url}: more than {self.config.max_redirects} redirects") from exc
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TargetUnreachable(f"{url}: {exc}") from exc
        except requests.RequestException as exc:
            raise TransportError(f"{url}: {exc}") from exc
        elapsed = (time.perf_counter() - start) * 1000.0
        self.requests_sent += 1
        return ResponsePage(
            status=resp.status_code,
            final_url=resp.url,
            body=body,
            elapsed=elapsed,
            decoded_text=decode_body(body, resp.headers.get("Content-Type")),
            header_length=_header_block_length(resp),
            redirects=len(resp.history),
        )
