"""Threaded loopback HTTP server that plays one :class:`Scenario`.

Every POST to the login route records the event the scenario served, so
callers can compare their own classification against ground truth.
"""

from __future__ import annotations

import logging
import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, List, Optional, Tuple
from urllib.parse import parse_qs, urlsplit

from .scenarios import REDIRECTS, Scenario

logger = logging.getLogger(__name__)

COOKIE_NAME = "SIMSESSID"


class SpawnError(RuntimeError):
    """The simulator could not bind its port."""


@dataclass
class ServedEvent:
    session: Optional[str]
    username: str
    password: str
    event: str


@dataclass
class RequestEntry:
    method: str
    path: str
    had_cookie: bool


@dataclass
class _SessionState:
    failures: int = 0
    fresh: bool = True


@dataclass
class _State:
    scenario: Scenario
    rng: random.Random
    lock: threading.Lock = field(default_factory=threading.Lock)
    sessions: Dict[str, _SessionState] = field(default_factory=dict)
    failures: int = 0  # used when the scenario keeps no cookies
    served: List[ServedEvent] = field(default_factory=list)
    requests: List[RequestEntry] = field(default_factory=list)
    last_banner: int = -1


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128
    allow_reuse_address = False

    def __init__(self, address, state: _State):
        self.state = state
        super().__init__(address, _Handler)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # one buffered write per response; split header/body writes stall on delayed ACKs
    wbufsize = -1
    disable_nagle_algorithm = True
    server: _Server

    def log_message(self, fmt, *args) -> None:
        logger.debug("%s " + fmt, self.address_string(), *args)

    # -- session handling ---------------------------------------------------
    def _session(self) -> Tuple[Optional[str], Optional[_SessionState], bool]:
        """Return ``(id, state, issued_now)``; ``(None, None, False)`` if stateless."""
        state = self.server.state
        if not state.scenario.stateful:
            return None, None, False
        sid = None
        for part in (self.headers.get("Cookie") or "").split(";"):
            name, _, value = part.strip().partition("=")
            if name == COOKIE_NAME:
                sid = value
        with state.lock:
            if sid and sid in state.sessions:
                return sid, state.sessions[sid], False
            sid = secrets.token_hex(8)
            sess = state.sessions[sid] = _SessionState()
        return sid, sess, True

    def _page_bytes(self, page: str, sess: Optional[_SessionState]) -> bytes:
        scenario = self.server.state.scenario
        body = scenario.render_bytes(page)
        extra = ""
        if scenario.cookie_on_first and sess is not None and sess.fresh:
            sess.fresh = False
            extra += f'<p class="visit">{scenario.message("first_visit")}</p>'
        if scenario.unstable:
            state = self.server.state
            with state.lock:
                n = state.rng.randint(1, 64)
                while n == state.last_banner:
                    n = state.rng.randint(1, 64)
                state.last_banner = n
            extra += "<!-- " + "r" * n + " -->"
        if extra:
            i = body.rfind(b"</body>")
            body = body[:i] + scenario.encode(extra) + body[i:]
        return body

    def _send(self, status: int, body: bytes, sid: Optional[str], issued: bool, location: str = "") -> None:
        scenario = self.server.state.scenario
        self.send_response(status)
        if scenario.charset.lower() in ("gbk", "gb2312", "gb18030"):
            self.send_header("Content-Type", "text/html")  # charset only in the meta tag
        else:
            self.send_header("Content-Type", f"text/html; charset={scenario.charset}")
        if issued and sid:
            self.send_header("Set-Cookie", f"{COOKIE_NAME}={sid}; Path=/")
        if location:
            self.send_header("Location", location)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _log_request(self) -> None:
        state = self.server.state
        with state.lock:
            state.requests.append(RequestEntry(self.command, urlsplit(self.path).path, "Cookie" in self.headers))

    # -- routes ---------------------------------------------------------------
    def do_GET(self) -> None:
        self._log_request()
        path = urlsplit(self.path).path
        sid, sess, issued = self._session()
        pages = {"/login": "login", "/": "login"}
        pages.update({v: k for k, v in REDIRECTS.items()})
        page = pages.get(path)
        if page is None:
            self._send(404, b"not found", sid, issued)
            return
        self._send(200, self._page_bytes(page, sess), sid, issued)

    def do_POST(self) -> None:
        self._log_request()
        state = self.server.state
        scenario = state.scenario
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length).decode("utf-8", "replace") if length else ""
        path = urlsplit(self.path).path
        if path not in ("/login", "/"):
            self._send(404, b"not found", None, False)
            return
        form = parse_qs(raw, keep_blank_values=True)
        username = form.get(scenario.user_field, [""])[0]
        password = form.get(scenario.pass_field, [""])[0]
        sid, sess, issued = self._session()

        self._delay(username, password)
        with state.lock:
            failures = sess.failures if sess is not None else state.failures
            event = scenario.outcome_for(username, password, failures)
            if event == scenario.wrong_event:
                if sess is not None:
                    sess.failures += 1
                else:
                    state.failures += 1
            state.served.append(ServedEvent(sid, username, password, event))

        if event in REDIRECTS:
            self._send(302, b"redirecting", sid, issued, location=REDIRECTS[event])
        else:
            self._send(200, self._page_bytes(event, sess), sid, issued)

    def _delay(self, username: str, password: str) -> None:
        scenario = self.server.state.scenario
        ms = scenario.base_latency_ms
        if scenario.jitter_ms:
            with self.server.state.lock:
                ms += self.server.state.rng.uniform(0, scenario.jitter_ms)
        if scenario.hash_delay_per_char and username in scenario.existing_users:
            ms += scenario.hash_delay_per_char * len(password)
        if ms > 0:
            time.sleep(ms / 1000.0)


class SimulatorHandle:
    """A running simulator.  Use as a context manager or call :meth:`stop`."""

    def __init__(self, server: _Server, thread: threading.Thread):
        self._server = server
        self._thread = thread
        host, port = server.server_address[:2]
        self.host = host
        self.port = port

    @property
    def scenario(self) -> Scenario:
        return self._server.state.scenario

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    @property
    def login_url(self) -> str:
        return f"{self.base_url}/login"

    def served_events(self) -> List[ServedEvent]:
        with self._server.state.lock:
            return list(self._server.state.served)

    def request_log(self) -> List[RequestEntry]:
        with self._server.state.lock:
            return list(self._server.state.requests)

    def reset(self) -> None:
        """Forget sessions, counters and logs."""
        state = self._server.state
        with state.lock:
            state.sessions.clear()
            state.failures = 0
            state.served.clear()
            state.requests.clear()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "SimulatorHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def spawn(scenario: Scenario, port: int = 0, host: str = "127.0.0.1", seed: Optional[int] = None) -> SimulatorHandle:
    """Start ``scenario`` on ``host:port`` (0 picks a free port)."""
    scenario.validate()
    state = _State(scenario=scenario, rng=random.Random(seed))
    try:
        server = _Server((host, port), state)
    except OSError as exc:
        raise SpawnError(f"cannot bind {host}:{port}: {exc}") from exc
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, name=f"sim-{scenario.name}", daemon=True)
    thread.start()
    return SimulatorHandle(server, thread)
