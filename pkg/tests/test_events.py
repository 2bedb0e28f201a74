import pytest
from hypothesis import given
from hypothesis import strategies as st

from loginaudit.engine import Baseline
from loginaudit.events import (
    AttemptKind,
    Blacklist,
    BlastEvent,
    Cause,
    HintSet,
    classify_event,
    collect_hints,
    failure_cause,
    scrape_hints,
)
from loginaudit.http_session import HttpSession
from loginaudit.page_analyzer import FormDescriptor, extract_form
from loginaudit.simulator import STRONG_PASSWORD, get_scenario

from conftest import make_page

BL = Blacklist.default()
FORM = FormDescriptor("http://t.example/login", "POST", {}, "username", "password", page_url="http://t.example/login")
LOGIN_BOX = '<form><input name="username"><input type="password" name="password"></form>'


def classify(kind, html, url="http://t.example/login", el=None):
    baseline = Baseline(True, el) if el is not None else None
    return classify_event(kind, make_page(html, url), baseline, FORM, BL)


class TestDecisionTree:
    def test_e1_same_page_box_no_message(self):
        assert classify(AttemptKind.WRONG, LOGIN_BOX) is BlastEvent.E1

    def test_e1_same_page_at_error_length(self):
        html = "<p>nothing</p>"
        assert classify(AttemptKind.GUESS, html, el=len(html.encode())) is BlastEvent.E1

    def test_e2_same_page_error(self):
        assert classify(AttemptKind.WRONG, LOGIN_BOX + "密码错误") is BlastEvent.E2

    def test_e3_same_page_lockout(self):
        assert classify(AttemptKind.GUESS, LOGIN_BOX + "Too many failures") is BlastEvent.E3

    def test_e4_new_page_error(self):
        assert classify(AttemptKind.WRONG, "Invalid password", url="http://t.example/err") is BlastEvent.E4

    def test_e5_new_page_lockout(self):
        assert classify(AttemptKind.GUESS, "account locked", url="http://t.example/x") is BlastEvent.E5

    def test_e6_only_for_universal(self):
        page = "Request has been blocked by the firewall"
        assert classify(AttemptKind.UNIVERSAL, page, url="http://t.example/waf") is BlastEvent.E6
        assert classify(AttemptKind.GUESS, page, url="http://t.example/waf") is BlastEvent.E7

    def test_e7_relocated_box(self):
        assert classify(AttemptKind.GUESS, LOGIN_BOX, url="http://t.example/signin") is BlastEvent.E7

    def test_e8_success_prompt(self):
        assert classify(AttemptKind.GUESS, "登录成功", url="http://t.example/ok") is BlastEvent.E8

    def test_e9_backend(self):
        assert classify(AttemptKind.GUESS, "<h1>Dashboard</h1>", url="http://t.example/admin") is BlastEvent.E9

    def test_other_is_e7(self):
        assert BlastEvent.OTHER is BlastEvent.E7
        assert BlastEvent.E8.interference is False and BlastEvent.E3.interference is True

    @given(st.sampled_from(list(AttemptKind)), st.text(max_size=60),
           st.sampled_from(["http://t.example/login", "http://t.example/other"]))
    def test_total(self, kind, text, url):
        assert isinstance(classify(kind, text, url=url, el=3), BlastEvent)


@pytest.mark.parametrize("name,kind,credential,expected", [
    ("e1_no_prompt", AttemptKind.WRONG, None, "E1"),
    ("e2_error_prompt", AttemptKind.WRONG, None, "E2"),
    ("e3_lockout_same_page", AttemptKind.WRONG, None, "E3"),
    ("e4_error_redirect", AttemptKind.WRONG, None, "E4"),
    ("lockout", AttemptKind.WRONG, None, "E5"),
    ("e6_firewall", AttemptKind.UNIVERSAL, ("'or'='or'", "'or'='or'"), "E6"),
    ("e7_relocated_login", AttemptKind.WRONG, None, "E7"),
    ("e8_success_prompt", AttemptKind.GUESS, ("admin", "admin123"), "E8"),
    ("e9_backend", AttemptKind.GUESS, ("admin", "123456"), "E9"),
])
def test_canonical_scenarios(simulator, name, kind, credential, expected):
    """Each event scenario, driven with its credential kind, classifies to its own id."""
    handle = simulator(name)
    sc = get_scenario(name)
    with HttpSession() as s:
        login = s.pre_request(handle.login_url)
        form = extract_form(login, login.final_url)
        pages = [s.submit(form, form.payload("admin", f"wrong{i}")) for i in range(2)]
        baseline = Baseline(True, pages[0].body_length)
        if expected in ("E3", "E5"):  # exhaust the threshold first
            for i in range(sc.lockout_threshold):
                s.submit(form, form.payload("admin", f"more{i}"))
        user, pw = credential or ("admin", STRONG_PASSWORD[::-1])
        page = s.submit(form, form.payload(user, pw))
    event = classify_event(kind, page, baseline, form, BL)
    assert event.value == expected == handle.served_events()[-1].event


class TestFailureCause:
    def test_username(self):
        assert failure_cause("Sorry, the username does not exist.", BL).cause is Cause.USERNAME_NONEXISTENT

    def test_max_attempts(self):
        assert failure_cause("Exceed the maximum number of password errors", BL).cause is Cause.MAX_ATTEMPTS

    def test_other_with_hints(self):
        fc = failure_cause("<p>Contact Globex Corporation support</p>", BL)
        assert fc.cause is Cause.OTHER and fc.keyword is None
        assert "globex" in fc.hints

    def test_firewall_beats_password_error(self):
        fc = failure_cause("wrong password; request blocked by firewall", BL)
        assert fc.cause is Cause.FIREWALL

    def test_script_embedded_message(self):
        assert failure_cause("<script>alert('你的密码错误！')</script>", BL).cause is Cause.PASSWORD_ERROR

    @given(st.text(max_size=40))
    def test_firewall_priority_holds(self, filler):
        fc = failure_cause(filler + " firewall " + filler + " incorrect password", BL)
        assert fc.cause is Cause.FIREWALL


class TestHints:
    def test_title_org(self):
        page = make_page("<title>Acme Corp Admin</title>", url="http://10.0.0.5/login")
        assert "acme" in collect_hints(page).keywords

    def test_empty(self):
        page = make_page("<p>please log in</p>", url="http://127.0.0.1/login")
        assert len(collect_hints(page)) == 0

    def test_history_tagged(self):
        hints = collect_hints(None, history=["acmeops"])
        assert hints.source_of("acmeops") == "success-history"

    def test_domain_labels(self):
        page = make_page("", url="http://portal.initech.com/login")
        assert collect_hints(page).keywords == ["portal", "initech"]

    def test_dedup_order(self):
        h = HintSet()
        for word, src in [("a", "login-page"), ("b", "failure-page"), ("A", "failure-page")]:
            h.add(word, src)
        assert h.entries == [("a", "login-page"), ("b", "failure-page")]

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            HintSet().add("x", "elsewhere")

    def test_scrape_quoted(self):
        assert "initrode" in scrape_hints('account "initrode" is disabled')


class TestBlacklist:
    def test_without_and_extended(self):
        reduced = BL.without("max_attempts")
        assert reduced.match("too many", ("max_attempts",)) is None
        extended = reduced.extended({"max_attempts": ["cool down"]})
        assert extended.match("please COOL DOWN", ("max_attempts",)) == ("max_attempts", "cool down")

    def test_load(self, tmp_path):
        path = tmp_path / "bl.json"
        path.write_text('{"password_error": ["nope"]}', encoding="utf-8")
        assert Blacklist.load(path).match("Nope!") == ("password_error", "nope")
