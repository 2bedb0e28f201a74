import csv
import io
import socket

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loginaudit.dictgen.dictionaries import CmsRule, Credential, Origin
from loginaudit.dictgen.pcfg import train_pcfg
from loginaudit.engine import (
    CSV_COLUMNS,
    Baseline,
    BlastConfig,
    BlastResult,
    Outcome,
    StepOutcome,
    Verdict,
    blast,
    judge,
    preprocess,
    recheck,
)
from loginaudit.events import Blacklist
from loginaudit.http_session import HttpSession, SessionConfig
from loginaudit.page_analyzer import FormDescriptor, extract_form
from loginaudit.simulator import STRONG_PASSWORD, Scenario, get_scenario

from conftest import config_for, make_page

BL = Blacklist.default()
FORM = FormDescriptor("http://t/login", "POST", {}, "userid", "pwd", page_url="http://t/login")


def session_and_form(handle, seed=1):
    s = HttpSession(SessionConfig(seed=seed))
    login = s.pre_request(handle.login_url)
    return s, extract_form(login, login.final_url)


class TestTypes:
    def test_baseline_invariant(self):
        with pytest.raises(ValueError):
            Baseline(True, None)
        with pytest.raises(ValueError):
            Baseline(False, 10)

    def test_step_outcome_invariant(self):
        with pytest.raises(ValueError):
            StepOutcome(Verdict.REJECTED_STEP1)
        with pytest.raises(ValueError):
            StepOutcome(Verdict.CANDIDATE, "x")

    def test_result_invariant(self):
        with pytest.raises(ValueError):
            BlastResult("u", Outcome.WEAK_PASSWORD)
        with pytest.raises(ValueError):
            BlastResult("u", Outcome.STRONG_NO_FINDING, Credential("a", "b"))


class TestPreprocess:
    def test_dede_stable_at_1490(self, simulator):
        s, form = session_and_form(simulator("dedecms_like"))
        base = preprocess(s, form)
        assert base.stable and base.error_length == 1490

    def test_unstable(self, simulator):
        s, form = session_and_form(simulator("unstable"))
        base = preprocess(s, form)
        assert not base.stable and base.error_length is None

    def test_static_page_el_is_fixture_size(self, simulator):
        handle = simulator("e1_no_prompt")
        s, form = session_and_form(handle)
        assert preprocess(s, form).error_length == len(handle.scenario.render_bytes("E1"))

    def test_two_distinct_wrong_passwords(self, simulator):
        handle = simulator("e2_error_prompt")
        s, form = session_and_form(handle)
        preprocess(s, form)
        pws = [e.password for e in handle.served_events()]
        assert len(pws) == 2 and pws[0] != pws[1] and all(len(p) == 16 and p.isalnum() for p in pws)


class TestJudge:
    BASE = Baseline(True, 1490)

    def test_step1_keyword(self):
        out = judge(make_page("<p>密码错误</p>"), self.BASE, FORM, BL)
        assert out.verdict is Verdict.REJECTED_STEP1 and out.matched_keyword == "密码错误"

    def test_step2_keys(self):
        assert judge(make_page('<input name="pwd">'), self.BASE, FORM, BL).verdict is Verdict.REJECTED_STEP2

    def test_step3_length(self):
        page = make_page("x" * 1490)
        assert judge(page, self.BASE, FORM, BL).verdict is Verdict.REJECTED_STEP3

    def test_candidate(self):
        assert judge(make_page("y" * 1920), self.BASE, FORM, BL).verdict is Verdict.CANDIDATE

    def test_tolerance(self):
        page = make_page("x" * 1493)
        assert judge(page, self.BASE, FORM, BL, tolerance=3).verdict is Verdict.REJECTED_STEP3
        assert judge(page, self.BASE, FORM, BL, tolerance=2).verdict is Verdict.CANDIDATE

    def test_unstable_baseline_refused(self):
        with pytest.raises(ValueError):
            judge(make_page("x"), Baseline(False, None), FORM, BL)

    @given(st.integers(0, 3000), st.text(alphabet="abc <>/", max_size=30))
    def test_never_candidate_at_error_length(self, el, text):
        body = text.encode()
        body = body + b"z" * max(0, el - len(body))
        page = make_page(text, body=body)
        out = judge(page, Baseline(True, len(body)), FORM, BL)
        assert out.verdict is not Verdict.CANDIDATE


class TestRecheck:
    def test_confirms_dede(self, simulator):
        s, form = session_and_form(simulator("dedecms_like"))
        preprocess(s, form)
        assert recheck(s, form, Credential("admin", "yzddmr6123"))

    def test_rejects_lockout(self, simulator):
        handle = simulator("lockout")
        s, form = session_and_form(handle)
        for i in range(5):
            s.submit(form, form.payload("admin", f"w{i}"))
        assert not recheck(s, form, Credential("admin", "admin"))
        assert [e.event for e in handle.served_events()[-2:]] == ["E5", "E5"]

    def test_rejects_wrong_candidate(self, simulator):
        s, form = session_and_form(simulator("e4_error_redirect"))
        assert not recheck(s, form, Credential("admin", "nope"))


class TestBlast:
    def test_attempt_accounting(self, simulator):
        handle = simulator("e9_backend")
        r = blast(handle.login_url, config=config_for(handle.scenario))
        submits = len(handle.served_events())
        pre = [e for e in r.log if e.phase == "preprocess"]
        assert r.attempts == submits - len(pre) == 4
        assert r.found_at == 2

    def test_no_repeated_pairs(self, simulator):
        handle = simulator("strong_password")
        blast(handle.login_url, config=config_for(handle.scenario, base_dictionary=("123456", "{user}", "654321")))
        pairs = [(e.username, e.password) for e in handle.served_events()]
        assert len(pairs) == len(set(pairs))

    def test_universal_disabled(self, simulator):
        handle = simulator("sqli_vulnerable")
        r = blast(handle.login_url, config=config_for(handle.scenario, universal=False))
        assert r.outcome is Outcome.STRONG_NO_FINDING and r.attempts == 27

    def test_rule_without_universal(self, simulator):
        handle = simulator("sqli_vulnerable")
        rules = [CmsRule("sim", keywords="Admin Login", exp_able=0)]
        r = blast(handle.login_url, rules, config_for(handle.scenario))
        assert r.outcome is Outcome.STRONG_NO_FINDING and r.rule == "sim"

    def test_rule_captcha(self, simulator):
        handle = simulator("e2_error_prompt")
        r = blast(handle.login_url, [CmsRule("c", keywords="Admin Login", captcha=1)], config_for(handle.scenario))
        assert r.outcome is Outcome.CAPTCHA and handle.served_events() == []

    def test_rule_success_flag_skips_recheck(self, simulator):
        handle = simulator("e8_success_prompt")
        rule = CmsRule("ok", keywords="Admin Login", success_flag="Login successful")
        r = blast(handle.login_url, [rule], config_for(handle.scenario))
        assert r.outcome is Outcome.WEAK_PASSWORD and r.attempts == 10
        assert not r.log.phase("recheck_candidate")

    def test_rule_fail_flag_aborts(self, simulator):
        handle = simulator("e2_error_prompt")
        rule = CmsRule("f", keywords="Admin Login", fail_flag="Invalid password")
        r = blast(handle.login_url, [rule], config_for(handle.scenario))
        assert r.outcome is Outcome.STRONG_NO_FINDING and r.attempts == 1 and "fail flag" in r.note

    def test_captcha_page(self, simulator):
        handle = simulator("captcha")
        assert blast(handle.login_url).outcome is Outcome.CAPTCHA

    def test_not_a_login_page(self, simulator):
        handle = simulator("e9_backend")
        assert blast(handle.base_url + "/admin").outcome is Outcome.ANALYSIS_FAILED

    def test_unreachable(self):
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()
        r = blast(f"http://127.0.0.1:{port}/login", config=BlastConfig(session=SessionConfig(timeout=2)))
        assert r.outcome is Outcome.UNREACHABLE and r.credential is None

    def test_total_length_mode(self, simulator):
        handle = simulator("dedecms_like")
        r = blast(handle.login_url, config=config_for(handle.scenario, session=SessionConfig(seed=2, length_mode="total")))
        assert r.outcome is Outcome.WEAK_PASSWORD
        assert r.log.phase("preprocess")[0].body_length > 1490

    def test_csv_log(self, simulator):
        handle = simulator("e9_backend")
        r = blast(handle.login_url, config=config_for(handle.scenario))
        rows = list(csv.reader(io.StringIO(r.log.to_csv())))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert [row[6] for row in rows[1:]] == [
            "prerequest", "preprocess", "preprocess", "attempt", "attempt",
            "recheck_prerequest", "recheck_wrong", "recheck_candidate",
        ]

    def test_seed_reproducible(self, simulator):
        handle = simulator("e2_error_prompt")
        a = blast(handle.login_url, config=config_for(handle.scenario))
        b = blast(handle.login_url, config=config_for(handle.scenario))
        strip = lambda r: [(x.username, x.password, x.event, x.body_length) for x in r.log]
        assert strip(a) == strip(b)


class TestGuessStreamInEngine:
    def test_hint_and_probe_find_planted_account(self, simulator):
        sc = Scenario(
            "hinted", valid_credential=("ops", "acme2024"), wrong_event="E2", title="Acme Corp Admin",
            messages={"error": "Username or password is incorrect."},
            hash_delay_per_char=0.5, timing_users=["ops"],
        )
        handle = simulator(sc)
        grammar = train_pcfg(["hello2024", "blue2024", "secret12", "summer99"])
        cfg = config_for(sc, grammar=grammar, probe_candidates=["admin", "ops", "root"], probe_password_length=1024)
        r = blast(handle.login_url, config=cfg)
        assert r.probe is not None and r.probe.confirmed and r.probe.leader == "ops"
        assert r.outcome is Outcome.WEAK_PASSWORD
        assert r.credential == Credential("ops", "acme2024", Origin.HINT)
        assert all(e.password.startswith("<long:") for e in r.log.phase("probe"))

    def test_history_becomes_hint(self, simulator):
        sc = Scenario("hist", valid_credential=("admin", "initech12"), wrong_event="E2")
        handle = simulator(sc)
        grammar = train_pcfg(["letmein12", "abc12"])
        r = blast(handle.login_url, config=config_for(sc, grammar=grammar, universal=False), history=["initech"])
        assert r.outcome is Outcome.WEAK_PASSWORD and r.credential.origin is Origin.HINT
