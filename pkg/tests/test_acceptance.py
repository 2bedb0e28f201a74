"""Acceptance criteria 1-10, one test each.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
lists one PASS/FAIL line per criterion.
"""

import contextlib
import itertools
import random
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from loginaudit.dictgen.dictionaries import dynamic_dict, general_dict
from loginaudit.dictgen.pcfg import (
    generate_guesses,
    parse_structure,
    password_probability,
    split_password,
    train_pcfg,
)
from loginaudit.engine import BlastConfig, Outcome, blast
from loginaudit.events import Blacklist
from loginaudit.http_session import HttpSession, SessionConfig
from loginaudit.page_analyzer import extract_form
from loginaudit.prober import probe_usernames
from loginaudit.report import EventModel, estimate_false_positive, metrics_from_counts
from loginaudit.simulator import get_scenario, scenario_catalog, spawn

from conftest import CRITERIA_LINES, config_for


@contextlib.contextmanager
def criterion(number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        CRITERIA_LINES[number] = f"[FAIL] criterion {number:>2}: {title} ({type(exc).__name__}: {str(exc)[:120]})"
        print(CRITERIA_LINES[number])
        raise
    CRITERIA_LINES[number] = f"[PASS] criterion {number:>2}: {title} ({time.perf_counter() - start:.2f}s)"
    print(CRITERIA_LINES[number])


def phases_and_lengths(result):
    return [(r.phase, r.body_length) for r in result.log]


def test_01_dedecms_trace():
    with criterion(1, "DedeCMS trace replay"):
        sc = get_scenario("dedecms_like")
        start = time.perf_counter()
        with spawn(sc) as handle:
            result = blast(handle.login_url, config=config_for(sc))
        elapsed = time.perf_counter() - start
        assert result.outcome is Outcome.WEAK_PASSWORD
        assert (result.credential.username, result.credential.password) == ("admin", "yzddmr6123")
        assert result.found_at == 30
        log = phases_and_lengths(result)
        assert log[0][0] == "prerequest"
        assert log[1:3] == [("preprocess", 1490), ("preprocess", 1490)]
        assert log[3:32] == [("attempt", 1490)] * 29
        assert log[32] == ("attempt", 1920)
        assert log[33][0] == "recheck_prerequest"
        assert log[34:] == [("recheck_wrong", 1490), ("recheck_candidate", 1920)]
        assert elapsed < 5


def test_02_discuz_trace():
    with criterion(2, "Discuz trace replay"):
        sc = get_scenario("discuz_like")
        start = time.perf_counter()
        with spawn(sc) as handle:
            result = blast(handle.login_url, config=config_for(sc))
        elapsed = time.perf_counter() - start
        assert len(general_dict("admin")) + len(dynamic_dict(sc.site_host)) == 33
        assert result.outcome is Outcome.WEAK_PASSWORD
        assert (result.credential.username, result.credential.password) == ("admin", "admin888")
        assert result.found_at == 3
        assert elapsed < 5


def test_03_strong_passwords_no_false_positive():
    with criterion(3, "Strong passwords: 33 + 25 attempts, no finding"):
        for name in ("dedecms_strong", "discuz_strong"):
            sc = get_scenario(name)
            with spawn(sc) as handle:
                result = blast(handle.login_url, config=config_for(sc))
            assert result.outcome is Outcome.STRONG_NO_FINDING, name
            assert result.credential is None
            assert len(result.log.phase("attempt")) == 33, name
            assert len(result.log.phase("universal")) == 25, name
            assert result.attempts == 58, name


def test_04_event_coverage_over_catalog():
    with criterion(4, "Event ground truth over the full catalog"):
        total = matched = 0
        for sc in scenario_catalog():
            with spawn(sc, seed=3) as handle:
                result = blast(handle.login_url, config=config_for(sc))
                served = [e.event for e in handle.served_events()]
            mine = [e.value for e in result.events]
            assert len(mine) == len(served), sc.name
            total += len(served)
            matched += sum(a == b for a, b in zip(mine, served))
            assert list(dict.fromkeys(mine)) == sc.expected_events, sc.name
            assert result.outcome.value == sc.expected_outcome, sc.name
            interference_only = all(e in {f"E{i}" for i in range(1, 8)} for e in served)
            if interference_only:
                assert not result.outcome.success, sc.name
        assert total > 0 and matched == total


def test_05_recheck_ablation():
    with criterion(5, "Recheck ablation on the lockout scenario"):
        sc = get_scenario("lockout")
        reduced = Blacklist.default().without("max_attempts")
        outcomes = {}
        for recheck in (False, True):
            with spawn(sc) as handle:
                result = blast(handle.login_url, config=config_for(sc, blacklist=reduced, recheck=recheck))
            outcomes[recheck] = result
        false_positives_off = int(outcomes[False].outcome.success)
        false_positives_on = int(outcomes[True].outcome.success)
        assert false_positives_off >= 1
        assert false_positives_on == 0
        assert outcomes[True].log.phase("recheck_candidate")


def _oracle_order(grammar):
    rows = []
    for structure, sp in grammar.structures.items():
        tables = [sorted(grammar.segments[s].items()) for s in parse_structure(structure)]
        for combo in itertools.product(*tables):
            p = sp
            for _, lp in combo:
                p *= lp
            rows.append(("".join(l for l, _ in combo), p))
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def test_06_pcfg_oracle_equivalence():
    with criterion(6, "PCFG guesses equal brute-force enumeration"):
        start = time.perf_counter()
        rng = random.Random(2024)
        checked = 0
        while checked < 200:
            corpus = ["".join(rng.choice("ab12!?") for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(1, 25))]
            grammar = train_pcfg(corpus)
            if grammar.space_size() > 10_000:
                continue
            expected = _oracle_order(grammar)
            got = generate_guesses(grammar, grammar.space_size())
            assert [pw for pw, _ in got] == [pw for pw, _ in expected], corpus
            assert all(abs(a - b) <= 1e-12 for (_, a), (_, b) in zip(got, expected))
            checked += 1
        single = train_pcfg(["password6789!"])
        structure, segments = split_password("password6789!")
        assert structure == "L8D4S1"
        factors = [single.structures[structure]] + [single.segments[slot][lit] for slot, lit in segments]
        assert factors == [1.0, 1.0, 1.0, 1.0]
        assert abs(password_probability(single, "password6789!") - 1.0) <= 1e-12
        assert time.perf_counter() - start < 10


def test_07_dynamic_dictionary():
    with criterion(7, "Dynamic dictionary exactness"):
        assert dynamic_dict("webcrack.yzddmr6.com") == [
            "yzddmr6.com", "webcrack", "webcrack123", "webcrack888", "webcrack666", "webcrack123456",
            "yzddmr6", "yzddmr6123", "yzddmr6888", "yzddmr6666", "yzddmr6123456",
        ]
        assert dynamic_dict("http://1.2.3.4/admin") == []


@pytest.mark.slow
def test_08_timing_probe():
    with criterion(8, "Timing probe confirms the planted username"):
        sc = get_scenario("timing")
        candidates = ["admin", "root", "test", "guest", "operator"]
        start = time.perf_counter()
        with spawn(sc, seed=8) as handle:
            def one(seed):
                with HttpSession(SessionConfig(seed=seed)) as session:
                    login = session.pre_request(handle.login_url)
                    form = extract_form(login, login.final_url)
                    return probe_usernames(session, form, candidates, rounds=5, long_password_length=4096, seed=seed)

            with ThreadPoolExecutor(max_workers=50) as pool:
                reports = list(pool.map(one, range(1000, 1100)))
        elapsed = time.perf_counter() - start
        hits = sum(r.confirmed and r.leader == sc.expected_prober_leader for r in reports)
        print(f"timing probe: {hits}/100 confirmed in {elapsed:.1f}s")
        assert hits >= 95
        assert elapsed < 60


def test_09_false_positive_formula():
    with criterion(9, "False-positive formula against a summation oracle"):
        rng = random.Random(9)
        for _ in range(1000):
            p = [rng.random() for _ in range(7)]
            q6 = rng.random()
            model = EventModel(p, [1.0] * 5 + [q6])
            oracle = 0.0
            for i in range(6):
                oracle += p[i] * (1.0 - model.exclusion_probs[i])
            oracle += p[6]
            got = estimate_false_positive(model)
            assert abs(got - oracle) <= 1e-12
            assert abs(got - (p[5] * (1 - q6) + p[6])) <= 1e-12


def test_10_metrics_arithmetic():
    with criterion(10, "Metrics arithmetic"):
        metrics = metrics_from_counts(n_effect=75, n_success=80, n_fail=1094 - 80)
        assert float(metrics.p_correct) * 100 == 93.75
        assert abs(float(metrics.p_recognize) * 100 - 6.86) <= 0.01
        assert metrics.p_correct * metrics.n_success == metrics.n_effect


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
