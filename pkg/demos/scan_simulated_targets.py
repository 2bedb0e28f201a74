"""Spin up every built-in scenario, scan them as one batch and score the result.

    python demos/scan_simulated_targets.py
"""

import logging

from loginaudit.engine import BlastConfig
from loginaudit.http_session import SessionConfig
from loginaudit.report import Target, run_batch
from loginaudit.simulator import scenario_catalog, spawn


def truth_for(handle):
    sc = handle.scenario
    if sc.expected_outcome == "UniversalPassword":
        return "universal"
    if sc.expected_credential:
        user, pw = sc.expected_credential
        return {"username": user, "password": pw}
    return None


def main() -> None:
    logging.basicConfig(level=logging.WARNING)
    handles = [spawn(sc, seed=1) for sc in scenario_catalog()]
    try:
        targets = [Target(h.login_url, h.scenario.site_host) for h in handles]
        truth = {h.login_url: truth_for(h) for h in handles}
        report = run_batch(targets, BlastConfig(session=SessionConfig(seed=1)), ground_truth=truth)
    finally:
        for h in handles:
            h.stop()

    for handle, result in zip(handles, report.results):
        found = f"{result.credential.username}/{result.credential.password}" if result.credential else "-"
        print(f"{handle.scenario.name:<22} {result.outcome.value:<18} attempts={result.attempts:<3} {found}")
    m = report.metrics
    print(f"\nsuccess={m.n_success} fail={m.n_fail} error={m.n_error} effect={m.n_effect}")
    print(f"p_correct={float(m.p_correct):.2%}  p_recognize={float(m.p_recognize):.2%}")
    print("event histogram:", report.events)


if __name__ == "__main__":
    main()
