"""Enumerate an account by response latency on the simulated timing target.

    python demos/timing_probe.py
"""

from loginaudit.http_session import HttpSession, SessionConfig
from loginaudit.page_analyzer import extract_form
from loginaudit.prober import probe_usernames
from loginaudit.simulator import get_scenario, spawn


def main() -> None:
    with spawn(get_scenario("timing"), seed=2) as handle, HttpSession(SessionConfig(seed=2)) as session:
        login = session.pre_request(handle.login_url)
        form = extract_form(login, login.final_url)
        report = probe_usernames(session, form, ["root", "admin", "guest", "test"], rounds=5, seed=2)

    for trial in report.ranking:
        print(f"{trial.username:<8} median {trial.median:8.1f} ms")
    print("round leaders:", report.round_leaders)
    print("confirmed:", report.confirmed, "leader:", report.leader)


if __name__ == "__main__":
    main()
