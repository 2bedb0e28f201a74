"""Command-line entry point: ``loginaudit <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from .dictgen.adjust import with_hints
from .dictgen.dictionaries import RulesError, load_rules
from .dictgen.pcfg import PcfgGrammar, TrainingError, generate_guesses, load_corpus, train_pcfg
from .engine import BlastConfig
from .events import Blacklist
from .http_session import LENGTH_MODES, SessionConfig
from .report import (
    DEFAULT_CONCURRENCY,
    AuthorizationRequired,
    TargetsError,
    compute_metrics,
    load_targets,
    run_batch,
)
from .simulator import ScenarioError, SpawnError, get_scenario, load_scenario, scenario_catalog, spawn

logger = logging.getLogger("loginaudit")

EXIT_CONFIG = 2
EXIT_UNAUTHORIZED = 3


def _load_json(path: str) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8-sig"))
    except OSError as exc:
        raise SystemExit(f"error: cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: {path}:{exc.lineno}:{exc.colno}: {exc.msg}")


def cmd_scan(args: argparse.Namespace) -> int:
    try:
        targets = load_targets(args.targets)
        rules = load_rules(args.rules) if args.rules else None
        grammar = None
        if args.grammar:
            grammar = PcfgGrammar.load(args.grammar)
        elif args.corpus:
            grammar = train_pcfg(load_corpus(args.corpus))
        blacklist = Blacklist.load(args.blacklist) if args.blacklist else None
    except (TargetsError, RulesError, TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    config = BlastConfig(
        session=SessionConfig(timeout=args.timeout, seed=args.seed, length_mode=args.length_mode),
        usernames=args.user or ["admin"],
        site_host=args.site_host,
        grammar=grammar,
        pcfg_budget=args.pcfg_budget,
        universal=not args.no_universal,
        recheck=not args.no_recheck,
        blacklist=blacklist,
    )
    truth = _load_json(args.truth) if args.truth else None
    try:
        report = run_batch(
            targets, config, rules, concurrency=args.concurrency,
            authorized=args.i_am_authorized, ground_truth=truth,
        )
    except AuthorizationRequired as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_UNAUTHORIZED
    print(report.text_summary())
    if args.report:
        report.write(args.report)
        print(f"report written to {args.report}")
    if args.attempt_log:
        report.write_attempt_log(args.attempt_log)
        print(f"attempt log written to {args.attempt_log}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.list or not args.scenario:
        for sc in scenario_catalog():
            print(f"{sc.name:<22} {sc.expected_outcome:<18} {sc.description}")
        return 0
    try:
        if args.scenario.endswith(".json"):
            scenario = load_scenario(args.scenario)
        else:
            scenario = get_scenario(args.scenario)
        handle = spawn(scenario, port=args.port, host=args.host, seed=args.seed)
    except (KeyError, ScenarioError, SpawnError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{scenario.name} listening on {handle.login_url}", flush=True)
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        handle.stop()
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    try:
        grammar = train_pcfg(load_corpus(args.corpus))
    except (OSError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grammar.save(args.out)
    print(f"{len(grammar.structures)} structures, {len(grammar.segments)} segment tables -> {args.out}")
    return 0


def cmd_guess(args: argparse.Namespace) -> int:
    try:
        grammar = PcfgGrammar.load(args.grammar)
        if args.hint:
            grammar = with_hints(grammar, args.hint, args.boost)
        guesses = generate_guesses(grammar, args.n)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for pw, p in guesses:
        print(f"{p:.6g}\t{pw}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    report = _load_json(args.report)
    truth = _load_json(args.truth)
    try:
        metrics = compute_metrics(report["results"], truth)
    except (KeyError, TypeError) as exc:
        print(f"error: malformed report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    data = metrics.to_dict()
    print(f"n_success={metrics.n_success} n_fail={metrics.n_fail} n_error={metrics.n_error} "
          f"n_effect={metrics.n_effect} n_wrong={metrics.n_wrong}")
    for name in ("p_correct", "p_recognize"):
        value = data[name]
        shown = "N/A" if value is None else f"{value['percent']:.2f}% ({value['ratio']})"
        print(f"{name}: {shown}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loginaudit", description="Weak-credential auditing for web login forms.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="audit one URL or a file of targets")
    scan.add_argument("targets", help="login URL, or a file with one 'URL [site-host]' per line")
    scan.add_argument("--rules", help="custom CMS rules (JSON array)")
    scan.add_argument("--corpus", help="password corpus to train the guess grammar from")
    scan.add_argument("--grammar", help="saved grammar JSON (instead of --corpus)")
    scan.add_argument("--pcfg-budget", type=int, default=200, help="grammar guesses per username (default 200)")
    scan.add_argument("--seed", type=int, help="seed for wrong passwords and headers")
    scan.add_argument("--concurrency", type=int, default=DEFAULT_CONCURRENCY)
    scan.add_argument("--length-mode", choices=LENGTH_MODES, default="body")
    scan.add_argument("--no-universal", action="store_true", help="skip injection payloads")
    scan.add_argument("--no-recheck", action="store_true", help="accept candidates without the resend check")
    scan.add_argument("--user", action="append", help="username to try (repeatable, default admin)")
    scan.add_argument("--site-host", help="domain used for the dynamic dictionary")
    scan.add_argument("--blacklist", help="replacement keyword blacklist JSON")
    scan.add_argument("--timeout", type=float, default=10.0)
    scan.add_argument("--report", help="write the JSON report here")
    scan.add_argument("--attempt-log", help="write the CSV attempt log here")
    scan.add_argument("--truth", help="ground-truth JSON for metrics in the report")
    scan.add_argument("--i-am-authorized", action="store_true",
                      help="confirm you may test the non-loopback targets given")
    scan.set_defaults(func=cmd_scan)

    sim = sub.add_parser("simulate", help="serve a simulated login target")
    sim.add_argument("scenario", nargs="?", help="built-in scenario name or scenario JSON file")
    sim.add_argument("--port", type=int, default=8080)
    sim.add_argument("--host", default="127.0.0.1")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--list", action="store_true", help="list built-in scenarios")
    sim.set_defaults(func=cmd_simulate)

    train = sub.add_parser("train", help="train a guess grammar from a corpus")
    train.add_argument("corpus")
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    guess = sub.add_parser("guess", help="print the most probable guesses of a grammar")
    guess.add_argument("grammar")
    guess.add_argument("-n", type=int, default=20)
    guess.add_argument("--hint", action="append", help="hint keyword (repeatable)")
    guess.add_argument("--boost", type=float, default=0.5)
    guess.set_defaults(func=cmd_guess)

    metrics = sub.add_parser("metrics", help="score a report against ground truth")
    metrics.add_argument("report")
    metrics.add_argument("truth")
    metrics.set_defaults(func=cmd_metrics)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
