"""Weak-credential auditing for web login forms."""

from .engine import (
    AttemptLog,
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
from .events import AttemptKind, Blacklist, BlastEvent, Cause, classify_event, collect_hints, failure_cause
from .http_session import HttpSession, ResponsePage, SessionConfig
from .page_analyzer import FormDescriptor, LoginPageVerdict, extract_form, identify_login_page
from .prober import ProbeReport, probe_usernames
from .report import EventModel, ScanReport, compute_metrics, estimate_false_positive, run_batch

__version__ = "0.1.0"
