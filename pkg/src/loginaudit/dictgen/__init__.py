"""Credential candidate generation."""

from .adjust import GuessStream, adjust_dictionary, with_hints
from .dictionaries import (
    BASE_DICTIONARY,
    UNIVERSAL_PAYLOADS,
    CmsRule,
    Credential,
    Origin,
    RulesError,
    dynamic_dict,
    general_dict,
    load_rules,
    match_rule,
    parse_rules,
    universal_dict,
)
from .pcfg import (
    PcfgGrammar,
    TrainingError,
    generate_guesses,
    iter_guesses,
    load_corpus,
    password_probability,
    split_password,
    train_pcfg,
)
