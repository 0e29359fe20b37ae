"""Bayesian marked point-process models for in-game event sequences."""

__version__ = "0.1.0"

from .events import (
    Dataset,
    GamePeriod,
    MarkTaxonomy,
    ParseError,
    ValidationReport,
    parse_events,
    serialize_events,
    split_train_test,
    validate,
    zone_of,
)
from .screening import PairCounts, Rule, RuleSet, count_pair_support, select_rules

__all__ = [
    "__version__",
    "Dataset",
    "GamePeriod",
    "MarkTaxonomy",
    "ParseError",
    "ValidationReport",
    "parse_events",
    "serialize_events",
    "split_train_test",
    "validate",
    "zone_of",
    "PairCounts",
    "Rule",
    "RuleSet",
    "count_pair_support",
    "select_rules",
]
