"""Span-level NER evaluation with two small from-scratch taggers."""
from .corpus import Dataset, Sentence, parse_conll, read_conll, tag_distribution, write_conll
from .errors import SpanlabError
from .metrics import EvalReport, evaluate, render_table
from .scheme import FULL, SIMPLE, TagScheme, get_scheme
from .spans import Policy, Span, extract_spans, full_to_simple, spans_to_tags

__version__ = "0.1.0"

__all__ = [
    "FULL",
    "SIMPLE",
    "Dataset",
    "EvalReport",
    "Policy",
    "Sentence",
    "Span",
    "SpanlabError",
    "TagScheme",
    "evaluate",
    "extract_spans",
    "full_to_simple",
    "get_scheme",
    "parse_conll",
    "read_conll",
    "render_table",
    "spans_to_tags",
    "tag_distribution",
    "write_conll",
]
