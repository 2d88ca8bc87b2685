"""Access to the data files bundled with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources as _ir
from typing import Any

_PKG = "forecastskill.data"

BUNDLED_LEXICONS = {
    "liwc": "liwc_fallback.tsv",
    "function": "function_categories.tsv",
    "hedges": "hedges.tsv",
    "connectives": "connectives.tsv",
    "sentiment": "sentiment.tsv",
    "financial": "financial.tsv",
}


def read_text(name: str) -> str:
    return _ir.files(_PKG).joinpath(name).read_text(encoding="utf-8")


def read_lines(name: str) -> list[str]:
    """Non-empty, non-comment lines of a bundled text file."""
    return [ln for ln in read_text(name).splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def lexicon(key: str):
    from .textproc import parse_lexicon

    fname = BUNDLED_LEXICONS[key]
    return parse_lexicon(read_text(fname).splitlines(), name=key, source=fname)


@lru_cache(maxsize=1)
def easy_words() -> frozenset[str]:
    return frozenset(w.lower() for w in read_lines("easy_words.txt"))


@lru_cache(maxsize=1)
def function_words() -> frozenset[str]:
    return frozenset(read_lines("function_words.txt"))


@lru_cache(maxsize=1)
def synth_templates() -> dict[str, Any]:
    return json.loads(read_text("synth_templates.json"))


def eps_pattern_text() -> str:
    return read_text("eps_patterns.txt")
