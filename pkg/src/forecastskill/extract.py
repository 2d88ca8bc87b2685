"""EPS forecast extraction from analyst notes.

Each sentence is masked (money amounts become ``<MONEY>``, time expressions
become ``<TIME>``) and then scanned left to right with token templates read
from a pattern file. At every position the patterns are tried in file order;
the first one that matches is emitted and the scan resumes after it.

Pattern file syntax, one pattern per line::

    [id:] template => (TIME1,MONEY1)(TIME2,MONEY2)...

Template tokens are separated by spaces. ``<TIME>`` and ``<MONEY>`` match a
masked entity; ``<BY-MASK>`` and ``<FROM-MASK>`` match the word "by"/"from"
followed by up to seven further tokens (as few as possible); ``a|b`` matches
either literal; a literal ending in ``?`` is optional. A possessive ``'s``
right after a ``<TIME>`` slot is skipped automatically. Literals match
case-insensitively.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import resources
from .textproc import tokenize

TIME_MASK, MONEY_MASK = "<TIME>", "<MONEY>"
SKIP_SLOTS = {"<BY-MASK>": "by", "<FROM-MASK>": "from"}
MAX_SKIP = 7

_BRACKETS = {"-LRB-": "(", "-RRB-": ")", "-LSB-": "[", "-RSB-": "]", "-LCB-": "{", "-RCB-": "}"}
_BRACKET_RE = re.compile("|".join(map(re.escape, _BRACKETS)))

_NUM = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?"
_MONEY_RES = (
    re.compile(rf"\(\s?\$\s?(?:{_NUM})\s?\)"),
    re.compile(rf"-?\$\s?-?(?:{_NUM})(?![\d])"),
)
_YY = r"(?:'\s?)?\d{2}(?:\d{2})?"
_TIME_RES = (
    re.compile(rf"\b(?:full|fiscal|calendar)(?:[- ]year)?\s+(?:(?:19|20)\d{{2}}|'\d{{2}})\b", re.I),
    re.compile(rf"\bF[Yy]\s?{_YY}\b"),
    re.compile(rf"\bC[Yy]\s?{_YY}\b"),
    re.compile(rf"\b[1-4]Q\s?{_YY}\b"),
    re.compile(rf"\bQ[1-4](?:\s?{_YY})?\b"),
    re.compile(r"\b\d+-(?:month|year|quarter|week)\b", re.I),
    re.compile(r"(?<![\w'])'\d{2}\b"),
    re.compile(r"\b(?:19|20)\d{2}\b"),
)
_MASKED_TOKEN_RE = re.compile(r"<TIME>|<MONEY>|\w+(?=n't\b)|n't|'s\b|\w+(?:[-.]\w+)*|\S")


# ---------------------------------------------------------------------------
# Masking


@dataclass(frozen=True)
class EntitySpan:
    kind: str  # "TIME" or "MONEY"
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class MaskedSentence:
    """A sentence with its entities masked.

    ``masked_text`` is the original text with each entity replaced by its
    mask; ``spans`` lists the entities in order, with offsets into ``text``.
    ``tokens`` is the token stream the patterns run over (bracket tokens such
    as ``-LRB-`` already mapped to parentheses) and ``token_entity`` gives,
    per token, the index of its entity or -1.
    """

    text: str
    masked_text: str
    tokens: tuple[str, ...]
    token_entity: tuple[int, ...]
    spans: tuple[EntitySpan, ...]

    def unmask(self) -> str:
        out, pos = [], 0
        for s in self.spans:
            mask = TIME_MASK if s.kind == "TIME" else MONEY_MASK
            i = self.masked_text.index(mask, pos)
            out.append(self.masked_text[pos:i])
            out.append(s.surface)
            pos = i + len(mask)
        out.append(self.masked_text[pos:])
        return "".join(out)


def normalize_brackets(text: str) -> tuple[str, list[tuple[int, int]]]:
    """Map ``-LRB-`` style tokens to brackets.

    Also returns, for each output character, the ``(start, end)`` range it
    came from in ``text``.
    """
    out, ranges, pos = [], [], 0
    for m in _BRACKET_RE.finditer(text):
        out.append(text[pos : m.start()])
        ranges.extend((i, i + 1) for i in range(pos, m.start()))
        out.append(_BRACKETS[m.group()])
        ranges.append((m.start(), m.end()))
        pos = m.end()
    out.append(text[pos:])
    ranges.extend((i, i + 1) for i in range(pos, len(text)))
    return "".join(out), ranges


def _candidates(text: str) -> list[tuple[int, int, str]]:
    found = []
    for kind, regexes in (("MONEY", _MONEY_RES), ("TIME", _TIME_RES)):
        for rx in regexes:
            found.extend((m.start(), m.end(), kind) for m in rx.finditer(text) if m.end() > m.start())
    return found


def find_entities(text: str) -> list[EntitySpan]:
    """Money and time spans, leftmost-longest and non-overlapping."""
    norm, ranges = normalize_brackets(text)
    chosen, last_end = [], 0
    for start, end, kind in sorted(_candidates(norm), key=lambda c: (c[0], -(c[1] - c[0]), c[2])):
        if start < last_end:
            continue
        o_start, o_end = ranges[start][0], ranges[end - 1][1]
        chosen.append(EntitySpan(kind, text[o_start:o_end], o_start, o_end))
        last_end = end
    return chosen


def mask_entities(sentence: str) -> MaskedSentence:
    """Mask money and time expressions.

    >>> mask_entities("our '16 EPS estimate of $2.01").masked_text
    'our <TIME> EPS estimate of <MONEY>'
    """
    spans = find_entities(sentence)
    parts, pos = [], 0
    for s in spans:
        parts.append(sentence[pos : s.start])
        parts.append(TIME_MASK if s.kind == "TIME" else MONEY_MASK)
        pos = s.end
    parts.append(sentence[pos:])
    masked = "".join(parts)
    norm, _ = normalize_brackets(masked)
    tokens, owners, k = [], [], 0
    for m in _MASKED_TOKEN_RE.finditer(norm):
        tok = m.group()
        tokens.append(tok)
        if tok in (TIME_MASK, MONEY_MASK):
            owners.append(k)
            k += 1
        else:
            owners.append(-1)
    return MaskedSentence(sentence, masked, tuple(tokens), tuple(owners), tuple(spans))


def parse_money(surface: str) -> float:
    """Numeric value of a money span; parentheses or a minus sign mean negative.

    >>> parse_money("($1,234.50)")
    -1234.5
    """
    s = normalize_brackets(surface)[0].replace(" ", "")
    negative = (s.startswith("(") and s.endswith(")")) or "-" in s
    digits = re.sub(r"[^\d.]", "", s)
    if not digits:
        raise ValueError(f"no amount in {surface!r}")
    value = float(digits)
    return -value if negative else value


# ---------------------------------------------------------------------------
# Patterns


class PatternSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Element:
    kind: str  # "slot", "literal", "skip"
    value: tuple[str, ...] = ()
    optional: bool = False


@dataclass(frozen=True)
class ExtractionPattern:
    pattern_id: str
    elements: tuple[Element, ...]
    emission: tuple[tuple[int, int], ...]  # (time slot index, money slot index), 0-based
    source: str = ""

    @property
    def n_time(self) -> int:
        return sum(1 for e in self.elements if e.kind == "slot" and e.value == ("TIME",))

    @property
    def n_money(self) -> int:
        return sum(1 for e in self.elements if e.kind == "slot" and e.value == ("MONEY",))


_LINE_RE = re.compile(r"^\s*(?:(?P<id>[\w.-]+)\s*:\s+)?(?P<template>.+?)\s*=>\s*(?P<emission>.+?)\s*$")
_PAIR_RE = re.compile(r"\(\s*TIME(\d+)\s*,\s*MONEY(\d+)\s*\)")


def parse_pattern(line: str, lineno: int = 0, source: str = "<patterns>", require_anchor: bool = True) -> ExtractionPattern:
    where = f"{source}:{lineno}"
    m = _LINE_RE.match(line)
    if not m:
        raise PatternSyntaxError(f"{where}: expected 'template => emission'")
    elements = []
    for tok in m.group("template").split():
        if tok in (TIME_MASK, MONEY_MASK):
            elements.append(Element("slot", (tok[1:-1],)))
        elif tok in SKIP_SLOTS:
            elements.append(Element("skip", (SKIP_SLOTS[tok],)))
        elif tok.startswith("<") and tok.endswith(">"):
            raise PatternSyntaxError(f"{where}: unknown slot {tok}")
        else:
            optional = tok.endswith("?") and len(tok) > 1
            alts = tuple(a.lower() for a in (tok[:-1] if optional else tok).split("|"))
            if not all(alts):
                raise PatternSyntaxError(f"{where}: empty alternative in {tok!r}")
            elements.append(Element("literal", alts, optional))
    if not elements:
        raise PatternSyntaxError(f"{where}: empty template")
    if require_anchor and not any(e.kind == "literal" and "eps" in e.value and not e.optional for e in elements):
        raise PatternSyntaxError(f"{where}: template lacks the required EPS anchor")
    emission_text = m.group("emission")
    pairs = [(int(t), int(v)) for t, v in _PAIR_RE.findall(emission_text)]
    if not pairs or _PAIR_RE.sub("", emission_text).strip():
        raise PatternSyntaxError(f"{where}: emission must be a sequence of (TIMEi,MONEYj)")
    pat = ExtractionPattern(m.group("id") or f"line{lineno}", tuple(elements), (), source)
    for t, v in pairs:
        if not (1 <= t <= pat.n_time and 1 <= v <= pat.n_money):
            raise PatternSyntaxError(f"{where}: emission (TIME{t},MONEY{v}) refers to a missing slot")
    return ExtractionPattern(pat.pattern_id, pat.elements, tuple((t - 1, v - 1) for t, v in pairs), source)


def parse_patterns(text: str, source: str = "<patterns>", require_anchor: bool = True) -> list[ExtractionPattern]:
    out, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        pat = parse_pattern(line, lineno, source, require_anchor)
        if pat.pattern_id in seen:
            raise PatternSyntaxError(f"{source}:{lineno}: duplicate pattern id {pat.pattern_id!r}")
        seen.add(pat.pattern_id)
        out.append(pat)
    return out


def load_patterns(path: str | Path | None = None, require_anchor: bool = True) -> list[ExtractionPattern]:
    """Patterns from ``path``, or the bundled set when ``path`` is None."""
    if path is None:
        return parse_patterns(resources.eps_pattern_text(), "eps_patterns.txt", require_anchor)
    return parse_patterns(Path(path).read_text(encoding="utf-8"), str(path), require_anchor)


def _match(elements, ei: int, tokens, low, ti: int, slots: list[int]):
    """Backtracking match; returns (end token index, slot token indices) or None."""
    if ei == len(elements):
        return ti, slots
    el = elements[ei]
    if el.kind == "slot":
        mask = f"<{el.value[0]}>"
        if ti < len(tokens) and tokens[ti] == mask:
            nxt = ti + 1
            if el.value[0] == "TIME" and nxt < len(tokens) and low[nxt] == "'s":
                nxt += 1
            return _match(elements, ei + 1, tokens, low, nxt, slots + [ti])
        return None
    if el.kind == "literal":
        if ti < len(tokens) and low[ti] in el.value:
            hit = _match(elements, ei + 1, tokens, low, ti + 1, slots)
            if hit is not None:
                return hit
        return _match(elements, ei + 1, tokens, low, ti, slots) if el.optional else None
    # skip slot: its keyword, then as few extra tokens as will let the rest match
    if ti >= len(tokens) or low[ti] != el.value[0]:
        return None
    for extra in range(MAX_SKIP + 1):
        if ti + 1 + extra > len(tokens):
            break
        hit = _match(elements, ei + 1, tokens, low, ti + 1 + extra, slots)
        if hit is not None:
            return hit
    return None


@dataclass(frozen=True)
class EpsEstimate:
    time_label: str
    value: float
    record_id: str
    pattern_id: str
    span: tuple[int, int]
    time_span: tuple[int, int]
    value_span: tuple[int, int]
    value_text: str = ""

    def as_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "time_label": self.time_label,
            "year": normalize_time_label(self.time_label),
            "value": self.value,
            "value_text": self.value_text,
            "pattern_id": self.pattern_id,
            "span": list(self.span),
        }


def match_sentence(masked: MaskedSentence, patterns: Sequence[ExtractionPattern]):
    """Non-overlapping matches as (pattern, slot token indices), left to right."""
    tokens = masked.tokens
    low = [t.lower() for t in tokens]
    pos, out = 0, []
    while pos < len(tokens):
        for pat in patterns:
            hit = _match(pat.elements, 0, tokens, low, pos, [])
            if hit is not None and hit[0] > pos:
                out.append((pat, hit[1]))
                pos = hit[0]
                break
        else:
            pos += 1
    return out


def extract_eps(note: str, patterns: Sequence[ExtractionPattern] | None = None, record_id: str = "") -> list[EpsEstimate]:
    """All EPS estimates stated in ``note``, in text order."""
    patterns = load_patterns() if patterns is None else patterns
    tok = tokenize(note)
    out = []
    for s_start, s_end in tok.sentence_char_spans():
        masked = mask_entities(note[s_start:s_end])
        for pat, slot_tokens in match_sentence(masked, patterns):
            times = [masked.spans[masked.token_entity[t]] for t in slot_tokens if masked.tokens[t] == TIME_MASK]
            money = [masked.spans[masked.token_entity[t]] for t in slot_tokens if masked.tokens[t] == MONEY_MASK]
            for ti, mi in pat.emission:
                t, m = times[ti], money[mi]
                tspan = (s_start + t.start, s_start + t.end)
                mspan = (s_start + m.start, s_start + m.end)
                out.append(
                    EpsEstimate(
                        time_label=t.surface,
                        value=parse_money(m.surface),
                        record_id=record_id,
                        pattern_id=pat.pattern_id,
                        span=(min(tspan[0], mspan[0]), max(tspan[1], mspan[1])),
                        time_span=tspan,
                        value_span=mspan,
                        value_text=m.surface,
                    )
                )
    return out


# ---------------------------------------------------------------------------
# Time labels and selection

_LABEL_RES = (
    re.compile(r"^(?:full|fiscal|calendar)(?:[- ]year)?\s+(?P<y>(?:19|20)\d{2}|'\d{2})$", re.I),
    re.compile(r"^(?:F|C)Y\s?(?P<y>'?\s?\d{2}(?:\d{2})?)$", re.I),
    re.compile(r"^[1-4]Q\s?(?P<y>'?\s?\d{2}(?:\d{2})?)$", re.I),
    re.compile(r"^Q[1-4]\s?(?P<y>'?\s?\d{2}(?:\d{2})?)$", re.I),
    re.compile(r"^(?P<y>'\d{2})$"),
    re.compile(r"^(?P<y>(?:19|20)\d{2})$"),
)


def normalize_time_label(label: str) -> int | None:
    """Fiscal year named by a time label, or None for relative/bare forms.

    >>> [normalize_time_label(x) for x in ("'16", "FY 17", "4Q17", "2018", "12-month")]
    [2016, 2017, 2017, 2018, None]
    """
    label = " ".join(label.split())
    for rx in _LABEL_RES:
        m = rx.match(label)
        if m:
            digits = re.sub(r"\D", "", m.group("y"))
            return 2000 + int(digits) if len(digits) == 2 else int(digits)
    return None


def earliest_forecast(estimates: Iterable[EpsEstimate], year_range: tuple[int, int] = (2014, 2018)) -> EpsEstimate | None:
    """Estimate for the earliest fiscal year inside ``year_range``; ties by position."""
    lo, hi = year_range
    best, best_key = None, None
    skipped = []
    for est in estimates:
        year = normalize_time_label(est.time_label)
        if year is None:
            skipped.append(est.time_label)
            continue
        if not lo <= year <= hi:
            continue
        key = (year, est.span[0])
        if best_key is None or key < best_key:
            best, best_key = est, key
    if skipped:
        warnings.warn(f"skipped time label(s) without a year: {', '.join(skipped)}", UserWarning, stacklevel=2)
    return best


# ---------------------------------------------------------------------------
# Evaluation


def _gold_key(record_id: str, label: str, value: float) -> tuple:
    year = normalize_time_label(label)
    return (record_id, year if year is not None else " ".join(label.split()), round(float(value), 6))


def evaluate_extraction(
    predicted: Iterable[EpsEstimate | tuple[str, str, float]], gold: Iterable[tuple[str, str, float]]
) -> tuple[float | None, float]:
    """(precision, recall) under exact match of record, year and value.

    Precision is None when nothing was predicted.
    """
    def key(p):
        if isinstance(p, EpsEstimate):
            return _gold_key(p.record_id, p.time_label, p.value)
        return _gold_key(*p)

    gold_c = Counter(_gold_key(*g) for g in gold)
    pred_c = Counter(key(p) for p in predicted)
    if not gold_c:
        raise ValueError("gold set is empty; recall undefined")
    correct = sum((gold_c & pred_c).values())
    n_pred = sum(pred_c.values())
    precision = correct / n_pred if n_pred else None
    return precision, correct / sum(gold_c.values())


def load_gold(path: str | Path) -> list[tuple[str, str, float]]:
    """Tab-separated ``record_id``, ``time_label``, ``value`` rows."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if lineno == 1 and parts[0] == "record_id":
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected record_id<TAB>time_label<TAB>value")
            raw = parts[2].strip()
            try:
                value = parse_money(raw) if "$" in raw else float(raw)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad value {raw!r}") from None
            if not math.isfinite(value):
                raise ValueError(f"{path}:{lineno}: value must be finite")
            out.append((parts[0], parts[1], value))
    return out
