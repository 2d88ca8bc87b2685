"""Forecast records: file ingestion and the preprocessing filters.

Two on-disk layouts are accepted, both carrying the same field names:

* line-delimited JSON, one record object per line;
* comma-separated values with a header row.

Lines that fail validation are collected as :class:`RecordError` values rather
than silently skipped.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence, TextIO

from . import resources
from .textproc import TokenizedText, find_quote_spans, tokenize

FIELDS = ("record_id", "author_id", "target_id", "timestamp", "estimate", "justification", "outcome", "domain_tag")


class Domain(str, enum.Enum):
    BINARY = "binary"
    EPS = "eps"


class CorpusError(Exception):
    """The corpus file cannot be read at all."""


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class ForecastRecord:
    record_id: str
    author_id: str
    target_id: str
    timestamp: datetime
    estimate: float
    justification: str = ""
    outcome: float | None = None
    domain_tag: Domain = Domain.BINARY

    def __post_init__(self):
        if not self.record_id:
            raise ValueError("record_id is empty")
        if not math.isfinite(self.estimate):
            raise ValueError(f"estimate {self.estimate!r} is not finite")
        if self.outcome is not None and not math.isfinite(self.outcome):
            raise ValueError(f"outcome {self.outcome!r} is not finite")
        if self.domain_tag is Domain.BINARY:
            if not 0.0 <= self.estimate <= 1.0:
                raise ValueError(f"estimate {self.estimate} outside [0, 1] for a binary record")
            if self.outcome is not None and self.outcome not in (0.0, 1.0):
                raise ValueError(f"outcome {self.outcome} is not 0 or 1 for a binary record")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(self, "timestamp", self.timestamp.astimezone(timezone.utc))

    @property
    def resolved(self) -> bool:
        return self.outcome is not None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "author_id": self.author_id,
            "target_id": self.target_id,
            "timestamp": format_timestamp(self.timestamp),
            "estimate": self.estimate,
            "justification": self.justification,
            "outcome": self.outcome,
            "domain_tag": self.domain_tag.value,
        }


def parse_timestamp(value: str) -> datetime:
    value = value.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def record_from_mapping(row: dict) -> ForecastRecord:
    missing = [f for f in FIELDS if f not in row and f not in ("justification", "outcome", "domain_tag")]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    outcome = row.get("outcome")
    if outcome in ("", None):
        outcome = None
    else:
        outcome = float(outcome)
    domain = row.get("domain_tag") or "binary"
    try:
        domain = Domain(domain)
    except ValueError:
        raise ValueError(f"unknown domain_tag {domain!r}") from None
    try:
        ts = parse_timestamp(str(row["timestamp"]))
    except ValueError:
        raise ValueError(f"bad timestamp {row['timestamp']!r}") from None
    try:
        estimate = float(row["estimate"])
    except (TypeError, ValueError):
        raise ValueError(f"bad estimate {row['estimate']!r}") from None
    return ForecastRecord(
        record_id=str(row["record_id"]),
        author_id=str(row["author_id"]),
        target_id=str(row["target_id"]),
        timestamp=ts,
        estimate=estimate,
        justification=row.get("justification") or "",
        outcome=outcome,
        domain_tag=domain,
    )


def _jsonl_rows(lines: Iterable[str]) -> Iterator[tuple[int, dict | None, str | None]]:
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, None, f"invalid JSON: {exc.msg}"
            continue
        if not isinstance(obj, dict):
            yield lineno, None, "expected a JSON object"
            continue
        if obj.get("_type", "record") != "record":
            continue  # report headers and other row kinds
        yield lineno, obj, None


def _csv_rows(lines: Iterable[str]) -> Iterator[tuple[int, dict | None, str | None]]:
    reader = csv.DictReader(lines)
    for row in reader:
        lineno = reader.line_num
        if None in row:
            yield lineno, None, "too many columns"
            continue
        yield lineno, row, None


def read_corpus(stream: Iterable[str], format: str = "jsonl") -> tuple[list[ForecastRecord], list[RecordError]]:
    """Parse records from an open text stream."""
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown corpus format {format!r}")
    rows = _jsonl_rows(stream) if format == "jsonl" else _csv_rows(stream)
    records: list[ForecastRecord] = []
    errors: list[RecordError] = []
    seen: set[str] = set()
    for lineno, row, problem in rows:
        if problem is None:
            try:
                rec = record_from_mapping(row)
            except ValueError as exc:
                problem = str(exc)
            else:
                if rec.record_id in seen:
                    problem = f"duplicate record_id {rec.record_id!r}"
                else:
                    seen.add(rec.record_id)
                    records.append(rec)
                    continue
        errors.append(RecordError(lineno, problem))
    return records, errors


def guess_format(path: str | Path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def load_corpus(path: str | Path, format: str | None = None) -> tuple[list[ForecastRecord], list[RecordError]]:
    """Load records from ``path``; returns ``(records, errors)`` in file order."""
    fmt = format or guess_format(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return read_corpus(fh, fmt)
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc


def write_corpus(records: Iterable[ForecastRecord], fh: TextIO, format: str = "jsonl") -> None:
    if format == "jsonl":
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    elif format == "csv":
        writer = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            row = rec.to_dict()
            row["outcome"] = "" if row["outcome"] is None else row["outcome"]
            writer.writerow(row)
    else:
        raise ValueError(f"unknown corpus format {format!r}")


def corpus_to_string(records: Iterable[ForecastRecord], format: str = "jsonl") -> str:
    buf = io.StringIO()
    write_corpus(records, buf, format)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Filters


@dataclass(frozen=True)
class CorpusFilterConfig:
    min_tokens_per_justification: int = 10
    max_quote_ratio: float = 0.5
    min_forecasts_per_author: int = 5
    require_english: bool = True

    def __post_init__(self):
        if self.min_tokens_per_justification < 0:
            raise ValueError("min_tokens_per_justification must be >= 0")
        if not 0.0 <= self.max_quote_ratio <= 1.0:
            raise ValueError("max_quote_ratio must lie in [0, 1]")
        if self.min_forecasts_per_author < 0:
            raise ValueError("min_forecasts_per_author must be >= 0")


@dataclass
class FilterReport:
    n_input: int = 0
    dropped_length: int = 0
    dropped_quotes: int = 0
    dropped_language: int = 0
    dropped_author: int = 0
    authors_dropped: int = 0
    retained: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_length + self.dropped_quotes + self.dropped_language + self.dropped_author

    def as_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "dropped_length": self.dropped_length,
            "dropped_quotes": self.dropped_quotes,
            "dropped_language": self.dropped_language,
            "dropped_author": self.dropped_author,
            "authors_dropped": self.authors_dropped,
            "retained": self.retained,
        }


def quote_ratio(text: str) -> float:
    """Fraction of non-whitespace characters that sit inside quotation marks."""
    total = sum(1 for c in text if not c.isspace())
    if total == 0:
        return 0.0
    quoted = sum(1 for s, e in find_quote_spans(text) for c in text[s:e] if not c.isspace())
    return quoted / total


def is_english(text: str, *, top_n: int = 20, min_hits: int = 2, min_letter_share: float = 0.4) -> bool:
    """Stop-word coverage heuristic for English.

    True when at least ``min_hits`` of the ``top_n`` most frequent tokens are
    English function words and ASCII letters make up at least
    ``min_letter_share`` of the non-whitespace characters.
    """
    chars = [c for c in text if not c.isspace()]
    if not chars:
        return False
    letters = sum(1 for c in chars if c.isascii() and c.isalpha())
    if letters / len(chars) < min_letter_share:
        return False
    counts = Counter(t.lower() for t in tokenize(text).tokens)
    fw = resources.function_words()
    hits = sum(1 for tok, _ in counts.most_common(top_n) if tok in fw)
    return hits >= min_hits


def apply_filters(
    records: Sequence[ForecastRecord],
    config: CorpusFilterConfig | None = None,
    tokenizer: Callable[[str], TokenizedText] = tokenize,
    language_check: Callable[[str], bool] = is_english,
) -> tuple[list[ForecastRecord], FilterReport]:
    """Drop short, heavily quoted, and non-English justifications, then thin authors.

    A record failing several per-record rules is counted once, under the first
    rule in the order length, quotes, language. The per-author minimum is
    applied to the records that survived those rules.
    """
    config = config or CorpusFilterConfig()
    report = FilterReport(n_input=len(records))
    survivors = []
    for rec in records:
        text = rec.justification
        if len(tokenizer(text).tokens) < config.min_tokens_per_justification:
            report.dropped_length += 1
        elif quote_ratio(text) > config.max_quote_ratio:
            report.dropped_quotes += 1
        elif config.require_english and not language_check(text):
            report.dropped_language += 1
        else:
            survivors.append(rec)

    per_author = Counter(r.author_id for r in survivors)
    kept = [r for r in survivors if per_author[r.author_id] >= config.min_forecasts_per_author]
    report.dropped_author = len(survivors) - len(kept)
    report.authors_dropped = sum(1 for n in per_author.values() if n < config.min_forecasts_per_author)
    report.retained = len(kept)
    return kept, report
