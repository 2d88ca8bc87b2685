"""Deterministic text primitives shared by the metric and model code.

Tokenization follows Penn-Treebank conventions closely enough that n-grams such
as ``do n't`` or ``it 's`` come out the way they do in treebank-tokenized text.
Everything here is a pure function of its input; lexicons are immutable once
loaded.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import resources

__all__ = [
    "TokenizedText",
    "tokenize",
    "find_quote_spans",
    "count_syllables",
    "is_word",
    "PosCategory",
    "pos_categorize",
    "pos_tags",
    "penn_to_category",
    "load_tag_file",
    "LexiconEntry",
    "CategoryLexicon",
    "LexiconFormatError",
    "parse_lexicon",
    "load_lexicon",
    "match_lexicon",
    "lexicon_scores",
    "count_matching",
]

# Abbreviations whose trailing period is part of the token.
ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof sr jr st vs etc inc corp co ltd jan feb mar apr jun jul aug
    sep sept oct nov dec gen gov sen rep rev lt col sgt capt cmdr adm approx dept est
    fig mt ft""".split()
)

_CLITICS = r"(?:s|re|ve|ll|d|m|S|RE|VE|LL|D|M)"
_APOS = "'’"

_TOKEN_RE = re.compile(
    rf"""
    -[LR][RCS]B-                                      # treebank brackets
  | (?:[A-Za-z]\.){{2,}}(?![A-Za-z])                 # initialisms: U.S., e.g.
  | [$€£]?\d+(?:[.,:/]\d+)*%?(?!\w|-\w)              # numbers, money, percents
  | [{_APOS}]\d\d(?!\w)                               # '16 style years
  | \w+(?=n[{_APOS}]t\b)                              # do|n't
  | n[{_APOS}]t\b
  | [{_APOS}]{_CLITICS}\b                             # 's 're 'll ...
  | \w+(?:[{_APOS}](?!{_CLITICS}\b)\w+)*(?:-\w+)*    # words, O'Brien, 12-month
  | \.\.\.|…|--+|—|–
  | [^\w\s]
    """,
    re.VERBOSE,
)
# Title-case abbreviations (Mr. Smith) need a case-insensitive pass of their own.
_ABBR_RE = re.compile(
    rf"(?<![\w.])(?:{'|'.join(sorted(ABBREVIATIONS, key=len, reverse=True))})\.(?=\s)",
    re.IGNORECASE,
)

_TERMINATORS = frozenset({".", "!", "?", "...", "…"})
_CLOSERS = frozenset({'"', "”", "’", "'", ")", "]", "}"})
_OPENERS = "\"“‘'([{"


@dataclass(frozen=True)
class TokenizedText:
    """Tokens of one text plus sentence and quotation structure.

    ``sentence_boundaries`` holds the exclusive end index of each sentence, so
    the last boundary equals the token count. ``spans`` are character offsets
    of each token in ``text``.
    """

    tokens: tuple[str, ...]
    sentence_boundaries: tuple[int, ...]
    quote_spans: tuple[tuple[int, int], ...] = ()
    spans: tuple[tuple[int, int], ...] = ()
    text: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_sentences(self) -> int:
        return len(self.sentence_boundaries)

    def sentences(self) -> list[tuple[str, ...]]:
        out, start = [], 0
        for end in self.sentence_boundaries:
            out.append(self.tokens[start:end])
            start = end
        return out

    def sentence_char_spans(self) -> list[tuple[int, int]]:
        out, start = [], 0
        for end in self.sentence_boundaries:
            out.append((self.spans[start][0], self.spans[end - 1][1]))
            start = end
        return out

    def words(self) -> list[str]:
        """Letter-bearing tokens (the readability formulas count these)."""
        return [t for t in self.tokens if is_word(t)]

    def sentence_initial(self) -> list[bool]:
        flags = [False] * len(self.tokens)
        start = 0
        for end in self.sentence_boundaries:
            # skip opening punctuation when deciding which token starts the sentence
            i = start
            while i < end and not any(c.isalnum() for c in self.tokens[i]):
                i += 1
            if i < end:
                flags[i] = True
            start = end
        return flags


def is_word(token: str) -> bool:
    return any(c.isalpha() for c in token)


def _raw_tokens(text: str) -> list[tuple[int, int]]:
    abbr = {m.start(): m.end() for m in _ABBR_RE.finditer(text)}
    spans: list[tuple[int, int]] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m_end = abbr.get(pos)
        if m_end is None:
            m = _TOKEN_RE.match(text, pos)
            m_end = m.end() if m and m.end() > pos else pos + 1
        spans.append((pos, m_end))
        pos = m_end
    return spans


def _sentence_boundaries(text: str, tokens: Sequence[str], spans: Sequence[tuple[int, int]]) -> list[int]:
    bounds: list[int] = []
    i, n = 0, len(tokens)
    while i < n:
        if tokens[i] in _TERMINATORS:
            j = i + 1
            while j < n and tokens[j] in _TERMINATORS and spans[j][0] == spans[j - 1][1]:
                j += 1
            while j < n and tokens[j] in _CLOSERS and spans[j][0] == spans[j - 1][1]:
                j += 1
            rest = text[spans[j - 1][1]:]
            if not rest.strip():
                bounds.append(n)
                break
            if rest[:1].isspace():
                nxt = rest.lstrip().lstrip(_OPENERS)
                if nxt[:1].isupper():
                    bounds.append(j)
            i = j
            continue
        i += 1
    if n and (not bounds or bounds[-1] != n):
        bounds.append(n)
    return bounds


def tokenize(text: str) -> TokenizedText:
    """Split ``text`` into tokens, sentences, and quoted spans.

    >>> tokenize("U.S. will act. Soon.").sentences()
    [('U.S.', 'will', 'act', '.'), ('Soon', '.')]
    """
    spans = _raw_tokens(text)
    tokens = [text[s:e] for s, e in spans]
    bounds = _sentence_boundaries(text, tokens, spans)
    return TokenizedText(
        tokens=tuple(tokens),
        sentence_boundaries=tuple(bounds),
        quote_spans=tuple(find_quote_spans(text)),
        spans=tuple(spans),
        text=text,
    )


def find_quote_spans(text: str) -> list[tuple[int, int]]:
    """Character ranges covered by double-quoted passages, marks included.

    Straight quotes toggle; curly quotes open and close. An unpaired opening
    mark runs to the end of the text.
    """
    spans = []
    start = None
    for i, ch in enumerate(text):
        if start is None:
            if ch in ('"', "“"):
                start = i
        elif ch in ('"', "”"):
            spans.append((start, i + 1))
            start = None
    if start is not None:
        spans.append((start, len(text)))
    return spans


_VOWEL_GROUP = re.compile(r"[aeiouy]+")


def count_syllables(word: str) -> int:
    """Vowel-group syllable estimate.

    Counts maximal runs of ``aeiouy``; a terminal ``e`` after a consonant is
    treated as silent unless it is the only vowel group.

    >>> count_syllables("missile")
    2
    """
    letters = "".join(c for c in word.lower() if c.isalpha())
    if not letters:
        raise ValueError(f"no letters in {word!r}")
    n = len(_VOWEL_GROUP.findall(letters))
    if n > 1 and letters.endswith("e") and len(letters) > 1 and letters[-2] not in "aeiouy":
        n -= 1
    return max(n, 1)


# ---------------------------------------------------------------------------
# Part-of-speech categories


class PosCategory(str, enum.Enum):
    CARDINAL = "cardinal"
    NOUN = "noun"
    PREPOSITION = "preposition"
    PRONOUN = "pronoun"
    FIRST_PERSON_PRONOUN = "first_person_pronoun"
    VERB = "verb"
    OTHER = "other"


FIRST_PERSON = frozenset({"i", "me", "mine", "my", "myself"})
PRONOUNS = frozenset(
    """you your yours yourself yourselves he him his himself she her hers herself it its
    itself we us our ours ourselves they them their theirs themselves""".split()
)
PREPOSITIONS = frozenset(
    """about above across after against along amid among around at before behind below
    beneath beside besides between beyond by despite during except for from in inside
    into near of off on onto outside over per since through throughout till toward
    towards under underneath unlike until upon via with within without""".split()
)
NUMBER_WORDS = frozenset(
    """zero one two three four five six seven eight nine ten eleven twelve thirteen
    fourteen fifteen sixteen seventeen eighteen nineteen twenty thirty forty fifty sixty
    seventy eighty ninety hundred thousand million billion trillion dozen""".split()
)
MODALS = frozenset("will would shall should can could may might must wo ca 'll 'd".split())
DETERMINERS = frozenset(
    """the a an this that these those my your his her its our their some any no every
    each another""".split()
)
_SUBJECTS = frozenset("i we they you he she it".split())
_CARDINAL_RE = re.compile(r"^[$€£]?[+-]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)%?$")
_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "ism")
_VERB_SUFFIXES = ("ize", "izes", "ized", "izing", "ise", "ised", "ising")


@lru_cache(maxsize=1)
def _pos_lexicon() -> dict[str, tuple[PosCategory, ...]]:
    out = {}
    for line in resources.read_lines("pos_lexicon.tsv"):
        word, tags = line.split("\t")
        out[word] = tuple(PosCategory(t) for t in tags.split("|"))
    return out


def _lemma_candidates(low: str) -> list[tuple[str, PosCategory | None]]:
    """Possible base forms of an inflected word with the class the ending implies."""
    out: list[tuple[str, PosCategory | None]] = []
    if low.endswith("ies") and len(low) > 4:
        out.append((low[:-3] + "y", None))
    if low.endswith("es") and len(low) > 3:
        out.append((low[:-2], None))
    if low.endswith("s") and not low.endswith("ss") and len(low) > 2:
        out.append((low[:-1], None))
    for suf in ("ed", "ing"):
        if low.endswith(suf) and len(low) > len(suf) + 2:
            stem = low[: -len(suf)]
            out.append((stem, PosCategory.VERB))
            out.append((stem + "e", PosCategory.VERB))
            if len(stem) > 2 and stem[-1] == stem[-2]:
                out.append((stem[:-1], PosCategory.VERB))
            if suf == "ed" and stem.endswith("i"):
                out.append((stem[:-1] + "y", PosCategory.VERB))
    return out


def _resolve(tags: tuple[PosCategory, ...], prev: str | None) -> PosCategory:
    if len(tags) == 1 or prev is None:
        return tags[0]
    p = prev.lower()
    if p in MODALS or p == "to" or p in _SUBJECTS:
        return PosCategory.VERB if PosCategory.VERB in tags else tags[0]
    if p in DETERMINERS:
        return PosCategory.NOUN if PosCategory.NOUN in tags else tags[0]
    return tags[0]


def pos_categorize(token: str, prev: str | None = None, sentence_initial: bool = True) -> PosCategory:
    """Coarse part-of-speech category of ``token``.

    Closed classes (pronouns, prepositions, numbers) come from fixed lists; open
    classes from the bundled lexicon, then suffix rules. A capitalized token
    that does not start a sentence is taken to be a proper noun and reported as
    ``OTHER`` so that noun rates approximate common nouns only.
    """
    low = token.lower()
    if low in FIRST_PERSON:
        return PosCategory.FIRST_PERSON_PRONOUN
    if low in PRONOUNS:
        return PosCategory.PRONOUN
    if low in PREPOSITIONS:
        return PosCategory.PREPOSITION
    if _CARDINAL_RE.match(token) or low in NUMBER_WORDS:
        return PosCategory.CARDINAL
    if not low.isalpha() and not re.fullmatch(r"[a-z]+(?:-[a-z]+)+", low):
        return PosCategory.OTHER
    if token[0].isupper() and not sentence_initial:
        return PosCategory.OTHER
    lex = _pos_lexicon()
    if low in lex:
        return _resolve(lex[low], prev)
    for lemma, implied in _lemma_candidates(low):
        if lemma in lex:
            tags = lex[lemma]
            if implied is not None:
                return implied if implied in tags else _resolve(tags, prev)
            return _resolve(tags, prev)
    if low.endswith(_NOUN_SUFFIXES) or re.search(r"(?:tion|sion|ment|ness|ity)s$", low):
        return PosCategory.NOUN
    if low.endswith(_VERB_SUFFIXES):
        return PosCategory.VERB
    for suf in ("ed", "ing"):
        if low.endswith(suf) and len(low) - len(suf) >= 3:
            return PosCategory.VERB
    return PosCategory.OTHER


_PENN = {
    "CD": PosCategory.CARDINAL,
    "NN": PosCategory.NOUN,
    "NNS": PosCategory.NOUN,
    "IN": PosCategory.PREPOSITION,
    "PRP": PosCategory.PRONOUN,
    "PRP$": PosCategory.PRONOUN,
    "VB": PosCategory.VERB,
    "VBD": PosCategory.VERB,
    "VBG": PosCategory.VERB,
    "VBN": PosCategory.VERB,
    "VBP": PosCategory.VERB,
    "VBZ": PosCategory.VERB,
}


def penn_to_category(tag: str, token: str) -> PosCategory:
    """Map a Penn Treebank tag from an external tagger onto our categories."""
    cat = _PENN.get(tag, PosCategory.OTHER)
    if cat is PosCategory.PRONOUN and token.lower() in FIRST_PERSON:
        return PosCategory.FIRST_PERSON_PRONOUN
    return cat


def load_tag_file(path: str | Path) -> list[list[tuple[str, str]]]:
    """Read ``token<TAB>tag`` lines; blank lines separate documents."""
    docs: list[list[tuple[str, str]]] = [[]]
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                if docs[-1]:
                    docs.append([])
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected token<TAB>tag")
            docs[-1].append((parts[0], parts[1]))
    return [d for d in docs if d]


def pos_tags(tok: TokenizedText) -> list[PosCategory]:
    initial = tok.sentence_initial()
    out = []
    prev = None
    for t, first in zip(tok.tokens, initial):
        out.append(pos_categorize(t, prev=prev, sentence_initial=first))
        prev = t
    return out


# ---------------------------------------------------------------------------
# Category lexicons


class LexiconFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LexiconEntry:
    pattern: str
    labels: Mapping[str, float | None]  # category -> optional score

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(self.labels)


@dataclass(frozen=True)
class CategoryLexicon:
    """Patterns mapped to category labels.

    Literal patterns win over wildcard ones; among wildcards the longest prefix
    wins. Multi-word patterns are matched before single tokens starting at the
    same position.
    """

    name: str
    literals: Mapping[str, LexiconEntry]
    prefixes: Mapping[str, LexiconEntry]
    phrases: Mapping[str, tuple[tuple[tuple[str, ...], LexiconEntry], ...]] = field(default_factory=dict)
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_max_prefix", max(map(len, self.prefixes), default=0))

    def __len__(self) -> int:
        return len(self.literals) + len(self.prefixes) + sum(len(v) for v in self.phrases.values())

    def lookup(self, token: str) -> LexiconEntry | None:
        low = token.lower()
        hit = self.literals.get(low)
        if hit is not None:
            return hit
        for k in range(min(len(low), self._max_prefix), 0, -1):
            hit = self.prefixes.get(low[:k])
            if hit is not None:
                return hit
        return None

    def scan(self, tokens: Sequence[str]) -> list[tuple[int, int, LexiconEntry]]:
        """Non-overlapping matches, greedy left to right."""
        low = [t.lower() for t in tokens]
        out = []
        i = 0
        while i < len(low):
            matched = None
            for parts, entry in self.phrases.get(low[i], ()):
                n = len(parts)
                if i + n <= len(low) and _phrase_matches(parts, low[i:i + n]):
                    matched = (i, i + n, entry)
                    break
            if matched is None:
                entry = self.lookup(low[i])
                if entry is not None:
                    matched = (i, i + 1, entry)
            if matched is not None:
                out.append(matched)
                i = matched[1]
            else:
                i += 1
        return out


def _phrase_matches(parts: tuple[str, ...], window: Sequence[str]) -> bool:
    for p, t in zip(parts, window):
        if p.endswith("*"):
            if not t.startswith(p[:-1]):
                return False
        elif p != t:
            return False
    return True


def parse_lexicon(lines: Iterable[str], name: str = "lexicon", source: str = "<lexicon>") -> CategoryLexicon:
    """Parse ``pattern<TAB>category[<TAB>score]`` lines."""
    raw: dict[str, dict[str, float | None]] = {}
    cats: list[str] = []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise LexiconFormatError(f"{source}:{lineno}: expected pattern<TAB>category[<TAB>score]")
        pattern = " ".join(parts[0].lower().split())
        category = parts[1].strip()
        if not pattern or pattern == "*" or any(not p.rstrip("*") for p in pattern.split()):
            raise LexiconFormatError(f"{source}:{lineno}: empty pattern")
        if "*" in pattern.replace(" ", "")[:-1] or ("*" in pattern and not pattern.endswith("*")):
            raise LexiconFormatError(f"{source}:{lineno}: wildcard only allowed at the end of a pattern")
        if not category:
            raise LexiconFormatError(f"{source}:{lineno}: empty category")
        score = None
        if len(parts) == 3:
            try:
                score = float(parts[2])
            except ValueError:
                raise LexiconFormatError(f"{source}:{lineno}: bad score {parts[2]!r}") from None
            if not math.isfinite(score):
                raise LexiconFormatError(f"{source}:{lineno}: score must be finite")
        labels = raw.setdefault(pattern, {})
        if category in labels:
            raise LexiconFormatError(f"{source}:{lineno}: duplicate entry {pattern!r} -> {category!r}")
        labels[category] = score
        if category not in cats:
            cats.append(category)

    literals, prefixes = {}, {}
    phrases: dict[str, list[tuple[tuple[str, ...], LexiconEntry]]] = {}
    for pattern, labels in raw.items():
        entry = LexiconEntry(pattern, dict(labels))
        words = tuple(pattern.split())
        if len(words) > 1:
            phrases.setdefault(words[0], []).append((words, entry))
        elif pattern.endswith("*"):
            prefixes[pattern[:-1]] = entry
        else:
            literals[pattern] = entry
    ordered = {k: tuple(sorted(v, key=lambda pe: (-len(pe[0]), pe[0]))) for k, v in phrases.items()}
    return CategoryLexicon(name, literals, prefixes, ordered, tuple(cats))


def load_lexicon(path: str | Path, name: str | None = None) -> CategoryLexicon:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh, name=name or path.stem, source=str(path))


def match_lexicon(tokens: Sequence[str], lexicon: CategoryLexicon) -> dict[str, int]:
    """Count lexicon matches per category; every category is present."""
    counts = dict.fromkeys(lexicon.categories, 0)
    for _, _, entry in lexicon.scan(tokens):
        for cat in entry.labels:
            counts[cat] += 1
    return counts


def lexicon_scores(tokens: Sequence[str], lexicon: CategoryLexicon) -> dict[str, float]:
    """Sum of entry scores per category (entries without a score add nothing)."""
    sums = dict.fromkeys(lexicon.categories, 0.0)
    for _, _, entry in lexicon.scan(tokens):
        for cat, score in entry.labels.items():
            if score is not None:
                sums[cat] += score
    return sums


def count_matching(tokens: Sequence[str], lexicon: CategoryLexicon, categories: Iterable[str]) -> int:
    """Number of matches carrying at least one of ``categories``."""
    return count_matches_in(lexicon.scan(tokens), categories)


def count_matches_in(matches: Sequence[tuple[int, int, LexiconEntry]], categories: Iterable[str]) -> int:
    """Like :func:`count_matching`, over the output of :meth:`CategoryLexicon.scan`."""
    wanted = set(categories)
    return sum(1 for _, _, e in matches if wanted.intersection(e.labels))
