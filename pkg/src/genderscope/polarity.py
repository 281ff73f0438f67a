"""English unigram gender-polarity counting.

Counts occurrences of fixed male/female token lists in text. Matching is
exact after lowercasing and edge-punctuation stripping; no stemming or
lemmatization (unigram matching only).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import SampleSubset

MALE_TOKENS = frozenset({"he", "him", "his", "himself", "man", "men", "he's", "boy", "boys"})
FEMALE_TOKENS = frozenset({"she", "her", "hers", "herself", "woman", "women", "she's", "girl", "girls"})


@dataclass(frozen=True)
class GenderPolarityCounts:
    """Occurrence counts of male (g_m) and female (g_f) lexicon tokens."""

    g_m: int = 0
    g_f: int = 0

    def __post_init__(self) -> None:
        if self.g_m < 0 or self.g_f < 0:
            raise ValueError(f"counts must be nonnegative, got ({self.g_m}, {self.g_f})")

    def __add__(self, other: "GenderPolarityCounts") -> "GenderPolarityCounts":
        return GenderPolarityCounts(self.g_m + other.g_m, self.g_f + other.g_f)


@dataclass(frozen=True)
class TokenLexicon:
    """Disjoint lowercase token sets for the two genders."""

    male_tokens: frozenset[str]
    female_tokens: frozenset[str]

    def __post_init__(self) -> None:
        overlap = self.male_tokens & self.female_tokens
        if overlap:
            raise ValueError(f"lexicon sets must be disjoint, overlap: {sorted(overlap)}")
        for token in self.male_tokens | self.female_tokens:
            if token != token.lower():
                raise ValueError(f"lexicon entries must be lowercase, got {token!r}")


def default_lexicon() -> TokenLexicon:
    """The built-in English lexicon (9 male + 9 female tokens)."""
    return TokenLexicon(MALE_TOKENS, FEMALE_TOKENS)


def load_lexicon(path: str | Path) -> TokenLexicon:
    """Load a lexicon override from JSON: {"male": [...], "female": [...]}."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return TokenLexicon(
        frozenset(t.lower() for t in doc["male"]),
        frozenset(t.lower() for t in doc["female"]),
    )


def _strip_edges(token: str) -> str:
    """Strip non-alphanumeric characters from both ends, keeping internal
    ones, so contractions like "he's" survive while "man!" becomes "man"."""
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens with edge punctuation stripped.

    The curly apostrophe (U+2019) is normalized to ' so contracted lexicon
    forms match either spelling.
    """
    normalized = text.replace("’", "'").lower()
    tokens = []
    for chunk in normalized.split():
        stripped = _strip_edges(chunk)
        if stripped:
            tokens.append(stripped)
    return tokens


def gender_polarity(text: str, lexicon: TokenLexicon | None = None) -> GenderPolarityCounts:
    """Count every token occurrence (not unique types) in each lexicon set."""
    lexicon = lexicon or default_lexicon()
    g_m = g_f = 0
    for token in tokenize(text):
        if token in lexicon.male_tokens:
            g_m += 1
        elif token in lexicon.female_tokens:
            g_f += 1
    return GenderPolarityCounts(g_m, g_f)


def polarity_over_subset(
    subset: SampleSubset, side: str = "target", lexicon: TokenLexicon | None = None
) -> GenderPolarityCounts:
    """Sum of per-sentence counts over one side of a subset.

    `side` selects "source" or "target" text; the default lexicon is English,
    which normally means the target side of an es-en corpus.
    """
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    lexicon = lexicon or default_lexicon()
    total = GenderPolarityCounts()
    for pair in subset.pairs:
        text = pair.source_text if side == "source" else pair.target_text
        total = total + gender_polarity(text, lexicon)
    return total
