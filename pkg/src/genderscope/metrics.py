"""Aggregation of annotations into person/gender counts and a male:female
bias ratio; validation of predicted annotations against gold; epicene
word breakdowns.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .annotation import CorpusAnalysis, Gender, WordAnnotation, parse_analysis


@dataclass(frozen=True)
class AggregateCounts:
    """Counts of identified words split by grammatical gender (l_all_m,
    l_all_f), person reference (l_n_any, l_p_any), and the person-referencing
    cells l_p_m / l_p_f that define the bias ratio.

    Rows produced by aggregate() always satisfy is_consistent(); external
    rows (hand-entered report fixtures) may not, when their upstream tool
    dropped words from one marginal, so the cross-marginal identity is not
    enforced at construction.
    """

    l_all_m: int = 0
    l_all_f: int = 0
    l_n_any: int = 0
    l_p_any: int = 0
    l_p_m: int = 0
    l_p_f: int = 0

    def __post_init__(self) -> None:
        counts = (self.l_all_m, self.l_all_f, self.l_n_any, self.l_p_any, self.l_p_m, self.l_p_f)
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative: {counts}")
        if self.l_p_m + self.l_p_f != self.l_p_any:
            raise ValueError(
                f"l_p_m + l_p_f must equal l_p_any: {self.l_p_m} + {self.l_p_f} != {self.l_p_any}"
            )

    def is_consistent(self) -> bool:
        """Whether the person/non-person split equals the gender split."""
        return self.l_n_any + self.l_p_any == self.l_all_m + self.l_all_f

    @property
    def total(self) -> int:
        return self.l_all_m + self.l_all_f

    def __add__(self, other: "AggregateCounts") -> "AggregateCounts":
        return AggregateCounts(
            self.l_all_m + other.l_all_m,
            self.l_all_f + other.l_all_f,
            self.l_n_any + other.l_n_any,
            self.l_p_any + other.l_p_any,
            self.l_p_m + other.l_p_m,
            self.l_p_f + other.l_p_f,
        )


def aggregate_annotations(annotations: Iterable[WordAnnotation]) -> AggregateCounts:
    """Each annotation lands in exactly one (person, gender) cell; marginals
    are derived from the cells."""
    p_m = p_f = n_m = n_f = 0
    for a in annotations:
        if a.person:
            if a.gender is Gender.MASCULINE:
                p_m += 1
            else:
                p_f += 1
        else:
            if a.gender is Gender.MASCULINE:
                n_m += 1
            else:
                n_f += 1
    return AggregateCounts(
        l_all_m=p_m + n_m,
        l_all_f=p_f + n_f,
        l_n_any=n_m + n_f,
        l_p_any=p_m + p_f,
        l_p_m=p_m,
        l_p_f=p_f,
    )


def aggregate(analysis: CorpusAnalysis) -> AggregateCounts:
    return aggregate_annotations(a for s in analysis.analyses for a in s.annotations)


def _ratio_display(value: Decimal) -> str:
    quantized = value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{quantized} : 1"


@dataclass(frozen=True)
class BiasRatio:
    """male:female ratio with an explicit degenerate-denominator flag.

    Display is "X.XX : 1" (half-up, 2 decimals), "inf : 1" for m/0 with
    m > 0, and "n/a" when both counts are zero.
    """

    numerator: float
    denominator_is_zero: bool
    display: str

    @classmethod
    def from_counts(cls, male: int, female: int) -> "BiasRatio":
        if female == 0:
            if male == 0:
                return cls(0.0, True, "n/a")
            return cls(math.inf, True, "inf : 1")
        value = male / female
        return cls(value, False, _ratio_display(Decimal(male) / Decimal(female)))


def bias_ratio(counts: AggregateCounts) -> BiasRatio:
    """The person-referencing male:female ratio l_p_m : l_p_f."""
    return BiasRatio.from_counts(counts.l_p_m, counts.l_p_f)


@dataclass(frozen=True)
class MatchCounts:
    """Validation tallies: n_c correct in surface and both attributes, n_i
    correct surface with an attribute mismatch, n_m missed gold words, n_e
    extra predicted words."""

    n_c: int = 0
    n_i: int = 0
    n_m: int = 0
    n_e: int = 0

    def __post_init__(self) -> None:
        if any(c < 0 for c in (self.n_c, self.n_i, self.n_m, self.n_e)):
            raise ValueError("match counts must be nonnegative")

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.n_c + other.n_c, self.n_i + other.n_i, self.n_m + other.n_m, self.n_e + other.n_e
        )


def match_annotations(
    predicted: Sequence[WordAnnotation], gold: Sequence[WordAnnotation]
) -> MatchCounts:
    """Greedy per-sentence multiset matching on lowercased surfaces.

    Pass 1 pairs identical (surface, person, gender) triples; pass 2 pairs
    remaining same-surface items (attribute mismatch). Unpaired gold words
    are missed, unpaired predictions are extra. Pass 1 first maximizes n_c.
    """
    pred_triples = Counter((a.surface.lower(), a.person, a.gender) for a in predicted)
    gold_triples = Counter((a.surface.lower(), a.person, a.gender) for a in gold)
    exact = pred_triples & gold_triples
    n_c = sum(exact.values())

    pred_surfaces: Counter[str] = Counter()
    for triple, count in (pred_triples - exact).items():
        pred_surfaces[triple[0]] += count
    gold_surfaces: Counter[str] = Counter()
    for triple, count in (gold_triples - exact).items():
        gold_surfaces[triple[0]] += count
    n_i = sum((pred_surfaces & gold_surfaces).values())

    n_e = len(predicted) - n_c - n_i
    n_m = len(gold) - n_c - n_i
    return MatchCounts(n_c=n_c, n_i=n_i, n_m=n_m, n_e=n_e)


@dataclass(frozen=True)
class ValidationScores:
    """Accuracy, precision, recall, and F-score in [0, 1]; a score whose
    denominator is zero is None (reported as n/a, never as 0)."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f_score: float | None


def validation_scores(m: MatchCounts) -> ValidationScores:
    """A = n_c/(n_c+n_i+n_m), P = n_c/(n_c+n_i+n_e), R = n_c/(n_c+n_m),
    F = 2PR/(P+R); each is None when its denominator is zero."""
    if m.n_c + m.n_i + m.n_m + m.n_e == 0:
        raise ValueError("cannot score an empty match: all counts are zero")

    def _div(num: int, den: int) -> float | None:
        return num / den if den > 0 else None

    accuracy = _div(m.n_c, m.n_c + m.n_i + m.n_m)
    precision = _div(m.n_c, m.n_c + m.n_i + m.n_e)
    recall = _div(m.n_c, m.n_c + m.n_m)
    if precision is None or recall is None or precision + recall == 0:
        f_score = None
    else:
        f_score = 2 * precision * recall / (precision + recall)
    return ValidationScores(accuracy, precision, recall, f_score)


DEFAULT_EPICENE_LEXICON = frozenset(
    {
        "personas",
        "miembros",
        "gente",
        "persona",
        "miembro",
        "víctimas",
        "individuo",
        "víctima",
        "individuos",
    }
)


@dataclass(frozen=True)
class EpiceneRow:
    surface: str
    person: bool
    gender: Gender
    frequency: int


@dataclass(frozen=True)
class EpiceneBreakdown:
    """Frequency rows for epicene surfaces plus totals over the
    person-referencing occurrences."""

    rows: tuple[EpiceneRow, ...]
    feminine_count: int
    masculine_count: int
    feminine_share: float | None


def epicene_breakdown(
    analysis: CorpusAnalysis, lexicon: frozenset[str] | set[str] | None = None
) -> EpiceneBreakdown:
    """Tally epicene-lexicon surfaces by (surface, person, gender).

    Identification is by surface form against a closed lowercase word list;
    the share is feminine/(feminine+masculine) over person-referencing rows,
    None when no person-referencing epicenes occur.
    """
    words = frozenset(lexicon) if lexicon is not None else DEFAULT_EPICENE_LEXICON
    if not words:
        raise ValueError("epicene lexicon must be non-empty")
    counts: Counter[tuple[str, bool, Gender]] = Counter()
    for sentence in analysis.analyses:
        for a in sentence.annotations:
            surface = a.surface.lower()
            if surface in words:
                counts[(surface, a.person, a.gender)] += 1
    rows = tuple(
        EpiceneRow(surface, person, gender, freq)
        for (surface, person, gender), freq in sorted(
            counts.items(), key=lambda item: (-item[1], item[0][0], item[0][2].value)
        )
    )
    feminine = sum(r.frequency for r in rows if r.person and r.gender is Gender.FEMININE)
    masculine = sum(r.frequency for r in rows if r.person and r.gender is Gender.MASCULINE)
    share = feminine / (feminine + masculine) if feminine + masculine > 0 else None
    return EpiceneBreakdown(rows, feminine, masculine, share)


def load_epicene_lexicon(path: str | Path) -> frozenset[str]:
    """One lowercase surface per line; blank lines and #-comments ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word.lower())
    return frozenset(words)


@dataclass(frozen=True)
class GoldSentence:
    sentence: str
    annotations: tuple[WordAnnotation, ...]


def load_gold(path: str | Path) -> list[GoldSentence]:
    """Load gold annotations from JSON ({sentences: [{sentence, annotations:
    [{surface, person, gender}]}]}) or from the plain-text response format
    (one block per "Frase:" header) for hand-edited files."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return [
            GoldSentence(
                entry["sentence"],
                tuple(
                    WordAnnotation(a["surface"], bool(a["person"]), Gender(a["gender"]))
                    for a in entry["annotations"]
                ),
            )
            for entry in doc["sentences"]
        ]
    return _parse_gold_text(text)


def _parse_gold_text(text: str) -> list[GoldSentence]:
    sentences: list[GoldSentence] = []
    current_sentence: str | None = None
    current_lines: list[str] = []

    def flush() -> None:
        if current_sentence is None:
            return
        block = "\n".join(current_lines)
        annotations = parse_analysis(block)[0] if block.strip() else []
        sentences.append(GoldSentence(current_sentence, tuple(annotations)))

    for line in text.splitlines():
        if line.startswith("Frase:"):
            flush()
            current_sentence = line[len("Frase:") :].strip()
            current_lines = []
        elif current_sentence is not None:
            current_lines.append(line)
    flush()
    return sentences


def pooled_match_counts(
    pairs: Iterable[tuple[Sequence[WordAnnotation], Sequence[WordAnnotation]]]
) -> MatchCounts:
    """Sum per-sentence match counts over (predicted, gold) pairs."""
    total = MatchCounts()
    for predicted, gold in pairs:
        total = total + match_annotations(predicted, gold)
    return total


def per_sentence_mean_scores(per_sentence: Sequence[MatchCounts]) -> ValidationScores:
    """Average the defined per-sentence scores (alternative to pooling)."""
    collected: dict[str, list[float]] = {"accuracy": [], "precision": [], "recall": [], "f_score": []}
    for counts in per_sentence:
        if counts.n_c + counts.n_i + counts.n_m + counts.n_e == 0:
            continue
        scores = validation_scores(counts)
        for name in collected:
            value = getattr(scores, name)
            if value is not None:
                collected[name].append(value)
    means = {
        name: (sum(values) / len(values) if values else None) for name, values in collected.items()
    }
    return ValidationScores(**means)
