"""Parallel corpus ingestion, sample-size computation, and seeded subsetting.

Corpora are pairs of plain-text files aligned by line number (one sentence
per line, the usual OPUS/Moses distribution format). Blank lines are kept in
the index space so alignment is preserved, but they are flagged unsampleable.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence


class AlignmentError(Exception):
    """The two sides of a parallel corpus have different line counts."""


class CorpusDecodeError(Exception):
    """A corpus file contains bytes that are not valid UTF-8."""


@dataclass(frozen=True)
class SentencePair:
    """One aligned sentence pair, indexed by zero-based line number."""

    index: int
    source_text: str
    target_text: str


@dataclass(frozen=True)
class SamplingParams:
    """Inputs to the minimum-sample-size formula.

    For a 99% confidence level use z = 2.576; for 95% use z = 1.96 (the tool
    does not embed a normal-quantile routine, callers supply z directly).
    """

    confidence_z: float = 2.576
    margin_e: float = 0.05
    proportion_p: float = 0.5

    def __post_init__(self) -> None:
        if self.confidence_z <= 0:
            raise ValueError(f"confidence_z must be > 0, got {self.confidence_z}")
        if self.margin_e <= 0:
            raise ValueError(f"margin_e must be > 0, got {self.margin_e}")
        if not 0.0 <= self.proportion_p <= 1.0:
            raise ValueError(f"proportion_p must be in [0, 1], got {self.proportion_p}")


def required_sample_size(params: SamplingParams) -> int:
    """Minimum sample size ceil(z^2 * p * (1-p) / e^2)."""
    z, e, p = params.confidence_z, params.margin_e, params.proportion_p
    return math.ceil(z * z * p * (1.0 - p) / (e * e))


def _decode_lines(data: bytes, path: str | Path) -> list[str]:
    """Split raw bytes into lines, decoding each one so a bad byte can be
    reported with its line number. Accepts \\r\\n endings (\\r is stripped)."""
    chunks = data.split(b"\n")
    if chunks and chunks[-1] == b"":
        chunks.pop()  # trailing newline, not an extra empty line
    lines: list[str] = []
    for i, chunk in enumerate(chunks):
        if chunk.endswith(b"\r"):
            chunk = chunk[:-1]
        try:
            lines.append(chunk.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(f"{path}: invalid UTF-8 on line {i + 1}: {exc}") from exc
    return lines


class ParallelCorpus:
    """Line-aligned sentence pairs held in memory.

    Iteration is read-only and yields `SentencePair` values, so concurrent
    readers are safe. Pairs where either side is blank after trimming are
    recorded in `skipped_indices` and excluded from sampling.
    """

    def __init__(self, source_lines: Sequence[str], target_lines: Sequence[str], fingerprint: str = ""):
        if len(source_lines) != len(target_lines):
            raise AlignmentError(
                f"line count mismatch: source has {len(source_lines)} lines, "
                f"target has {len(target_lines)} lines"
            )
        self._source = list(source_lines)
        self._target = list(target_lines)
        self.fingerprint = fingerprint
        self.sampleable_indices: tuple[int, ...] = tuple(
            i for i in range(len(self._source)) if self._source[i].strip() and self._target[i].strip()
        )
        self.skipped_indices: tuple[int, ...] = tuple(
            i for i in range(len(self._source)) if not (self._source[i].strip() and self._target[i].strip())
        )

    def __len__(self) -> int:
        return len(self._source)

    def __iter__(self) -> Iterator[SentencePair]:
        for i in range(len(self._source)):
            yield SentencePair(i, self._source[i], self._target[i])

    def pair(self, index: int) -> SentencePair:
        return SentencePair(index, self._source[index], self._target[index])


def load_parallel_corpus(source_path: str | Path, target_path: str | Path) -> ParallelCorpus:
    """Load two line-aligned UTF-8 files into a corpus handle.

    Raises AlignmentError when line counts differ and CorpusDecodeError for
    undecodable bytes. The fingerprint is the SHA-256 of the concatenated
    file bytes, recorded in every subset drawn from the corpus.
    """
    source_bytes = Path(source_path).read_bytes()
    target_bytes = Path(target_path).read_bytes()
    fingerprint = hashlib.sha256(source_bytes + target_bytes).hexdigest()
    source_lines = _decode_lines(source_bytes, source_path)
    target_lines = _decode_lines(target_bytes, target_path)
    if len(source_lines) != len(target_lines):
        raise AlignmentError(
            f"line count mismatch: {source_path} has {len(source_lines)} lines, "
            f"{target_path} has {len(target_lines)} lines"
        )
    return ParallelCorpus(source_lines, target_lines, fingerprint)


@dataclass(frozen=True)
class SampleSubset:
    """A reproducible random subset of a corpus, sorted by pair index."""

    seed: int
    requested_n: int
    source_fingerprint: str
    pairs: tuple[SentencePair, ...]
    clamped: bool = field(default=False, compare=False)  # n exceeded the sampleable pool

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "requested_n": self.requested_n,
            "source_fingerprint": self.source_fingerprint,
            "pairs": [
                {"index": p.index, "source_text": p.source_text, "target_text": p.target_text}
                for p in self.pairs
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "SampleSubset":
        doc = json.loads(text)
        pairs = tuple(
            SentencePair(p["index"], p["source_text"], p["target_text"]) for p in doc["pairs"]
        )
        return cls(
            seed=doc["seed"],
            requested_n=doc["requested_n"],
            source_fingerprint=doc["source_fingerprint"],
            pairs=pairs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SampleSubset":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def sample_subset(corpus: ParallelCorpus, n: int, seed: int) -> SampleSubset:
    """Draw n pairs without replacement, deterministically for a fixed seed.

    Blank-flagged pairs are never drawn. When n exceeds the sampleable pool
    the full pool is returned and the subset is marked `clamped` instead of
    raising, so small test corpora stay usable.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pool = list(corpus.sampleable_indices)
    clamped = n > len(pool)
    take = min(n, len(pool))
    if take < len(pool):
        # Partial Fisher-Yates keyed on randrange, so a given seed yields the
        # same subset on every run regardless of sample() implementation drift.
        rng = random.Random(seed)
        for i in range(take):
            j = rng.randrange(i, len(pool))
            pool[i], pool[j] = pool[j], pool[i]
        chosen = pool[:take]
    else:
        chosen = pool
    pairs = tuple(corpus.pair(i) for i in sorted(chosen))
    return SampleSubset(
        seed=seed,
        requested_n=n,
        source_fingerprint=corpus.fingerprint,
        pairs=pairs,
        clamped=clamped,
    )
