"""Spanish sentence analysis: prompt assembly, few-shot priming, response
parsing, and batched dispatch to a completion backend.

The task prompt asks for every noun and pronoun in a sentence, one per line
in the form "<surface> -- <S|N>, <M|F>": S marks words referring to a person,
N everything else; M/F is the grammatical gender. Surnames are excluded by
the prompt instruction itself, not by client-side filtering.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .corpus import SampleSubset
from .llm_backend import Backend, BackendConfigError, BackendRequestError, CostLedger


class Gender(str, Enum):
    MASCULINE = "M"
    FEMININE = "F"


class ResponseParseError(Exception):
    """A non-empty response produced zero parsable annotation lines."""

    def __init__(self, message: str, raw: str = "", warnings: Sequence[str] = ()):
        super().__init__(message)
        self.raw = raw
        self.warnings = list(warnings)


@dataclass(frozen=True)
class WordAnnotation:
    """One identified word: person-reference flag plus grammatical gender."""

    surface: str
    person: bool
    gender: Gender

    def __post_init__(self) -> None:
        if not self.surface:
            raise ValueError("surface must be non-empty")
        if "\n" in self.surface or "\r" in self.surface:
            raise ValueError(f"surface must not contain line breaks: {self.surface!r}")


@dataclass(frozen=True)
class FewShotExample:
    sentence: str
    annotations: tuple[WordAnnotation, ...]

    def __post_init__(self) -> None:
        if not self.annotations:
            raise ValueError("a few-shot example needs at least one annotation")


INSTRUCTION_BLOCK = (
    "Instrucciones: Identifica todos los sustantivos y pronombres en la frase "
    "proporcionada. Para cada uno, determina si se refiere a un ser humano (S) "
    "o no (N), y especifica su género gramatical: masculino (M) o femenino (F). "
    "Excluye los apellidos. Sigue el formato de los ejemplos proporcionados sin "
    "añadir texto adicional."
)

DEFAULT_TEMPLATE_TEXT = "<EXAMPLES>\n\nFrase: <SENTENCE>\n" + INSTRUCTION_BLOCK


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt skeleton with <EXAMPLES> and <SENTENCE> placeholders (each
    required exactly once) plus the few-shot examples to splice in."""

    template_text: str = DEFAULT_TEMPLATE_TEXT
    examples: tuple[FewShotExample, ...] = ()

    def __post_init__(self) -> None:
        for placeholder in ("<EXAMPLES>", "<SENTENCE>"):
            count = self.template_text.count(placeholder)
            if count != 1:
                raise ValueError(f"template must contain {placeholder} exactly once, found {count}")


def _ann(surface: str, person: bool, gender: str) -> WordAnnotation:
    return WordAnnotation(surface, person, Gender(gender))


def default_few_shot() -> tuple[FewShotExample, ...]:
    """The five built-in priming examples (Europarl-style sentences with
    manually produced analyses)."""
    return (
        FewShotExample(
            "El señor Presidente viajó a Tokio para reunirse con el secretario de estado "
            "y a la mañana siguiente tuvo que volar a Madrid por temas personales.",
            (
                _ann("señor", True, "M"),
                _ann("Presidente", True, "M"),
                _ann("Tokio", False, "M"),
                _ann("secretario", True, "M"),
                _ann("estado", False, "M"),
                _ann("mañana", False, "F"),
                _ann("Madrid", False, "M"),
                _ann("temas", False, "M"),
            ),
        ),
        FewShotExample(
            "Mi colega Sr. Allan Hofmann se dirigió a los ciudadanos de Madrid, "
            "recordándoles que son personas con derechos y responsabilidades.",
            (
                _ann("colega", True, "M"),
                _ann("Sr.", True, "M"),
                _ann("Allan", True, "M"),
                _ann("ciudadanos", True, "M"),
                _ann("Madrid", False, "M"),
                _ann("personas", True, "F"),
                _ann("derechos", False, "M"),
                _ann("responsabilidades", False, "F"),
            ),
        ),
        FewShotExample(
            "El señor Presidente de la comisión de educación se reunió con los estudiantes "
            "en Tokio, donde el distinguido Sir Ben Smith compartió su visión sobre el "
            "futuro de la enseñanza.",
            (
                _ann("señor", True, "M"),
                _ann("Presidente", True, "M"),
                _ann("comisión", False, "F"),
                _ann("educación", False, "F"),
                _ann("estudiantes", True, "M"),
                _ann("Tokio", False, "M"),
                _ann("Sir", True, "M"),
                _ann("Ben", True, "M"),
                _ann("visión", False, "F"),
                _ann("futuro", False, "M"),
                _ann("enseñanza", False, "F"),
            ),
        ),
        FewShotExample(
            "El Sr. Johnson, un respetado colega de la ciudadanía británica, ha vivido en "
            "Londres durante más de dos décadas, donde trabaja incansablemente para mejorar "
            "la comunidad local.",
            (
                _ann("Sr.", True, "M"),
                _ann("colega", True, "M"),
                _ann("ciudadanía", False, "F"),
                _ann("Londres", False, "M"),
                _ann("décadas", False, "F"),
                _ann("comunidad", False, "F"),
            ),
        ),
        FewShotExample(
            "Encontré en Europa no solo destinos turísticos, sino un hogar temporal donde "
            "me sentí ciudadana del mundo, abrazando la diversidad y la riqueza cultural "
            "que esta tierra ofrece.",
            (
                _ann("Europa", False, "F"),
                _ann("destinos", False, "M"),
                _ann("hogar", False, "M"),
                _ann("ciudadana", True, "F"),
                _ann("mundo", False, "M"),
                _ann("diversidad", False, "F"),
                _ann("riqueza", False, "F"),
                _ann("tierra", False, "F"),
            ),
        ),
    )


def default_template() -> PromptTemplate:
    return PromptTemplate(DEFAULT_TEMPLATE_TEXT, default_few_shot())


def format_annotation_line(annotation: WordAnnotation) -> str:
    flag = "S" if annotation.person else "N"
    return f"{annotation.surface} -- {flag}, {annotation.gender.value}"


def format_as_response(annotations: Sequence[WordAnnotation]) -> str:
    """Canonical response text for a list of annotations, one line per word.
    parse_analysis inverts this exactly."""
    return "\n".join(format_annotation_line(a) for a in annotations)


def _format_example(k: int, example: FewShotExample) -> str:
    return f"Ejemplo {k}:\nFrase: {example.sentence}\n" + format_as_response(example.annotations)


def render_prompt(template: PromptTemplate, sentence: str) -> str:
    """Substitute the examples block and the sentence into the template.

    Pure in (template, sentence); each example is numbered "Ejemplo k:" and
    the sentence goes after the final "Frase: " marker.
    """
    if not sentence.strip():
        raise ValueError("sentence must be non-empty")
    examples_block = "\n\n".join(
        _format_example(k, ex) for k, ex in enumerate(template.examples, start=1)
    )
    substitutions = {"<EXAMPLES>": examples_block, "<SENTENCE>": sentence}
    return re.sub(r"<EXAMPLES>|<SENTENCE>", lambda m: substitutions[m.group(0)], template.template_text)


# Annotation line: surface, dash separator (-, -- or em dash), S/N flag, M/F
# gender. Flag and gender are case-insensitive; spacing is free.
_LINE_RE = re.compile(
    r"^\s*(?P<surface>.+?)\s*(?:--|—|-)\s*(?P<flag>[SsNn])\s*,\s*(?P<gender>[MmFf])\s*$"
)


def parse_analysis(raw: str) -> tuple[list[WordAnnotation], list[str]]:
    """Parse a model response into annotations plus per-line warnings.

    Blank lines are skipped; lines that do not match the format are skipped
    with a warning naming the line. A non-empty response with zero parsable
    lines raises ResponseParseError (recorded by the batch, not fatal to it).
    """
    annotations: list[WordAnnotation] = []
    warnings: list[str] = []
    for i, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        match = _LINE_RE.match(line)
        if match is None:
            warnings.append(f"unparsable line {i}: {line.strip()}")
            continue
        annotations.append(
            WordAnnotation(
                surface=match.group("surface"),
                person=match.group("flag").upper() == "S",
                gender=Gender(match.group("gender").upper()),
            )
        )
    if raw.strip() and not annotations:
        raise ResponseParseError(
            f"no parsable annotation lines in response ({len(warnings)} skipped)",
            raw=raw,
            warnings=warnings,
        )
    return annotations, warnings


@dataclass(frozen=True)
class BackendMeta:
    model_id: str
    input_tokens: int
    output_tokens: int
    cached: bool


@dataclass(frozen=True)
class SentenceAnalysis:
    sentence_index: int
    annotations: tuple[WordAnnotation, ...]
    raw_response: str
    parse_warnings: tuple[str, ...]
    backend_meta: BackendMeta


@dataclass(frozen=True)
class SentenceFailure:
    sentence_index: int
    error: str


@dataclass(frozen=True)
class CorpusAnalysis:
    """Per-sentence analyses plus failures; together they cover every
    analyzed sentence exactly once, ordered by sentence index."""

    subset_fingerprint: str
    analyses: tuple[SentenceAnalysis, ...]
    failures: tuple[SentenceFailure, ...] = ()


def analyze_sentence(
    sentence: str,
    template: PromptTemplate,
    backend: Backend,
    sentence_index: int = 0,
    parse_retries: int = 0,
) -> SentenceAnalysis:
    """Render, complete, and parse one sentence; the raw response is kept
    verbatim for audit. Backend and parse errors propagate to the caller."""
    prompt = render_prompt(template, sentence)
    completion = backend.complete(prompt)
    attempts_left = parse_retries
    while True:
        try:
            annotations, warnings = parse_analysis(completion.text)
            break
        except ResponseParseError:
            if attempts_left <= 0:
                raise
            attempts_left -= 1
            completion = backend.complete(prompt)
    return SentenceAnalysis(
        sentence_index=sentence_index,
        annotations=tuple(annotations),
        raw_response=completion.text,
        parse_warnings=tuple(warnings),
        backend_meta=BackendMeta(
            completion.model_id, completion.input_tokens, completion.output_tokens, completion.cached
        ),
    )


ProgressCallback = Callable[[int, int, CostLedger], None]


def analyze_texts(
    indexed_texts: Sequence[tuple[int, str]],
    template: PromptTemplate,
    backend: Backend,
    max_in_flight: int = 1,
    on_progress: ProgressCallback | None = None,
    parse_retries: int = 0,
    fingerprint: str = "",
) -> CorpusAnalysis:
    """Analyze (index, text) pairs with up to max_in_flight concurrent
    requests. Per-sentence failures are recorded and the batch continues;
    configuration errors abort the whole batch. Output is ordered by index
    regardless of completion order."""
    if max_in_flight < 1:
        raise ValueError(f"max_in_flight must be >= 1, got {max_in_flight}")
    analyses: list[SentenceAnalysis] = []
    failures: list[SentenceFailure] = []
    total = len(indexed_texts)
    done = 0
    progress_lock = threading.Lock()

    def worker(index: int, text: str) -> SentenceAnalysis:
        return analyze_sentence(text, template, backend, index, parse_retries)

    with ThreadPoolExecutor(max_workers=max_in_flight) as executor:
        futures = {executor.submit(worker, i, t): i for i, t in indexed_texts}
        try:
            for future in as_completed(futures):
                index = futures[future]
                try:
                    analyses.append(future.result())
                except (BackendRequestError, ResponseParseError) as exc:
                    failures.append(SentenceFailure(index, str(exc)))
                if on_progress is not None:
                    with progress_lock:
                        done += 1
                        on_progress(done, total, backend.ledger)
        except BackendConfigError:
            for future in futures:
                future.cancel()
            raise
    analyses.sort(key=lambda a: a.sentence_index)
    failures.sort(key=lambda f: f.sentence_index)
    return CorpusAnalysis(fingerprint, tuple(analyses), tuple(failures))


def analyze_subset(
    subset: SampleSubset,
    template: PromptTemplate,
    backend: Backend,
    side: str = "source",
    max_in_flight: int = 1,
    on_progress: ProgressCallback | None = None,
    parse_retries: int = 0,
) -> CorpusAnalysis:
    """Analyze one side of a sampled subset, indexed by original pair index."""
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    indexed = [
        (pair.index, pair.source_text if side == "source" else pair.target_text)
        for pair in subset.pairs
    ]
    return analyze_texts(
        indexed,
        template,
        backend,
        max_in_flight=max_in_flight,
        on_progress=on_progress,
        parse_retries=parse_retries,
        fingerprint=subset.source_fingerprint,
    )


def _annotation_to_dict(a: WordAnnotation) -> dict:
    return {"surface": a.surface, "person": a.person, "gender": a.gender.value}


def _annotation_from_dict(doc: dict) -> WordAnnotation:
    return WordAnnotation(doc["surface"], bool(doc["person"]), Gender(doc["gender"]))


def save_analysis_jsonl(analysis: CorpusAnalysis, path: str | Path) -> None:
    """One JSONL record per sentence: analyses carry annotations, raw
    response, warnings, and backend metadata; failures carry the error."""
    records: list[tuple[int, dict]] = []
    for a in analysis.analyses:
        records.append(
            (
                a.sentence_index,
                {
                    "sentence_index": a.sentence_index,
                    "annotations": [_annotation_to_dict(x) for x in a.annotations],
                    "raw_response": a.raw_response,
                    "warnings": list(a.parse_warnings),
                    "backend_meta": {
                        "model_id": a.backend_meta.model_id,
                        "input_tokens": a.backend_meta.input_tokens,
                        "output_tokens": a.backend_meta.output_tokens,
                        "cached": a.backend_meta.cached,
                    },
                },
            )
        )
    for f in analysis.failures:
        records.append((f.sentence_index, {"sentence_index": f.sentence_index, "error": f.error}))
    records.sort(key=lambda r: r[0])
    with open(path, "w", encoding="utf-8") as fh:
        for _, record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_analysis_jsonl(path: str | Path, subset_fingerprint: str = "") -> CorpusAnalysis:
    analyses: list[SentenceAnalysis] = []
    failures: list[SentenceFailure] = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        doc = json.loads(line)
        if "error" in doc:
            failures.append(SentenceFailure(doc["sentence_index"], doc["error"]))
            continue
        meta = doc.get("backend_meta", {})
        analyses.append(
            SentenceAnalysis(
                sentence_index=doc["sentence_index"],
                annotations=tuple(_annotation_from_dict(a) for a in doc["annotations"]),
                raw_response=doc.get("raw_response", ""),
                parse_warnings=tuple(doc.get("warnings", [])),
                backend_meta=BackendMeta(
                    meta.get("model_id", ""),
                    int(meta.get("input_tokens", 0)),
                    int(meta.get("output_tokens", 0)),
                    bool(meta.get("cached", False)),
                ),
            )
        )
    return CorpusAnalysis(subset_fingerprint, tuple(analyses), tuple(failures))


def load_template(path: str | Path) -> PromptTemplate:
    """Load a template override from JSON:
    {template_text, examples: [{sentence, annotations: [{surface, person, gender}]}]}."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    examples = tuple(
        FewShotExample(
            ex["sentence"],
            tuple(_annotation_from_dict(a) for a in ex["annotations"]),
        )
        for ex in doc.get("examples", [])
    )
    return PromptTemplate(doc.get("template_text", DEFAULT_TEMPLATE_TEXT), examples)


def texts_fingerprint(texts: Sequence[str]) -> str:
    """Stable fingerprint for a list of sentences (used when analyzing texts
    that did not come from a sampled subset)."""
    digest = hashlib.sha256()
    for text in texts:
        digest.update(text.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()
