"""Command-line surface: sample -> polarity/analyze -> validate/epicene.

Configuration resolves as flags > config file > environment > built-in
defaults. Every run appends a machine-readable manifest line (resolved
config, its hash, input file fingerprints, ledger totals) so results can
be reproduced exactly.

Exit codes: 0 success, 2 usage error, 3 I/O or alignment error,
4 backend/config error. Per-sentence analysis failures are reported in the
summary but do not fail the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .annotation import (
    CorpusAnalysis,
    analyze_subset,
    analyze_texts,
    default_template,
    load_analysis_jsonl,
    load_template,
    save_analysis_jsonl,
    texts_fingerprint,
)
from .corpus import (
    AlignmentError,
    CorpusDecodeError,
    SampleSubset,
    SamplingParams,
    load_parallel_corpus,
    required_sample_size,
    sample_subset,
)
from .llm_backend import (
    BackendConfig,
    BackendConfigError,
    BackendRequestError,
    CostLedger,
    HttpBackend,
    PriceTable,
    ReplayBackend,
    cached,
    estimate_cost,
)
from .metrics import (
    aggregate,
    epicene_breakdown,
    load_epicene_lexicon,
    load_gold,
    match_annotations,
    per_sentence_mean_scores,
    pooled_match_counts,
    validation_scores,
)
from .polarity import load_lexicon, polarity_over_subset
from .report import (
    LlmRow,
    PolarityRow,
    emit_epicene_table,
    emit_llm_table,
    emit_polarity_table,
    emit_validation_table,
)

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-4-turbo-2024-04-09"
DEFAULT_CREDENTIAL_ENV = "GENDERSCOPE_API_KEY"
DEFAULT_MANIFEST = "genderscope_runs.jsonl"

ENV_MODEL = "GENDERSCOPE_MODEL"
ENV_ENDPOINT = "GENDERSCOPE_ENDPOINT"
ENV_MAX_IN_FLIGHT = "GENDERSCOPE_MAX_IN_FLIGHT"


def _first(*values):
    """First value that is not None (flags > config > env > default)."""
    for value in values:
        if value is not None:
            return value
    return None


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return doc


def _file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _append_manifest(
    manifest_path: str,
    command: str,
    config: dict,
    inputs: dict[str, str],
    outputs: list[str],
    ledger: CostLedger | None = None,
) -> None:
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest(),
        "inputs": inputs,
        "outputs": outputs,
        "ledger": ledger.snapshot() if ledger is not None else None,
    }
    with open(manifest_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


def _emit(document: str, out: str | None) -> None:
    if out:
        Path(out).write_text(document, encoding="utf-8")
    else:
        sys.stdout.write(document)


def _resolve_backend_settings(args, config: dict) -> dict:
    section = config.get("backend", {})
    explicit_model = _first(args.model, section.get("model_id"), os.environ.get(ENV_MODEL))
    return {
        "kind": args.backend,
        "model_id": explicit_model,
        "endpoint_url": _first(
            args.endpoint, section.get("endpoint_url"), os.environ.get(ENV_ENDPOINT), DEFAULT_ENDPOINT
        ),
        "credential_env": _first(
            args.credential_env, section.get("credential_env"), DEFAULT_CREDENTIAL_ENV
        ),
        "timeout": float(_first(args.timeout, section.get("timeout"), 60.0)),
        "max_retries": int(_first(args.max_retries, section.get("max_retries"), 3)),
        "price_input_per_1k": _first(args.price_input, section.get("price_input_per_1k")),
        "price_output_per_1k": _first(args.price_output, section.get("price_output_per_1k")),
        "fixtures": args.fixtures,
        "cache": _first(args.cache, config.get("analyze", {}).get("cache")),
    }


def _build_backend(settings: dict):
    prices = None
    if settings["price_input_per_1k"] is not None and settings["price_output_per_1k"] is not None:
        prices = PriceTable(
            float(settings["price_input_per_1k"]), float(settings["price_output_per_1k"])
        )
    if settings["kind"] == "replay":
        if not settings["fixtures"]:
            raise BackendConfigError("--fixtures is required with --backend replay")
        backend = ReplayBackend(settings["fixtures"], model_id=settings["model_id"] or "replay")
    else:
        config = BackendConfig(
            endpoint_url=settings["endpoint_url"],
            model_id=settings["model_id"] or DEFAULT_MODEL,
            credential_env=settings["credential_env"],
            timeout=settings["timeout"],
            max_retries=settings["max_retries"],
            prices=prices,
        )
        backend = HttpBackend(config)
    if settings["cache"]:
        backend = cached(backend, settings["cache"])
    return backend, prices


def _resolve_template(path: str | None):
    return load_template(path) if path else default_template()


def _print_ledger_summary(ledger: CostLedger, prices) -> None:
    snap = ledger.snapshot()
    print(
        f"requests: {snap['request_count']} (cache hits: {snap['cache_hits']}), "
        f"tokens billed: {snap['total_input_tokens']} in / {snap['total_output_tokens']} out"
    )
    cost = estimate_cost(ledger, prices)
    if cost is None:
        print("estimated cost: unavailable (no price table configured)")
    else:
        print(f"estimated cost: {cost:.4f} {prices.currency}")


def cmd_sample(args) -> int:
    config = _load_config(args.config)
    section = config.get("sampling", {})
    params = SamplingParams(
        confidence_z=float(_first(args.z, section.get("z"), 2.576)),
        margin_e=float(_first(args.e, section.get("e"), 0.05)),
        proportion_p=float(_first(args.p, section.get("p"), 0.5)),
    )
    minimum = required_sample_size(params)
    print(
        f"minimum n = {minimum} "
        f"(z={params.confidence_z}, e={params.margin_e}, p={params.proportion_p})"
    )
    corpus = load_parallel_corpus(args.source, args.target)
    n = args.n if args.n is not None else minimum
    subset = sample_subset(corpus, n, args.seed)
    if subset.clamped:
        print(
            f"warning: requested n={n} exceeds the {len(subset.pairs)} sampleable pairs; "
            "returning the full corpus",
            file=sys.stderr,
        )
    if corpus.skipped_indices:
        print(
            f"note: {len(corpus.skipped_indices)} blank-flagged lines kept in the index "
            "space but excluded from sampling",
            file=sys.stderr,
        )
    subset.save(args.out)
    print(f"sampled {len(subset.pairs)} of {len(corpus)} pairs (seed={args.seed}) -> {args.out}")
    _append_manifest(
        args.manifest,
        "sample",
        {
            "source": args.source,
            "target": args.target,
            "n": n,
            "seed": args.seed,
            "z": params.confidence_z,
            "e": params.margin_e,
            "p": params.proportion_p,
            "out": args.out,
        },
        {args.source: _file_sha256(args.source), args.target: _file_sha256(args.target)},
        [args.out],
    )
    return 0


def cmd_polarity(args) -> int:
    _load_config(args.config)
    subset = SampleSubset.load(args.subset)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    if args.side == "source" and not args.lexicon:
        print(
            "warning: the default lexicon is English but --side source selects the "
            "source-language column; supply --lexicon for non-English counting",
            file=sys.stderr,
        )
    counts = polarity_over_subset(subset, side=args.side, lexicon=lexicon)
    label = args.label or Path(args.subset).stem
    document = emit_polarity_table([PolarityRow(label, counts)], args.format)
    _emit(document, args.out)
    inputs = {args.subset: _file_sha256(args.subset)}
    if args.lexicon:
        inputs[args.lexicon] = _file_sha256(args.lexicon)
    _append_manifest(
        args.manifest,
        "polarity",
        {
            "subset": args.subset,
            "side": args.side,
            "lexicon": args.lexicon,
            "format": args.format,
            "label": label,
            "out": args.out,
        },
        inputs,
        [args.out] if args.out else [],
    )
    return 0


def _progress_printer(quiet: bool, prices=None):
    if quiet:
        return None

    def on_progress(done: int, total: int, ledger: CostLedger) -> None:
        step = max(1, total // 20)
        if done % step == 0 or done == total:
            snap = ledger.snapshot()
            cost = estimate_cost(ledger, prices)
            cost_note = "" if cost is None else f", cost {cost:.4f} {prices.currency}"
            print(
                f"analyzed {done}/{total} sentences "
                f"({snap['request_count']} requests, {snap['cache_hits']} cache hits{cost_note})",
                file=sys.stderr,
            )

    return on_progress


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    settings = _resolve_backend_settings(args, config)
    backend, prices = _build_backend(settings)
    template = _resolve_template(args.template)
    subset = SampleSubset.load(args.subset)
    max_in_flight = int(
        _first(
            args.max_in_flight,
            config.get("analyze", {}).get("max_in_flight"),
            os.environ.get(ENV_MAX_IN_FLIGHT),
            1,
        )
    )
    analysis = analyze_subset(
        subset,
        template,
        backend,
        side=args.side,
        max_in_flight=max_in_flight,
        on_progress=_progress_printer(args.quiet, prices),
        parse_retries=args.parse_retries,
    )
    save_analysis_jsonl(analysis, args.out)
    label = args.label or Path(args.subset).stem
    print(emit_llm_table([LlmRow(label, aggregate(analysis))], args.format), end="")
    total = len(analysis.analyses) + len(analysis.failures)
    if analysis.failures:
        print(f"failures: {len(analysis.failures)} of {total} sentences (recorded in {args.out})")
    _print_ledger_summary(backend.ledger, prices)
    inputs = {args.subset: _file_sha256(args.subset)}
    for path in (args.template, settings["fixtures"]):
        if path:
            inputs[path] = _file_sha256(path)
    _append_manifest(
        args.manifest,
        "analyze",
        {
            "subset": args.subset,
            "subset_fingerprint": subset.source_fingerprint,
            "side": args.side,
            "backend": settings,
            "template": args.template,
            "max_in_flight": max_in_flight,
            "parse_retries": args.parse_retries,
            "format": args.format,
            "label": label,
            "out": args.out,
        },
        inputs,
        [args.out],
        ledger=backend.ledger,
    )
    return 0


def _predicted_lists(analysis: CorpusAnalysis, gold_count: int):
    """Predictions aligned to gold sentences by order; failed sentences
    contribute empty predictions (every gold word counts as missed)."""
    records: dict[int, tuple] = {a.sentence_index: a.annotations for a in analysis.analyses}
    for failure in analysis.failures:
        records[failure.sentence_index] = ()
    if len(records) != gold_count:
        raise ValueError(
            f"predictions cover {len(records)} sentences but the gold file has {gold_count}"
        )
    return [records[index] for index in sorted(records)]


def cmd_validate(args) -> int:
    config = _load_config(args.config)
    gold = load_gold(args.gold)
    if not gold:
        raise ValueError(f"gold file {args.gold} contains no sentences")
    fmt = args.format
    inputs = {args.gold: _file_sha256(args.gold)}
    ledger = None
    settings = None

    if args.predictions:
        analysis = load_analysis_jsonl(args.predictions)
        predicted = _predicted_lists(analysis, len(gold))
        per_sentence = [match_annotations(p, g.annotations) for p, g in zip(predicted, gold)]
        pooled = pooled_match_counts((p, g.annotations) for p, g in zip(predicted, gold))
        scores = (
            per_sentence_mean_scores(per_sentence) if args.per_sentence else validation_scores(pooled)
        )
        model_label = args.model_label or next(
            (a.backend_meta.model_id for a in analysis.analyses if a.backend_meta.model_id),
            "predictions",
        )
        print(f"match counts: n_c={pooled.n_c} n_i={pooled.n_i} n_m={pooled.n_m} n_e={pooled.n_e}")
        runs = [scores]
        inputs[args.predictions] = _file_sha256(args.predictions)
    else:
        settings = _resolve_backend_settings(args, config)
        backend, prices = _build_backend(settings)
        template = _resolve_template(args.template)
        indexed = [(i, g.sentence) for i, g in enumerate(gold)]
        gold_fingerprint = texts_fingerprint([g.sentence for g in gold])
        runs = []
        for _ in range(args.repetitions):
            analysis = analyze_texts(
                indexed,
                template,
                backend,
                max_in_flight=args.max_in_flight or 1,
                on_progress=_progress_printer(args.quiet, prices),
                parse_retries=args.parse_retries,
                fingerprint=gold_fingerprint,
            )
            predicted = _predicted_lists(analysis, len(gold))
            per_sentence = [match_annotations(p, g.annotations) for p, g in zip(predicted, gold)]
            pooled = pooled_match_counts((p, g.annotations) for p, g in zip(predicted, gold))
            runs.append(
                per_sentence_mean_scores(per_sentence)
                if args.per_sentence
                else validation_scores(pooled)
            )
        model_label = args.model_label or backend.model_id
        ledger = backend.ledger
        _print_ledger_summary(ledger, prices)
        if args.template:
            inputs[args.template] = _file_sha256(args.template)
        if settings["fixtures"]:
            inputs[settings["fixtures"]] = _file_sha256(settings["fixtures"])

    document = emit_validation_table([(model_label, runs)], fmt)
    _emit(document, args.out)
    _append_manifest(
        args.manifest,
        "validate",
        {
            "gold": args.gold,
            "predictions": args.predictions,
            "backend": settings,
            "repetitions": args.repetitions if not args.predictions else 1,
            "per_sentence": args.per_sentence,
            "format": fmt,
            "out": args.out,
        },
        inputs,
        [args.out] if args.out else [],
        ledger=ledger,
    )
    return 0


def cmd_epicene(args) -> int:
    _load_config(args.config)
    analysis = load_analysis_jsonl(args.analysis)
    lexicon = load_epicene_lexicon(args.lexicon) if args.lexicon else None
    breakdown = epicene_breakdown(analysis, lexicon)
    document = emit_epicene_table(breakdown, args.format)
    _emit(document, args.out)
    inputs = {args.analysis: _file_sha256(args.analysis)}
    if args.lexicon:
        inputs[args.lexicon] = _file_sha256(args.lexicon)
    _append_manifest(
        args.manifest,
        "epicene",
        {"analysis": args.analysis, "lexicon": args.lexicon, "format": args.format, "out": args.out},
        inputs,
        [args.out] if args.out else [],
    )
    return 0


def _add_backend_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("http", "replay"), default="http")
    parser.add_argument("--fixtures", help="replay fixture JSONL ({key, response_text} records)")
    parser.add_argument("--model", help=f"model id (default {DEFAULT_MODEL}; env {ENV_MODEL})")
    parser.add_argument("--endpoint", help=f"chat-completions URL (env {ENV_ENDPOINT})")
    parser.add_argument(
        "--credential-env",
        help=f"name of the environment variable holding the API key (default {DEFAULT_CREDENTIAL_ENV})",
    )
    parser.add_argument("--timeout", type=float, help="request timeout in seconds (default 60)")
    parser.add_argument("--max-retries", type=int, help="retries for transient failures (default 3)")
    parser.add_argument("--cache", help="JSONL response cache path (append-only)")
    parser.add_argument("--template", help="prompt template JSON (default: built-in five-shot)")
    parser.add_argument("--price-input", type=float, help="currency per 1K input tokens")
    parser.add_argument("--price-output", type=float, help="currency per 1K output tokens")
    parser.add_argument("--max-in-flight", type=int, help="concurrent requests (default 1)")
    parser.add_argument("--parse-retries", type=int, default=0, help="re-request on unparsable output")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genderscope",
        description="Quantify gender representation bias in parallel Spanish/English corpora.",
    )
    parser.add_argument("--config", help="JSON config file (sections: backend, sampling, analyze)")
    parser.add_argument(
        "--manifest", default=DEFAULT_MANIFEST, help="run manifest JSONL to append to"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a seeded random subset of a parallel corpus")
    p.add_argument("--source", required=True, help="source-language file (one sentence per line)")
    p.add_argument("--target", required=True, help="target-language file, line-aligned")
    p.add_argument("--n", type=int, help="subset size (default: computed minimum)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="subset JSON output path")
    p.add_argument("--z", type=float, help="z-score (default 2.576, the 0.99 confidence level)")
    p.add_argument("--e", type=float, help="margin of error (default 0.05)")
    p.add_argument("--p", type=float, help="population proportion (default 0.5, worst case)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("polarity", help="count gendered English tokens over a subset")
    p.add_argument("subset", help="subset JSON from the sample command")
    p.add_argument("--side", choices=("source", "target"), default="target")
    p.add_argument("--lexicon", help="lexicon override JSON {male: [...], female: [...]}")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--label", help="dataset label (default: subset file stem)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_polarity)

    p = sub.add_parser("analyze", help="annotate a subset with an LLM backend")
    p.add_argument("subset", help="subset JSON from the sample command")
    p.add_argument("--side", choices=("source", "target"), default="source")
    p.add_argument("--out", required=True, help="analysis JSONL output path")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--label", help="dataset label (default: subset file stem)")
    _add_backend_arguments(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="score predictions against gold annotations")
    p.add_argument("--gold", required=True, help="gold annotations (JSON or Frase-block text)")
    p.add_argument("--predictions", help="analysis JSONL to score (otherwise runs the backend)")
    p.add_argument("--repetitions", type=int, default=1, help="live runs to aggregate (mean ± sd)")
    p.add_argument("--per-sentence", action="store_true", help="average per-sentence scores")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--model-label", help="row label (default: backend model id)")
    p.add_argument("--out", help="write the report here instead of stdout")
    _add_backend_arguments(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("epicene", help="tabulate epicene words in an analysis")
    p.add_argument("analysis", help="analysis JSONL from the analyze command")
    p.add_argument("--lexicon", help="epicene word list, one lowercase surface per line")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_epicene)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AlignmentError, CorpusDecodeError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (BackendConfigError, BackendRequestError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
