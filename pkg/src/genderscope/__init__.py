"""genderscope: measure gender representation bias in parallel es/en corpora.

Two measurement paths share the sampling and reporting machinery: a unigram
gender-polarity counter for English text, and an LLM-annotation pipeline for
Spanish that classifies every noun/pronoun by person reference and
grammatical gender.
"""

from .annotation import (
    CorpusAnalysis,
    FewShotExample,
    Gender,
    PromptTemplate,
    ResponseParseError,
    SentenceAnalysis,
    WordAnnotation,
    analyze_sentence,
    analyze_subset,
    default_few_shot,
    default_template,
    format_as_response,
    parse_analysis,
    render_prompt,
)
from .corpus import (
    AlignmentError,
    CorpusDecodeError,
    ParallelCorpus,
    SampleSubset,
    SamplingParams,
    SentencePair,
    load_parallel_corpus,
    required_sample_size,
    sample_subset,
)
from .llm_backend import (
    BackendConfig,
    BackendConfigError,
    BackendRequestError,
    CachedBackend,
    Completion,
    CostLedger,
    HttpBackend,
    PriceTable,
    ReplayBackend,
    cached,
    estimate_cost,
    replay_key,
    write_replay_fixture,
)
from .metrics import (
    AggregateCounts,
    BiasRatio,
    EpiceneBreakdown,
    MatchCounts,
    ValidationScores,
    aggregate,
    bias_ratio,
    epicene_breakdown,
    match_annotations,
    validation_scores,
)
from .polarity import (
    GenderPolarityCounts,
    TokenLexicon,
    default_lexicon,
    gender_polarity,
    polarity_over_subset,
    tokenize,
)

__version__ = "0.1.0"
