import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genderscope.corpus import (
    AlignmentError,
    CorpusDecodeError,
    ParallelCorpus,
    SampleSubset,
    SamplingParams,
    load_parallel_corpus,
    required_sample_size,
    sample_subset,
)

from conftest import write_lines


def make_corpus_files(tmp_path, source_lines, target_lines):
    source = write_lines(tmp_path / "es.txt", source_lines)
    target = write_lines(tmp_path / "en.txt", target_lines)
    return source, target


class TestLoadParallelCorpus:
    def test_three_line_files_align(self, tmp_path):
        source, target = make_corpus_files(tmp_path, ["a", "b", "c"], ["x", "y", "z"])
        corpus = load_parallel_corpus(source, target)
        assert len(corpus) == 3
        pairs = list(corpus)
        assert [p.index for p in pairs] == [0, 1, 2]
        assert pairs[1].source_text == "b"
        assert pairs[1].target_text == "y"

    def test_line_count_mismatch_names_both_counts(self, tmp_path):
        source, target = make_corpus_files(tmp_path, ["a"] * 5, ["x"] * 4)
        with pytest.raises(AlignmentError, match=r"5.*4"):
            load_parallel_corpus(source, target)

    def test_undecodable_bytes_name_line(self, tmp_path):
        source = tmp_path / "es.txt"
        source.write_bytes("uno\ndos\n".encode("utf-8") + b"\xff\xfe bad\n")
        target = write_lines(tmp_path / "en.txt", ["one", "two", "three"])
        with pytest.raises(CorpusDecodeError, match=r"line 3"):
            load_parallel_corpus(source, target)

    def test_crlf_endings_stripped(self, tmp_path):
        source = tmp_path / "es.txt"
        source.write_bytes(b"hola\r\nadios\r\n")
        target = write_lines(tmp_path / "en.txt", ["hello", "bye"])
        corpus = load_parallel_corpus(source, target)
        assert [p.source_text for p in corpus] == ["hola", "adios"]

    def test_no_trailing_newline_still_counts_last_line(self, tmp_path):
        source = tmp_path / "es.txt"
        source.write_bytes(b"uno\ndos")
        target = write_lines(tmp_path / "en.txt", ["one", "two"])
        assert len(load_parallel_corpus(source, target)) == 2

    def test_blank_lines_kept_in_index_space_but_flagged(self, tmp_path):
        source, target = make_corpus_files(tmp_path, ["a", "   ", "c"], ["x", "y", "z"])
        corpus = load_parallel_corpus(source, target)
        assert len(corpus) == 3
        assert corpus.skipped_indices == (1,)
        assert corpus.sampleable_indices == (0, 2)

    def test_fingerprint_depends_on_both_files(self, tmp_path):
        source, target = make_corpus_files(tmp_path, ["a"], ["x"])
        fp1 = load_parallel_corpus(source, target).fingerprint
        target.write_text("different\n", encoding="utf-8")
        fp2 = load_parallel_corpus(source, target).fingerprint
        assert fp1 != fp2


class TestRequiredSampleSize:
    def test_paper_defaults_give_664(self):
        assert required_sample_size(SamplingParams(2.576, 0.05, 0.5)) == 664

    def test_zero_variance_proportion_gives_zero(self):
        assert required_sample_size(SamplingParams(1.0, 1.0, 0.0)) == 0

    def test_95_confidence_gives_385(self):
        # 1.96^2 * 0.25 / 0.0025 = 384.16, ceiled
        assert required_sample_size(SamplingParams(1.96, 0.05, 0.5)) == 385

    @pytest.mark.parametrize(
        "z,e,p", [(0.0, 0.05, 0.5), (2.576, 0.0, 0.5), (2.576, -1.0, 0.5), (2.576, 0.05, 1.5)]
    )
    def test_invalid_params_rejected(self, z, e, p):
        with pytest.raises(ValueError):
            SamplingParams(z, e, p)

    @given(
        z=st.floats(0.1, 5.0),
        e1=st.floats(0.01, 1.0),
        e2=st.floats(0.01, 1.0),
        p=st.floats(0.0, 1.0),
    )
    def test_monotone_nonincreasing_in_margin(self, z, e1, e2, p):
        lo, hi = sorted((e1, e2))
        n_hi_margin = required_sample_size(SamplingParams(z, hi, p))
        n_lo_margin = required_sample_size(SamplingParams(z, lo, p))
        assert n_lo_margin >= n_hi_margin

    @given(
        z1=st.floats(0.1, 5.0),
        z2=st.floats(0.1, 5.0),
        e=st.floats(0.01, 1.0),
        p=st.floats(0.0, 1.0),
    )
    def test_monotone_nondecreasing_in_z(self, z1, z2, e, p):
        lo, hi = sorted((z1, z2))
        assert required_sample_size(SamplingParams(hi, e, p)) >= required_sample_size(
            SamplingParams(lo, e, p)
        )


def ten_pair_corpus(tmp_path):
    return make_corpus_files(
        tmp_path, [f"es {i}" for i in range(10)], [f"en {i}" for i in range(10)]
    )


class TestSampleSubset:
    def test_exhaustive_sample_returns_all_pairs(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        subset = sample_subset(corpus, n=10, seed=123)
        assert [p.index for p in subset.pairs] == list(range(10))
        assert not subset.clamped

    def test_same_seed_same_subset(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        first = sample_subset(corpus, n=3, seed=42)
        second = sample_subset(corpus, n=3, seed=42)
        assert first == second

    def test_different_seeds_can_differ(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        drawn = {tuple(p.index for p in sample_subset(corpus, 3, seed).pairs) for seed in range(20)}
        assert len(drawn) > 1

    def test_europarl_scale_sampling_unique_indices(self):
        n_pairs = 1_965_734
        corpus = ParallelCorpus(
            [f"es{i}" for i in range(n_pairs)], [f"en{i}" for i in range(n_pairs)], "synthetic"
        )
        assert len(corpus) == n_pairs
        subset = sample_subset(corpus, n=1000, seed=1)
        indices = [p.index for p in subset.pairs]
        assert len(indices) == 1000
        assert len(set(indices)) == 1000
        assert indices == sorted(indices)

    def test_oversized_n_clamps_with_flag(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        subset = sample_subset(corpus, n=50, seed=0)
        assert len(subset.pairs) == 10
        assert subset.clamped
        assert subset.requested_n == 50

    def test_n_below_one_rejected(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        with pytest.raises(ValueError):
            sample_subset(corpus, n=0, seed=0)

    def test_blank_lines_never_sampled(self, tmp_path):
        source, target = make_corpus_files(
            tmp_path, ["a", "", "c", "d"], ["w", "x", "", "z"]
        )
        corpus = load_parallel_corpus(source, target)
        for seed in range(30):
            subset = sample_subset(corpus, n=2, seed=seed)
            assert all(p.index in (0, 3) for p in subset.pairs)

    def test_serialization_round_trip(self, tmp_path):
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        subset = sample_subset(corpus, n=4, seed=9)
        path = tmp_path / "subset.json"
        subset.save(path)
        loaded = SampleSubset.load(path)
        assert loaded == subset
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert set(doc) == {"seed", "requested_n", "source_fingerprint", "pairs"}

    def test_byte_identical_serialization_for_same_inputs(self, tmp_path):
        files = ten_pair_corpus(tmp_path)
        one = sample_subset(load_parallel_corpus(*files), n=5, seed=77).to_json()
        two = sample_subset(load_parallel_corpus(*files), n=5, seed=77).to_json()
        assert one.encode("utf-8") == two.encode("utf-8")

    def test_single_draw_uniformity(self, tmp_path):
        # statistical check: 10,000 single draws from 10 pairs, each index
        # should land within 5 percentage points of the uniform 10%
        corpus = load_parallel_corpus(*ten_pair_corpus(tmp_path))
        counts = Counter()
        for seed in range(10_000):
            subset = sample_subset(corpus, n=1, seed=seed)
            counts[subset.pairs[0].index] += 1
        for index in range(10):
            assert 500 <= counts[index] <= 1500, f"index {index} drawn {counts[index]} times"
