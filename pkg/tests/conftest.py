import json
from pathlib import Path

import pytest

from genderscope.annotation import default_template, render_prompt
from genderscope.corpus import load_parallel_corpus, sample_subset
from genderscope.llm_backend import write_replay_fixture

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def replay_case() -> list[dict]:
    """The shipped 10-sentence es/en fixture with canned analysis responses."""
    doc = json.loads((FIXTURE_DIR / "replay_case.json").read_text(encoding="utf-8"))
    return doc["pairs"]


@pytest.fixture
def replay_corpus_files(tmp_path, replay_case):
    """Write the fixture pairs as line-aligned corpus files."""
    source = tmp_path / "es.txt"
    target = tmp_path / "en.txt"
    source.write_text("\n".join(p["es"] for p in replay_case) + "\n", encoding="utf-8")
    target.write_text("\n".join(p["en"] for p in replay_case) + "\n", encoding="utf-8")
    return source, target


@pytest.fixture
def replay_subset_file(tmp_path, replay_corpus_files):
    """An exhaustive subset (all 10 pairs) of the fixture corpus."""
    source, target = replay_corpus_files
    corpus = load_parallel_corpus(source, target)
    subset = sample_subset(corpus, n=len(corpus), seed=7)
    path = tmp_path / "subset.json"
    subset.save(path)
    return path


@pytest.fixture
def replay_fixture_file(tmp_path, replay_case):
    """Replay JSONL keyed by the default prompt for each Spanish sentence."""
    template = default_template()
    mapping = {render_prompt(template, p["es"]): p["response"] for p in replay_case}
    path = tmp_path / "replay.jsonl"
    write_replay_fixture(mapping, path)
    return path


def write_lines(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {outcome}")
    elif report.when == "setup" and report.skipped:
        print(f"\n[acceptance] {name}: SKIP")
