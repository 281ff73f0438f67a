import csv
import io
import json

import pytest

from genderscope.annotation import Gender
from genderscope.metrics import (
    AggregateCounts,
    EpiceneBreakdown,
    EpiceneRow,
    ValidationScores,
)
from genderscope.polarity import GenderPolarityCounts
from genderscope.report import (
    LlmRow,
    PolarityRow,
    emit_epicene_table,
    emit_llm_table,
    emit_polarity_table,
    emit_validation_table,
)

EUROPARL1 = AggregateCounts(
    l_all_m=3531, l_all_f=3131, l_n_any=5989, l_p_any=677, l_p_m=541, l_p_f=136
)
WMT1 = AggregateCounts(l_all_m=3576, l_all_f=2489, l_n_any=5140, l_p_any=929, l_p_m=797, l_p_f=132)


def scores(value: float) -> ValidationScores:
    return ValidationScores(value, value, value, value)


class TestPolarityTable:
    def test_csv_row(self):
        doc = emit_polarity_table([PolarityRow("Europarl 1", GenderPolarityCounts(32, 23))], "csv")
        assert "Europarl 1,32,23,1.39 : 1" in doc
        assert doc.splitlines()[0] == "Dataset,G_M,G_F,G_M:G_F"

    def test_degenerate_ratio_cell(self):
        doc = emit_polarity_table([PolarityRow("X", GenderPolarityCounts(0, 0))], "csv")
        assert "X,0,0,n/a" in doc

    def test_json_has_four_keys(self):
        doc = emit_polarity_table([PolarityRow("Europarl 1", GenderPolarityCounts(32, 23))], "json")
        records = json.loads(doc)
        assert len(records) == 1
        assert set(records[0]) == {"dataset", "g_m", "g_f", "ratio"}
        assert records[0]["ratio"] == "1.39 : 1"

    def test_text_format_contains_values(self):
        doc = emit_polarity_table([PolarityRow("Europarl 1", GenderPolarityCounts(32, 23))], "text")
        assert "Europarl 1" in doc and "32" in doc and "1.39 : 1" in doc

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            emit_polarity_table([], "text")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            emit_polarity_table([PolarityRow("x", GenderPolarityCounts())], "latex")


class TestLlmTable:
    def test_europarl_row(self):
        doc = emit_llm_table([LlmRow("Europarl 1", EUROPARL1)], "csv")
        assert "Europarl 1,3531,3131,5989,677,541,136,3.98 : 1" in doc

    def test_wmt_ratio(self):
        doc = emit_llm_table([LlmRow("WMT-News 1", WMT1)], "csv")
        assert "6.04 : 1" in doc

    def test_all_zero_row(self):
        doc = emit_llm_table([LlmRow("empty", AggregateCounts())], "csv")
        assert "empty,0,0,0,0,0,0,n/a" in doc

    def test_formats_carry_identical_values(self):
        rows = [LlmRow("Europarl 1", EUROPARL1)]
        record = json.loads(emit_llm_table(rows, "json"))[0]
        csv_row = next(
            csv.DictReader(io.StringIO(emit_llm_table(rows, "csv")))
        )
        assert int(csv_row["L_*M"]) == record["l_all_m"] == 3531
        assert int(csv_row["L_PF"]) == record["l_p_f"] == 136
        assert csv_row["L_PM:L_PF"] == record["ratio"] == "3.98 : 1"
        text = emit_llm_table(rows, "text")
        for value in ("3531", "3131", "5989", "677", "541", "136", "3.98 : 1"):
            assert value in text

    def test_emission_is_pure(self):
        rows = [LlmRow("Europarl 1", EUROPARL1), LlmRow("WMT-News 1", WMT1)]
        for fmt in ("text", "csv", "json"):
            assert emit_llm_table(rows, fmt) == emit_llm_table(rows, fmt)


class TestValidationTable:
    def test_five_identical_runs_zero_sd(self):
        doc = emit_validation_table([("model-a", [scores(0.894)] * 5)], "text")
        assert "89.40 ± 0.00" in doc

    def test_two_runs_sample_sd(self):
        doc = emit_validation_table([("model-a", [scores(0.88), scores(0.90)])], "text")
        assert "89.00 ± 1.41" in doc

    def test_percent_formatting_matches_target_shape(self):
        # engineered run set: mean 89.40, sample sd 0.98 after rounding
        values = [0.8816, 0.8878, 0.894, 0.9002, 0.9064]
        doc = emit_validation_table([("gpt-4-turbo", [scores(v) for v in values])], "text")
        assert "89.40 ± 0.98" in doc

    def test_single_run_footnoted(self):
        doc = emit_validation_table([("model-a", [scores(1.0)])], "text")
        assert "100.00 ± 0.00" in doc
        assert "Runs = 1" in doc

    def test_undefined_metric_is_na(self):
        runs = [ValidationScores(0.5, None, 0.5, None)]
        record = json.loads(emit_validation_table([("m", runs)], "json"))[0]
        assert record["precision"] is None
        assert record["accuracy"] == {"mean": 50.0, "sd": 0.0}
        text = emit_validation_table([("m", runs)], "text")
        assert "n/a" in text

    def test_csv_and_json_values_agree(self):
        runs = [scores(0.88), scores(0.90), scores(0.89)]
        record = json.loads(emit_validation_table([("m", runs)], "json"))[0]
        csv_row = next(csv.DictReader(io.StringIO(emit_validation_table([("m", runs)], "csv"))))
        mean, sd = csv_row["Accuracy (%)"].split(" ± ")
        assert float(mean) == record["accuracy"]["mean"]
        assert float(sd) == record["accuracy"]["sd"]
        assert int(csv_row["Runs"]) == record["runs"] == 3

    def test_model_without_runs_rejected(self):
        with pytest.raises(ValueError):
            emit_validation_table([("m", [])], "text")


def sample_breakdown():
    rows = (
        EpiceneRow("personas", True, Gender.FEMININE, 149),
        EpiceneRow("miembros", True, Gender.MASCULINE, 63),
    )
    return EpiceneBreakdown(rows, feminine_count=149, masculine_count=63, feminine_share=149 / 212)


class TestEpiceneTable:
    def test_text_includes_rows_and_share(self):
        doc = emit_epicene_table(sample_breakdown(), "text")
        assert "personas" in doc and "149" in doc
        assert "feminine share: 70.28%" in doc

    def test_csv_rows_only(self):
        doc = emit_epicene_table(sample_breakdown(), "csv")
        lines = doc.splitlines()
        assert lines[0] == "Word,Person,Gender,Frequency"
        assert "personas,P,F,149" in lines
        assert len(lines) == 3

    def test_json_totals(self):
        doc = json.loads(emit_epicene_table(sample_breakdown(), "json"))
        assert doc["totals"]["feminine_count"] == 149
        assert doc["totals"]["feminine_share"] == pytest.approx(0.7028, abs=1e-4)
        assert doc["rows"][0]["word"] == "personas"

    def test_empty_breakdown_na_share(self):
        breakdown = EpiceneBreakdown((), 0, 0, None)
        doc = emit_epicene_table(breakdown, "text")
        assert "feminine share: n/a" in doc
