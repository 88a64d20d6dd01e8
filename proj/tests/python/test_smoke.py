import os
from pathlib import Path

import pytest

import esdsearch

FIXTURES = Path(os.environ.get("ESD_FIXTURES", Path(__file__).resolve().parents[2] / "data" / "fixtures"))
CATALOG = str(FIXTURES / "catalog.jsonl")


def test_tokenize_and_expand():
    assert esdsearch.tokenize("MODIS Terra, V06!") == ["modis", "terra", "v06"]
    expanded = esdsearch.expand_abbreviations("MODIS snow cover")
    assert expanded == "MODIS (Moderate Resolution Imaging Spectroradiometer) snow cover"
    assert esdsearch.expand_abbreviations(expanded) == expanded
    assert esdsearch.detect_abbreviations("GPM and MODIS") == [(0, "GPM"), (8, "MODIS")]


def test_metrics():
    ranked = ["a", "x", "b", "y"]
    assert esdsearch.recall_at_k(ranked, {"a", "b"}, 2) == 0.5
    assert esdsearch.reciprocal_rank(ranked, {"b"}) == pytest.approx(1 / 3)
    assert esdsearch.average_precision(ranked, {"a", "b"}) == pytest.approx((1 + 2 / 3) / 2)
    with pytest.raises(esdsearch.InvalidArgument):
        esdsearch.recall_at_k(ranked, set(), 1)


def test_understand():
    u = esdsearch.understand("I want to study Florida flooding")
    assert u["intent"] == "TYPE_B"
    assert "precipitation" in u["rewritten"]
    assert u["spatial"] is not None
    assert esdsearch.understand("ERA5 temperature 2020")["temporal"] == ("2020-01-01", "2020-12-31")


def test_fuzzy_match():
    ids = esdsearch.fuzzy_match("GPM IMERG Final Precipitation L3 1 day 0.1 degree x 0.1 degree V06", CATALOG)
    assert ids == ["GPM_3IMERGDF_06"]
    assert len(esdsearch.fuzzy_match("MODIS", CATALOG)) == 8


def test_engine_search_and_eval():
    engine = esdsearch.Engine(catalog=CATALOG)
    assert len(engine) > 30
    results = engine.search("ERA5 temperature 2020")
    assert results and {"id", "score", "rank"} <= set(results[0])
    assert "ERA5_SINGLE_LEVELS" in engine.ranked_ids("ERA5 temperature 2020", 5)
    explained = engine.search("flood analysis", explain=True)
    assert "explain" in explained
    report = engine.evaluate(FIXTURES / "bench.jsonl")
    assert report["failed"] == 0
    assert set(report["overall"]["recall"]) == {"10", "20", "50", "100"}


def test_errors():
    with pytest.raises(esdsearch.IoError):
        esdsearch.Engine(catalog="/nonexistent.jsonl")
    with pytest.raises(esdsearch.DataError):
        esdsearch.Engine(catalogue=CATALOG)
