import math

import pytest

from geoextract.gazetteer import (
    GazetteerIndex,
    haversine_km,
    ingest_geonames,
    load_continent_table,
    load_income_table,
    load_index,
    normalize_name,
    save_index,
)

from conftest import GEONAMES_ROWS, make_entry, rows_to_tsv


def test_ingest_counts_and_lookup(fixture_index):
    assert len(fixture_index) == len(GEONAMES_ROWS)
    for row in GEONAMES_ROWS:
        entry = fixture_index.get(row[0])
        assert entry is not None
        assert entry.name == row[1]


def test_ingest_skips_malformed_rows(tmp_path, caplog):
    rows = list(GEONAMES_ROWS[:2])
    path = tmp_path / "bad.tsv"
    good = rows_to_tsv(rows)
    bad = "1\tOnlyEighteen" + "\tx" * 16 + "\n"          # 18 columns
    worse = "notanint\tB\tB\t\t0\t0\tP\tPPL\tXA\t\t\t\t\t\t0\t\t\t\t2023\n"
    path.write_text(good + bad + worse, encoding="utf-8")
    index = ingest_geonames(path)
    assert len(index) == 2
    assert index.skipped_rows == 2


def test_ingest_empty_alternates(fixture_index):
    assert fixture_index.get(202061).alternate_names == ()


def test_unreadable_file():
    from geoextract.gazetteer import GazetteerError
    with pytest.raises(GazetteerError):
        ingest_geonames("/nonexistent/path.tsv")


def test_get_not_found_and_sentinel(fixture_index):
    assert fixture_index.get(123456789) is None
    assert fixture_index.get(-1) is None


def test_search_country_name_ranks_sovereign_first(fixture_index):
    results = fixture_index.search("Georgia")
    assert results[0].geonameid == 614540          # PCLI beats the US state
    assert results[0].feature_code == "PCLI"
    ids = [e.geonameid for e in results]
    assert 4197000 in ids


def test_search_population_tiebreak(fixture_index):
    results = fixture_index.search("Goma")
    assert [e.geonameid for e in results][:2] == [202061, 9999001]


def test_search_no_hit_is_empty(fixture_index):
    assert fixture_index.search("Nonexistentville-xyz") == []


def test_search_country_filter_subsets(fixture_index):
    unfiltered = {e.geonameid for e in fixture_index.search("Goma", limit=10)}
    filtered = {e.geonameid
                for e in fixture_index.search("Goma", country_code="UG", limit=10)}
    assert filtered <= unfiltered
    assert all(fixture_index.get(g).country_code == "UG" for g in filtered)


def test_search_alternate_name(fixture_index):
    results = fixture_index.search("Mediterranean")
    assert results[0].geonameid == 363196


def test_search_accent_insensitive(fixture_index):
    assert fixture_index.search("Milâno")[0].geonameid == 3173435


def test_search_prefix_fallback(fixture_index):
    results = fixture_index.search("Buka")
    assert results and results[0].geonameid == 217831


def test_search_exact_beats_prefix():
    entries = [
        make_entry(1, "Para", 0, 0, population=10),
        make_entry(2, "Paraguay", 0, 0, fclass="A", fcode="PCLI",
                   population=7_000_000),
    ]
    index = GazetteerIndex(entries)
    assert index.search("Para")[0].geonameid == 1


def test_search_validates_arguments(fixture_index):
    with pytest.raises(ValueError):
        fixture_index.search("")
    with pytest.raises(ValueError):
        fixture_index.search("Goma", limit=0)


def test_ranking_deterministic_total_order():
    # identical names and populations: geonameid decides
    entries = [make_entry(5, "Twin", 0, 0), make_entry(3, "Twin", 0, 0)]
    index = GazetteerIndex(entries)
    assert [e.geonameid for e in index.search("Twin")] == [3, 5]


def test_normalize_name():
    assert normalize_name("São Paulo") == normalize_name("Sao Paulo")
    assert normalize_name("GOMA") == "goma"


def test_index_save_load_round_trip(fixture_index, tmp_path):
    path = tmp_path / "index.jsonl.gz"
    save_index(fixture_index, path)
    loaded = load_index(path)
    assert len(loaded) == len(fixture_index)
    assert loaded.get(202061) == fixture_index.get(202061)
    assert [e.geonameid for e in loaded.search("Georgia")] == \
        [e.geonameid for e in fixture_index.search("Georgia")]


# ── geometry ─────────────────────────────────────────────────────────────

def test_haversine_identity():
    assert haversine_km(12.5, -7.25, 12.5, -7.25) == 0.0


def test_haversine_antipodal():
    assert haversine_km(0, 0, 0, 180) == pytest.approx(math.pi * 6371.0, abs=0.1)


def test_haversine_paris_london():
    # independent oracle: spherical law of cosines
    lat1, lon1 = 48.8566, 2.3522
    lat2, lon2 = 51.5074, -0.1278
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    oracle = 6371.0 * math.acos(
        math.sin(p1) * math.sin(p2)
        + math.cos(p1) * math.cos(p2) * math.cos(l2 - l1)
    )
    got = haversine_km(lat1, lon1, lat2, lon2)
    assert got == pytest.approx(oracle, abs=1e-6)
    assert got == pytest.approx(343.9, abs=1.0)


def test_haversine_symmetry_and_triangle():
    pts = [(0, 0), (10, 20), (-33.9, 18.4), (48.85, 2.35), (71.0, -42.0)]
    for a in pts:
        for b in pts:
            assert haversine_km(*a, *b) == pytest.approx(
                haversine_km(*b, *a), rel=1e-12)
    for a in pts:
        for b in pts:
            for c in pts:
                ab = haversine_km(*a, *b)
                bc = haversine_km(*b, *c)
                ac = haversine_km(*a, *c)
                assert ac <= ab + bc + 1e-6


# ── segmentation tables ──────────────────────────────────────────────────

def test_bundled_continent_table():
    table = load_continent_table()
    assert table["CD"] == "Africa"
    assert table["RW"] == "Africa"
    assert table["IT"] == "Europe"
    assert table["GE"] == "Asia"
    assert table["US"] == "Americas"
    assert table["BR"] == "Americas"
    assert table["AU"] == "Other"
    assert set(table.values()) == {"Africa", "Asia", "Europe", "Americas", "Other"}


def test_income_table(tmp_path):
    path = tmp_path / "income.csv"
    path.write_text(
        "country_code,income_level\nCD,low\nRW,low\nIT,high\nGE,upper-middle\n",
        encoding="utf-8",
    )
    table = load_income_table(path)
    assert table == {"CD": "low", "RW": "low", "IT": "high", "GE": "upper-middle"}


def test_income_table_rejects_unknown_level(tmp_path):
    from geoextract.gazetteer import GazetteerError
    path = tmp_path / "income.csv"
    path.write_text("CD,medium\n", encoding="utf-8")
    with pytest.raises(GazetteerError, match="medium"):
        load_income_table(path)
