import json

import pytest

from geoextract.corpus import Document
from geoextract.gazetteer import GazetteerIndex, GeoEntry, ingest_geonames

# geonameid, name, asciiname, alternates, lat, lon, fclass, fcode, country,
# cc2, admin1..4, population, elevation, dem, timezone, modified
GEONAMES_ROWS = [
    (202061, "Goma", "Goma", "", -1.67409, 29.2284, "P", "PPLA", "CD", "", "", "", "", "", 249862, "", "1460", "Africa/Lubumbashi", "2023-01-01"),
    (217831, "Bukavu", "Bukavu", "", -2.49077, 28.84281, "P", "PPLA", "CD", "", "", "", "", "", 225389, "", "1510", "Africa/Lubumbashi", "2023-01-01"),
    (202905, "Kigali", "Kigali", "", -1.94995, 30.05885, "P", "PPLC", "RW", "", "", "", "", "", 745261, "", "1542", "Africa/Kigali", "2023-01-01"),
    (49518, "Rwanda", "Rwanda", "Republic of Rwanda", -2.0, 30.0, "A", "PCLI", "RW", "", "", "", "", "", 12955768, "", "1400", "Africa/Kigali", "2023-01-01"),
    (203312, "Democratic Republic of the Congo", "Democratic Republic of the Congo", "DR Congo,Congo-Kinshasa", -2.5, 23.5, "A", "PCLI", "CD", "", "", "", "", "", 77266814, "", "400", "Africa/Kinshasa", "2023-01-01"),
    (363196, "Mediterranean Sea", "Mediterranean Sea", "Mediterranean", 36.0, 15.0, "H", "SEA", "", "", "", "", "", "", 0, "", "0", "", "2023-01-01"),
    (3173435, "Milan", "Milan", "Milano,Mailand", 45.46427, 9.18951, "P", "PPLA", "IT", "", "", "", "", "", 1236837, "", "122", "Europe/Rome", "2023-01-01"),
    (614540, "Georgia", "Georgia", "Sakartvelo", 42.0, 43.5, "A", "PCLI", "GE", "", "", "", "", "", 4630000, "", "1100", "Asia/Tbilisi", "2023-01-01"),
    (4197000, "Georgia", "Georgia", "State of Georgia", 32.75042, -83.50018, "A", "ADM1", "US", "", "", "", "", "", 9687653, "", "100", "America/New_York", "2023-01-01"),
    (9999001, "Goma", "Goma", "", 0.5, 32.0, "P", "PPL", "UG", "", "", "", "", "", 1200, "", "1100", "Africa/Kampala", "2023-01-01"),
]


def rows_to_tsv(rows) -> str:
    return "\n".join("\t".join(str(c) for c in row) for row in rows) + "\n"


@pytest.fixture(scope="session")
def geonames_tsv(tmp_path_factory):
    path = tmp_path_factory.mktemp("gazetteer") / "sample_geonames.tsv"
    path.write_text(rows_to_tsv(GEONAMES_ROWS), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def fixture_index(geonames_tsv) -> GazetteerIndex:
    return ingest_geonames(geonames_tsv)


def make_entry(gid, name, lat, lon, *, country="XA", fclass="P", fcode="PPL",
               population=0, alternates=()):
    return GeoEntry(
        geonameid=gid, name=name, ascii_name=name,
        alternate_names=tuple(alternates), lat=lat, lon=lon,
        feature_class=fclass, feature_code=fcode,
        country_code=country, population=population,
    )


@pytest.fixture()
def sample_docs() -> list[Document]:
    return [
        Document(id="d1", text="Heavy fighting was reported near Goma on Tuesday."),
        Document(id="d2", text="Aid convoys left Bukavu for Kigali this morning."),
        Document(id="d3", text="Ferries crossed the Mediterranean Sea toward Milan."),
    ]


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
