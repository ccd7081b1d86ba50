"""Publication records: loading, validation, text normalization, citation graph.

The loader is deliberately strict: records that violate the schema are
skipped and reported rather than repaired. Every downstream module relies
on the invariants enforced here (unique pub_id, year range, known country
codes), so a record either enters the corpus whole or not at all.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import sys
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .errors import InputError

logger = logging.getLogger(__name__)

ORG_TYPES = frozenset({"HEI", "RC", "GOV", "HOSPITAL", "NGO", "COMPANY", "OTHER"})
CONTINENTS = ("Africa", "America", "Asia", "Europe", "Oceania")

YEAR_MIN = 1900
YEAR_MAX = 2100

# Dash variants and slashes separate words; all other punctuation is dropped
# outright, so "don't" becomes "dont" while "sub-Saharan" becomes "sub saharan".
_SEPARATORS = str.maketrans({c: " " for c in "-‐‑‒–—―/"})
_STRIP = re.compile(r"[^\w\s]|_")


def normalize_text(text: str) -> str:
    """Canonical text form: NFKC, lowercased, separator-folded, tokenized.

    Returns the normalized tokens joined by single spaces, so equal return
    values mean equal token sequences.
    """
    text = unicodedata.normalize("NFKC", text).lower()
    text = text.translate(_SEPARATORS)
    text = _STRIP.sub("", text)
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    """Normalized word tokens of ``text``."""
    return normalize_text(text).split()


@lru_cache(maxsize=65536)
def normalize_term(term: str) -> str:
    """normalize_text specialised for keywords; cached, they repeat heavily."""
    return normalize_text(term)


@lru_cache(maxsize=1)
def continent_table() -> dict[str, str]:
    """Bundled ISO-3166 alpha-2 country -> continent mapping."""
    path = Path(__file__).parent / "data" / "country_continent.csv"
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line == "country_code,continent":
                continue
            code, continent = line.split(",")
            if continent not in CONTINENTS:
                raise InputError(f"bad continent {continent!r} in bundled table")
            table[code] = continent
    return table


@dataclass(slots=True)
class Affiliation:
    org_id: str
    org_name: str
    org_type: str
    country: str
    continent: str


@dataclass(slots=True)
class PublicationRecord:
    pub_id: str
    year: int
    title: str
    abstract: str
    author_keywords: list[str]
    index_keywords: list[str]
    references: list[str]
    affiliations: list[Affiliation]

    def keywords(self) -> list[str]:
        """Both keyword lists, normalized and deduplicated, order preserved."""
        out: list[str] = []
        seen: set[str] = set()
        for raw in self.author_keywords + self.index_keywords:
            term = normalize_term(raw)
            if term and term not in seen:
                seen.add(term)
                out.append(term)
        return out

    def first_author_continent(self) -> str | None:
        if not self.affiliations:
            return None
        return self.affiliations[0].continent


@dataclass(slots=True)
class LoadIssue:
    line: int
    pub_id: str | None
    reason: str


@dataclass(slots=True)
class Corpus:
    records: dict[str, PublicationRecord]
    skipped: list[LoadIssue] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, pub_id: str) -> bool:
        return pub_id in self.records

    def __iter__(self):
        return iter(self.records.values())

    def get(self, pub_id: str) -> PublicationRecord | None:
        return self.records.get(pub_id)


def _build_record(raw: dict, line: int) -> tuple[PublicationRecord | None, str | None]:
    """Validate one raw mapping; returns (record, None) or (None, reason)."""
    pub_id = raw.get("pub_id")
    if not isinstance(pub_id, str) or not pub_id:
        return None, "missing or empty pub_id"
    year = raw.get("year")
    if isinstance(year, bool) or not isinstance(year, int):
        return None, "year is not an integer"
    if not YEAR_MIN <= year <= YEAR_MAX:
        return None, f"year {year} outside [{YEAR_MIN}, {YEAR_MAX}]"

    def str_field(key: str) -> str:
        value = raw.get(key, "")
        return value if isinstance(value, str) else None

    def list_field(key: str) -> list[str] | None:
        value = raw.get(key, [])
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            return None
        return value

    title = str_field("title")
    abstract = str_field("abstract")
    if title is None or abstract is None:
        return None, "title/abstract is not a string"
    author_kw = list_field("author_keywords")
    index_kw = list_field("index_keywords")
    references = list_field("references")
    if author_kw is None or index_kw is None or references is None:
        return None, "keyword/reference field is not a list of strings"

    countries = continent_table()
    raw_affils = raw.get("affiliations", [])
    if not isinstance(raw_affils, list):
        return None, "affiliations is not a list"
    affiliations = []
    for pos, entry in enumerate(raw_affils):
        if not isinstance(entry, dict):
            return None, f"affiliation {pos} is not an object"
        org_id = entry.get("org_id")
        org_type = entry.get("org_type")
        country = entry.get("country")
        if not isinstance(org_id, str) or not org_id:
            return None, f"affiliation {pos}: missing org_id"
        if org_type not in ORG_TYPES:
            return None, f"affiliation {pos}: unknown org_type {org_type!r}"
        if country not in countries:
            return None, f"affiliation {pos}: unknown country code {country!r}"
        affiliations.append(
            Affiliation(
                org_id=sys.intern(org_id),
                org_name=entry.get("org_name", ""),
                org_type=sys.intern(org_type),
                country=sys.intern(country),
                continent=countries[country],
            )
        )

    record = PublicationRecord(
        pub_id=sys.intern(pub_id),
        year=year,
        title=title,
        abstract=abstract,
        author_keywords=author_kw,
        index_keywords=index_kw,
        references=[sys.intern(r) for r in references],
        affiliations=affiliations,
    )
    return record, None


_CSV_COLUMNS = [
    "pub_id",
    "year",
    "title",
    "abstract",
    "author_keywords",
    "index_keywords",
    "references",
    "affiliations",
]


def _row_to_raw(row: dict, line: int) -> tuple[dict | None, str | None]:
    """Decode one CSV row into the JSONL-shaped mapping.

    List cells use "|" between elements; affiliation elements are
    "org_id;org_name;org_type;country". Field text therefore must not
    contain the delimiters, which the loaders do not attempt to escape.
    """
    raw: dict = {"pub_id": row.get("pub_id", ""), "title": row.get("title", ""),
                 "abstract": row.get("abstract", "")}
    try:
        raw["year"] = int(row.get("year", ""))
    except ValueError:
        raw["year"] = row.get("year")
    for key in ("author_keywords", "index_keywords", "references"):
        cell = row.get(key) or ""
        raw[key] = [item for item in cell.split("|") if item] if cell else []
    cell = row.get("affiliations") or ""
    affiliations = []
    for chunk in cell.split("|") if cell else []:
        parts = chunk.split(";")
        if len(parts) != 4:
            return None, f"affiliation cell {chunk!r} does not split into 4 fields"
        affiliations.append(
            {"org_id": parts[0], "org_name": parts[1],
             "org_type": parts[2], "country": parts[3]}
        )
    raw["affiliations"] = affiliations
    return raw, None


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus file; invalid records are skipped and reported.

    ``format`` is "jsonl" (one object per line) or "csv" (see _row_to_raw
    for the cell encoding). Later records with a duplicate pub_id lose.
    """
    path = Path(path)
    if format not in ("jsonl", "csv"):
        raise InputError(f"unknown corpus format {format!r}")
    if not path.is_file():
        raise InputError(f"corpus file not found: {path}")

    records: dict[str, PublicationRecord] = {}
    skipped: list[LoadIssue] = []

    def add(raw: dict | None, line: int, reason: str | None) -> None:
        if raw is None:
            skipped.append(LoadIssue(line, None, reason or "unreadable record"))
            return
        record, why = _build_record(raw, line)
        if record is None:
            skipped.append(LoadIssue(line, raw.get("pub_id"), why))
        elif record.pub_id in records:
            skipped.append(LoadIssue(line, record.pub_id, "duplicate pub_id"))
        else:
            records[record.pub_id] = record

    with open(path, encoding="utf-8") as fh:
        if format == "jsonl":
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    add(None, line_no, f"bad JSON: {exc.msg}")
                    continue
                if not isinstance(raw, dict):
                    add(None, line_no, "line is not a JSON object")
                    continue
                add(raw, line_no, None)
        else:
            reader = csv.DictReader(fh)
            for line_no, row in enumerate(reader, start=2):
                raw, why = _row_to_raw(row, line_no)
                add(raw, line_no, why)

    for issue in skipped:
        logger.warning("skipped record at line %d: %s", issue.line, issue.reason)
    logger.info("loaded %d records from %s (%d skipped)", len(records), path, len(skipped))
    return Corpus(records=records, skipped=skipped)


def save_corpus(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    """Write the corpus back out; load_corpus(save_corpus(c)) == c field-for-field."""
    path = Path(path)
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for pub_id in sorted(corpus.records):
                rec = corpus.records[pub_id]
                obj = {
                    "pub_id": rec.pub_id,
                    "year": rec.year,
                    "title": rec.title,
                    "abstract": rec.abstract,
                    "author_keywords": rec.author_keywords,
                    "index_keywords": rec.index_keywords,
                    "references": rec.references,
                    "affiliations": [
                        {"org_id": a.org_id, "org_name": a.org_name,
                         "org_type": a.org_type, "country": a.country}
                        for a in rec.affiliations
                    ],
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for pub_id in sorted(corpus.records):
                rec = corpus.records[pub_id]
                affils = "|".join(
                    f"{a.org_id};{a.org_name};{a.org_type};{a.country}"
                    for a in rec.affiliations
                )
                writer.writerow([
                    rec.pub_id, rec.year, rec.title, rec.abstract,
                    "|".join(rec.author_keywords), "|".join(rec.index_keywords),
                    "|".join(rec.references), affils,
                ])
    else:
        raise InputError(f"unknown corpus format {format!r}")


@dataclass(slots=True)
class CitationGraph:
    """Directed citation graph over pub_ids; immutable once built.

    Referenced ids absent from the corpus stay in the graph as phantom
    nodes (they matter for expansion accounting) but carry no metadata.
    """

    nodes: set[str]
    out_edges: dict[str, tuple[str, ...]]
    in_edges: dict[str, tuple[str, ...]]
    phantoms: frozenset[str]

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.out_edges.values())

    def iter_edges(self):
        for citing in sorted(self.out_edges):
            for cited in self.out_edges[citing]:
                yield citing, cited

    def references_of(self, pub_id: str) -> tuple[str, ...]:
        """Ids this publication cites."""
        return self.out_edges.get(pub_id, ())

    def citers_of(self, pub_id: str) -> tuple[str, ...]:
        """Ids citing this publication."""
        return self.in_edges.get(pub_id, ())


def build_citation_graph(corpus: Corpus) -> CitationGraph:
    """One edge per (record, distinct reference); self-references dropped."""
    nodes: set[str] = set(corpus.records)
    phantoms: set[str] = set()
    out_edges: dict[str, tuple[str, ...]] = {}
    incoming: dict[str, list[str]] = {}
    for pub_id, rec in corpus.records.items():
        targets = sorted(set(rec.references) - {pub_id})
        if not targets:
            continue
        out_edges[pub_id] = tuple(targets)
        for cited in targets:
            if cited not in corpus.records:
                phantoms.add(cited)
                nodes.add(cited)
            incoming.setdefault(cited, []).append(pub_id)
    in_edges = {cited: tuple(sorted(citers)) for cited, citers in incoming.items()}
    return CitationGraph(
        nodes=nodes,
        out_edges=out_edges,
        in_edges=in_edges,
        phantoms=frozenset(phantoms),
    )


def filter_pubs(corpus: Corpus, year_range: tuple[int, int],
                org_types: set[str] | str = "any") -> set[str]:
    """Ids with year in the inclusive range and, unless "any", at least one
    affiliation of a listed org_type."""
    lo, hi = year_range
    if lo > hi:
        raise ValueError(f"year_range lower bound {lo} exceeds upper bound {hi}")
    if org_types != "any":
        unknown = set(org_types) - ORG_TYPES
        if unknown:
            raise ValueError(f"unknown org_types: {sorted(unknown)}")
    selected: set[str] = set()
    for pub_id, rec in corpus.records.items():
        if not lo <= rec.year <= hi:
            continue
        if org_types != "any" and not any(
            a.org_type in org_types for a in rec.affiliations
        ):
            continue
        selected.add(pub_id)
    return selected
