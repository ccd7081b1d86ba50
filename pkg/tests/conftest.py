"""Shared builders for the test suite."""

from __future__ import annotations

from pathlib import Path

from biblioscope.corpus import (Affiliation, Corpus, PublicationRecord,
                                continent_table)

DATA = Path(__file__).parent / "data"


def affil(org_id: str = "ORG-A", org_type: str = "HEI",
          country: str = "US", name: str = "") -> Affiliation:
    return Affiliation(
        org_id=org_id,
        org_name=name or org_id,
        org_type=org_type,
        country=country,
        continent=continent_table()[country],
    )


def record(pub_id: str, year: int = 2010, title: str = "", abstract: str = "",
           author_keywords=(), index_keywords=(), references=(),
           affiliations=()) -> PublicationRecord:
    return PublicationRecord(
        pub_id=pub_id,
        year=year,
        title=title,
        abstract=abstract,
        author_keywords=list(author_keywords),
        index_keywords=list(index_keywords),
        references=list(references),
        affiliations=list(affiliations),
    )


def corpus_of(*records: PublicationRecord) -> Corpus:
    return Corpus(records={r.pub_id: r for r in records})
