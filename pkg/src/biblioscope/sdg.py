"""Glossary-driven SDG classification and the derived tables.

Matching is exact whole-term equality after normalization: a glossary
entry "poverty" hits the keyword "poverty" but not "poverty alleviation".
Publications may collect several SDGs (set semantics) or none. Every
percentage in the outputs names its denominator, because "share of all
publications" and "share of classified publications" differ and both are
legitimate readings.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import CONTINENTS, Corpus, PublicationRecord, normalize_term, tokenize
from .errors import GlossaryError

logger = logging.getLogger(__name__)

SDG_IDS = tuple(range(1, 18))
_INSTITUTION_TYPES = frozenset({"HEI", "RC"})


@dataclass(slots=True)
class SdgGlossary:
    entries: dict[str, frozenset[int]]

    @property
    def term_count(self) -> int:
        return len(self.entries)

    def lookup(self, term: str) -> frozenset[int]:
        return self.entries.get(term, frozenset())


def load_glossary(path: str | Path) -> SdgGlossary:
    """Read the (term, sdg_id) CSV; duplicates collapse, bad ids are fatal."""
    path = Path(path)
    if not path.is_file():
        raise GlossaryError(f"glossary file not found: {path}")
    collected: dict[str, set[int]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["term", "sdg_id"]:
            raise GlossaryError(f"{path}: expected header term,sdg_id")
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise GlossaryError(f"{path} row {row_no}: need term and sdg_id")
            term = normalize_term(row[0])
            if not term:
                raise GlossaryError(f"{path} row {row_no}: term is empty after "
                                    "normalization")
            try:
                sdg = int(row[1])
            except ValueError:
                raise GlossaryError(f"{path} row {row_no}: sdg_id {row[1]!r} is "
                                    "not an integer")
            if not 1 <= sdg <= 17:
                raise GlossaryError(f"{path} row {row_no}: sdg_id {sdg} outside 1..17")
            collected.setdefault(term, set()).add(sdg)
    if not collected:
        raise GlossaryError(f"{path}: glossary has no entries")
    return SdgGlossary({t: frozenset(s) for t, s in collected.items()})


@dataclass(frozen=True, slots=True)
class SdgAssignment:
    pub_id: str
    sdgs: frozenset[int]


def classify(record: PublicationRecord, glossary: SdgGlossary,
             scan_text: bool = False) -> SdgAssignment:
    """Union of glossary hits over the record's keywords.

    With scan_text, glossary terms are additionally matched as contiguous
    word phrases inside the normalized title and abstract. Off by default;
    it is far more permissive than keyword matching.
    """
    sdgs: set[int] = set()
    for term in record.keywords():
        sdgs |= glossary.lookup(term)
    if scan_text:
        words = tokenize(record.title) + ["\x00"] + tokenize(record.abstract)
        text = " ".join(words)
        for term, ids in glossary.entries.items():
            if not ids <= sdgs and f" {term} " in f" {text} ":
                sdgs |= ids
    return SdgAssignment(record.pub_id, frozenset(sdgs))


def classify_set(pub_set: set[str], corpus: Corpus, glossary: SdgGlossary,
                 scan_text: bool = False,
                 threads: int = 1) -> dict[str, SdgAssignment]:
    """Classify every publication in the set, keyed and ordered by pub_id."""
    ordered = sorted(pub_set)
    if threads > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(
                lambda pid: classify(corpus.records[pid], glossary, scan_text),
                ordered,
            )
            return dict(zip(ordered, results))
    return {
        pub_id: classify(corpus.records[pub_id], glossary, scan_text)
        for pub_id in ordered
    }


@dataclass(slots=True)
class PrevalenceReport:
    total: int
    classified: int
    counts: dict[int, int]  # every SDG id present, zeros included
    denominator: str  # "all" or "classified"
    denominator_count: int
    pcts: dict[int, float | None]
    classified_pct_of_all: float | None


def prevalence(assignments: dict[str, SdgAssignment],
               denominator: str = "classified") -> PrevalenceReport:
    """Per-SDG counts and shares under the chosen denominator."""
    if denominator not in ("all", "classified"):
        raise ValueError(f"unknown denominator {denominator!r}")
    counts = {s: 0 for s in SDG_IDS}
    classified = 0
    for assignment in assignments.values():
        if assignment.sdgs:
            classified += 1
        for s in assignment.sdgs:
            counts[s] += 1
    total = len(assignments)
    denom = total if denominator == "all" else classified
    pcts = {
        s: (100.0 * counts[s] / denom) if denom else None for s in SDG_IDS
    }
    return PrevalenceReport(
        total=total,
        classified=classified,
        counts=counts,
        denominator=denominator,
        denominator_count=denom,
        pcts=pcts,
        classified_pct_of_all=(100.0 * classified / total) if total else None,
    )


@dataclass(slots=True)
class ContinentTables:
    counts: dict[int, dict[str, int]]  # sdg -> continent -> publications
    contribution: dict[int, dict[str, float] | None]  # rows scaled to 100
    profile: dict[int, dict[str, float] | None]  # columns scaled to 100
    excluded_no_affiliation: int


def continent_tables(assignments: dict[str, SdgAssignment],
                     corpus: Corpus) -> ContinentTables:
    """First-author-continent crosstab, row- and column-normalized.

    Publications without affiliations are excluded here (their continent
    is unknowable) and reported in excluded_no_affiliation. Empty rows and
    empty columns normalize to None rather than fake zeros.
    """
    counts = {s: {c: 0 for c in CONTINENTS} for s in SDG_IDS}
    excluded = 0
    for pub_id, assignment in assignments.items():
        if not assignment.sdgs:
            continue
        continent = corpus.records[pub_id].first_author_continent()
        if continent is None:
            excluded += 1
            continue
        for s in assignment.sdgs:
            counts[s][continent] += 1
    contribution: dict[int, dict[str, float] | None] = {}
    for s in SDG_IDS:
        row_total = sum(counts[s].values())
        contribution[s] = (
            {c: 100.0 * counts[s][c] / row_total for c in CONTINENTS}
            if row_total else None
        )
    col_totals = {c: sum(counts[s][c] for s in SDG_IDS) for c in CONTINENTS}
    profile: dict[int, dict[str, float] | None] = {
        s: {
            c: (100.0 * counts[s][c] / col_totals[c]) if col_totals[c] else None
            for c in CONTINENTS
        }
        for s in SDG_IDS
    }
    return ContinentTables(counts, contribution, profile, excluded)


@dataclass(slots=True)
class SdgInstitutionRow:
    sdg: int
    institution_count: int
    pct: float | None


def institutions_per_sdg(assignments: dict[str, SdgAssignment],
                         corpus: Corpus) -> tuple[list[SdgInstitutionRow], int]:
    """Distinct HEI/RC organizations touching each SDG, plus the overall
    distinct-institution total used as the percentage base."""
    all_orgs: set[str] = set()
    per_sdg: dict[int, set[str]] = {s: set() for s in SDG_IDS}
    for pub_id, assignment in assignments.items():
        orgs = {
            a.org_id for a in corpus.records[pub_id].affiliations
            if a.org_type in _INSTITUTION_TYPES
        }
        all_orgs |= orgs
        for s in assignment.sdgs:
            per_sdg[s] |= orgs
    total = len(all_orgs)
    rows = [
        SdgInstitutionRow(
            sdg=s,
            institution_count=len(per_sdg[s]),
            pct=(100.0 * len(per_sdg[s]) / total) if total else None,
        )
        for s in SDG_IDS
    ]
    return rows, total
