"""Topical delineation: query parsing, core selection, citation expansion.

The workflow is select-then-expand: records matching the phrase query form
the core set, one layer of direct citations (cited and citing) widens it,
and a year/org-type filter produces the final analysis set. Expansion is
traversed before filtering, so a 1999 publication cited by a 2005 core
record is collected and then dropped in finalize, not never seen.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Corpus, CitationGraph, PublicationRecord, filter_pubs, tokenize
from .errors import QueryParseError


@dataclass(frozen=True, slots=True)
class QueryToken:
    text: str
    prefix: bool  # trailing "*": match any word starting with text

    def __str__(self) -> str:
        return self.text + ("*" if self.prefix else "")


@dataclass(frozen=True, slots=True)
class PhrasePattern:
    tokens: tuple[QueryToken, ...]

    def __str__(self) -> str:
        return " ".join(str(t) for t in self.tokens)


@dataclass(frozen=True, slots=True)
class TopicQuery:
    clauses: tuple[PhrasePattern, ...]

    def __str__(self) -> str:
        return " OR ".join(f'TS="{c}"' for c in self.clauses)


def _parse_phrase(phrase: str, offset: int) -> PhrasePattern:
    tokens: list[QueryToken] = []
    pos = 0
    for raw in phrase.split():
        start = offset + phrase.index(raw, pos)
        pos = phrase.index(raw, pos) + len(raw)
        prefix = raw.endswith("*")
        stem = raw[:-1] if prefix else raw
        if "*" in stem:
            raise QueryParseError("wildcard only allowed at the end of a word",
                                  start + stem.index("*"))
        # One raw word can normalize to several (hyphenated forms); a
        # trailing wildcard then binds to the last of them.
        words = tokenize(stem)
        if not words:
            raise QueryParseError(f"word {raw!r} is empty after normalization", start)
        for word in words[:-1]:
            tokens.append(QueryToken(word, False))
        tokens.append(QueryToken(words[-1], prefix))
    if not tokens:
        raise QueryParseError("empty phrase", offset)
    return PhrasePattern(tuple(tokens))


def parse_query(text: str) -> TopicQuery:
    """Parse 'TS="..." OR TS="..."' into a TopicQuery.

    The phrase inside each quote pair is whitespace-split; words may carry
    a trailing "*" wildcard. Raises QueryParseError with a character
    position for unbalanced quotes, empty phrases, or interior wildcards.
    """
    n = len(text)
    i = 0
    clauses: list[PhrasePattern] = []
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            raise QueryParseError("expected a TS=\"...\" clause", i)
        if text[i:i + 3].upper() != 'TS=':
            raise QueryParseError('expected TS="..."', i)
        i += 3
        if i >= n or text[i] != '"':
            raise QueryParseError("expected opening quote", i)
        closing = text.find('"', i + 1)
        if closing == -1:
            raise QueryParseError("unbalanced quote", i)
        clauses.append(_parse_phrase(text[i + 1:closing], i + 1))
        i = closing + 1
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        if text[i:i + 2].upper() != "OR" or (i + 2 < n and not text[i + 2].isspace()):
            raise QueryParseError("expected OR between clauses", i)
        i += 2
    return TopicQuery(tuple(clauses))


def _word_matches(qt: QueryToken, word: str) -> bool:
    return word.startswith(qt.text) if qt.prefix else word == qt.text


def _phrase_in(pattern: PhrasePattern, words: list[str]) -> bool:
    """Contiguous phrase match anywhere in the word sequence."""
    m = len(pattern.tokens)
    if m > len(words):
        return False
    for start in range(len(words) - m + 1):
        if all(_word_matches(qt, words[start + k])
               for k, qt in enumerate(pattern.tokens)):
            return True
    return False


def _phrase_is(pattern: PhrasePattern, words: list[str]) -> bool:
    """Whole-keyword match: the pattern must cover every word."""
    return len(pattern.tokens) == len(words) and all(
        _word_matches(qt, w) for qt, w in zip(pattern.tokens, words)
    )


def match_record(query: TopicQuery, record: PublicationRecord) -> bool:
    """True iff some clause occurs in the title or abstract, or matches a
    whole keyword."""
    title = tokenize(record.title)
    abstract = tokenize(record.abstract)
    keywords = [kw.split() for kw in record.keywords()]
    for clause in query.clauses:
        if _phrase_in(clause, title) or _phrase_in(clause, abstract):
            return True
        if any(_phrase_is(clause, kw) for kw in keywords):
            return True
    return False


def select_core(corpus: Corpus, query: TopicQuery, year_range: tuple[int, int],
                threads: int = 1) -> set[str]:
    """All records within year_range that the query matches.

    Matching is pure, so the record list can fan out over threads; the
    result is a set union and identical for any worker count.
    """
    lo, hi = year_range
    candidates = [rec for rec in corpus.records.values() if lo <= rec.year <= hi]
    if threads > 1 and len(candidates) > 1:
        chunks = [candidates[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matched = pool.map(
                lambda chunk: {r.pub_id for r in chunk if match_record(query, r)},
                chunks,
            )
            return set().union(*matched)
    return {rec.pub_id for rec in candidates if match_record(query, rec)}


@dataclass(slots=True)
class DatasetLabels:
    """Membership flags produced by delineation.

    final is empty until finalize() runs. cited/citing record how each
    non-core member entered the expansion; phantoms are referenced ids
    that never resolved to a corpus record.
    """

    core: frozenset[str]
    cited: frozenset[str]
    citing: frozenset[str]
    expanded: frozenset[str]
    phantoms: frozenset[str]
    final: frozenset[str] = frozenset()

    def provenance(self, pub_id: str) -> str:
        if pub_id in self.core:
            return "core"
        in_cited = pub_id in self.cited
        in_citing = pub_id in self.citing
        if in_cited and in_citing:
            return "both"
        if in_cited:
            return "cited_only"
        if in_citing:
            return "citing_only"
        raise KeyError(pub_id)

    def provenance_rows(self) -> list[tuple[str, str]]:
        return [(pub_id, self.provenance(pub_id)) for pub_id in sorted(self.expanded)]

    def report(self) -> dict[str, int]:
        """The delineation cardinalities, mirroring the workflow diagram."""
        return {
            "core": len(self.core),
            "cited": len(self.cited),
            "citing": len(self.citing),
            "expanded": len(self.expanded),
            "final": len(self.final),
            "phantoms": len(self.phantoms),
        }


def expand_direct_citations(core: set[str], graph: CitationGraph,
                            layers: int = 1) -> DatasetLabels:
    """Widen the core by direct citations, ``layers`` times.

    cited/citing sets exclude core members and phantoms; phantom ids
    encountered during traversal are tallied separately because they carry
    no metadata and can never join the analysis set.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    core_set = frozenset(core)
    cited: set[str] = set()
    citing: set[str] = set()
    phantoms: set[str] = set()
    frontier: set[str] = set(core_set)
    expanded: set[str] = set(core_set)
    for _ in range(layers):
        new: set[str] = set()
        for pub_id in frontier:
            for target in graph.references_of(pub_id):
                if target in graph.phantoms:
                    phantoms.add(target)
                elif target not in core_set:
                    cited.add(target)
                    new.add(target)
            for source in graph.citers_of(pub_id):
                if source not in core_set:
                    citing.add(source)
                    new.add(source)
        new -= expanded
        expanded |= new
        frontier = new
    return DatasetLabels(
        core=core_set,
        cited=frozenset(cited),
        citing=frozenset(citing),
        expanded=frozenset(expanded),
        phantoms=frozenset(phantoms),
    )


def finalize(labels: DatasetLabels, corpus: Corpus, year_range: tuple[int, int],
             org_types: set[str] | str = "any") -> DatasetLabels:
    """Fill labels.final = expanded members passing the year/org filter."""
    keep = filter_pubs(corpus, year_range, org_types)
    return DatasetLabels(
        core=labels.core,
        cited=labels.cited,
        citing=labels.citing,
        expanded=labels.expanded,
        phantoms=labels.phantoms,
        final=frozenset(labels.expanded & keep),
    )
