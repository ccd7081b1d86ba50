"""Production and specialization statistics over a delineated set.

Counts are integer tallies first and divided only at the end, so every
aggregate is independent of iteration or worker order. The Activity Index
is kept as a pure ratio internally (parity = 1); reports multiply by a
display factor because the conventional presentation scales parity to 100.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .errors import InputError

logger = logging.getLogger(__name__)

ACTOR_KINDS = ("institution", "country", "continent")


def yearly_counts(pub_set: set[str], corpus: Corpus,
                  year_range: tuple[int, int] | None = None) -> dict[int, int]:
    """Publications per year; years inside year_range with no hits are 0."""
    counts: dict[int, int] = {}
    if year_range is not None:
        lo, hi = year_range
        counts = {year: 0 for year in range(lo, hi + 1)}
    for pub_id in pub_set:
        year = corpus.records[pub_id].year
        counts[year] = counts.get(year, 0) + 1
    return counts


def growth_and_cagr(series: dict[int, int], start_year: int,
                    end_year: int) -> tuple[float, float]:
    """Overall growth percent and compound annual growth rate percent.

    Growth is 100*(c_end - c_start)/c_start; CAGR is
    100*((c_end/c_start)^(1/intervals) - 1) with intervals = end - start.
    """
    if end_year <= start_year:
        raise ValueError("end_year must be after start_year")
    c_start = series.get(start_year, 0)
    c_end = series.get(end_year, 0)
    if c_start <= 0:
        raise ValueError(f"growth undefined: no publications in {start_year}")
    growth = 100.0 * (c_end - c_start) / c_start
    cagr = 100.0 * ((c_end / c_start) ** (1.0 / (end_year - start_year)) - 1.0)
    return growth, cagr


@dataclass(frozen=True, slots=True)
class ActivityIndexInput:
    """The four tallies behind the specialization ratio.

    actor_topic_count / topic_total is the actor's share of the topical
    set; actor_all_count / all_total its share of the whole database.
    """

    actor_topic_count: int
    topic_total: int
    actor_all_count: int
    all_total: int

    def __post_init__(self):
        if min(self.topic_total, self.actor_all_count, self.all_total) <= 0:
            raise ValueError("activity index denominators must be positive")
        if self.actor_topic_count < 0:
            raise ValueError("actor_topic_count must be nonnegative")
        if self.actor_topic_count > self.actor_all_count:
            raise ValueError("actor's topical output exceeds its total output")
        if self.actor_topic_count > self.topic_total:
            raise ValueError("actor's topical output exceeds the topic total")
        if self.actor_all_count > self.all_total:
            raise ValueError("actor's total output exceeds the database total")


def activity_index(inp: ActivityIndexInput) -> float:
    """(topic share) / (database share); 1.0 means parity.

    Plain double division keeps parity inputs at exactly 1.0: equal real
    shares round to the same double, and x/x is exact.
    """
    topic_share = inp.actor_topic_count / inp.topic_total
    all_share = inp.actor_all_count / inp.all_total
    return topic_share / all_share


@dataclass(slots=True)
class ActorRow:
    actor_id: str
    actor_kind: str
    period: str
    topic_count: int
    topic_share_pct: float
    activity_index: float | None


def _actors_of(record, actor_kind: str) -> set[str]:
    if actor_kind == "institution":
        return {a.org_id for a in record.affiliations}
    if actor_kind == "country":
        return {a.country for a in record.affiliations}
    if actor_kind == "continent":
        return {a.continent for a in record.affiliations}
    raise ValueError(f"unknown actor_kind {actor_kind!r}")


def actor_table(pub_set: set[str], corpus: Corpus, actor_kind: str, period: str,
                external_totals: dict[str, int], all_total: int | None,
                counting: str = "full") -> list[ActorRow]:
    """Full-counting actor tallies for one period set.

    Each publication credits every distinct actor among its affiliations
    once. Rows are sorted by topic_count descending, then actor_id. An
    actor absent from external_totals (or a missing all_total) gets
    activity_index None. The returned list is the raw dump; apply
    ranked_rows for thresholds.
    """
    if counting != "full":
        raise ValueError("only full counting is implemented")
    tallies: dict[str, int] = {}
    for pub_id in pub_set:
        for actor in _actors_of(corpus.records[pub_id], actor_kind):
            tallies[actor] = tallies.get(actor, 0) + 1
    topic_total = len(pub_set)
    rows = []
    for actor in sorted(tallies, key=lambda a: (-tallies[a], a)):
        count = tallies[actor]
        share = 100.0 * count / topic_total if topic_total else 0.0
        ai = None
        if actor in external_totals and all_total:
            ai = activity_index(ActivityIndexInput(
                actor_topic_count=count,
                topic_total=topic_total,
                actor_all_count=external_totals[actor],
                all_total=all_total,
            ))
        else:
            logger.debug("no external total for %s %r; AI unavailable",
                         actor_kind, actor)
        rows.append(ActorRow(actor, actor_kind, period, count, share, ai))
    return rows


def ranked_rows(rows: list[ActorRow], min_count: int) -> list[ActorRow]:
    """The ranked view: rows with topic_count >= min_count."""
    return [row for row in rows if row.topic_count >= min_count]


def period_blocks(pub_set: set[str], corpus: Corpus, block_len: int = 6,
                  start_year: int = 2000) -> dict[tuple[int, int], set[str]]:
    """Partition the set into consecutive year blocks of block_len.

    Blocks are aligned to start_year; keys are inclusive (lo, hi) pairs.
    Every publication lands in exactly one block, years before start_year
    included (they fall into earlier-aligned blocks).
    """
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    blocks: dict[tuple[int, int], set[str]] = {}
    for pub_id in pub_set:
        year = corpus.records[pub_id].year
        index = (year - start_year) // block_len
        lo = start_year + index * block_len
        blocks.setdefault((lo, lo + block_len - 1), set()).add(pub_id)
    return dict(sorted(blocks.items()))


def period_label(block: tuple[int, int]) -> str:
    return f"{block[0]}-{block[1]}"


def load_external_totals(path: str | Path) -> tuple[dict[tuple[str, str], int], int]:
    """Read the whole-database output counts needed for AI denominators.

    Format: optional comment lines, one of which must be
    "# all_total = N", then a CSV header actor_kind,actor_id,all_count.
    Returns ({(actor_kind, actor_id): all_count}, all_total).
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"external totals file not found: {path}")
    all_total: int | None = None
    data_lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if body.startswith("all_total"):
                    _, _, value = body.partition("=")
                    try:
                        all_total = int(value.strip())
                    except ValueError:
                        raise InputError(f"bad all_total line in {path}: {stripped!r}")
                continue
            if stripped:
                data_lines.append(line)
    if all_total is None or all_total <= 0:
        raise InputError(f"{path}: missing or nonpositive '# all_total = N' line")
    reader = csv.DictReader(data_lines)
    if reader.fieldnames != ["actor_kind", "actor_id", "all_count"]:
        raise InputError(f"{path}: expected header actor_kind,actor_id,all_count")
    totals: dict[tuple[str, str], int] = {}
    for row_no, row in enumerate(reader, start=2):
        kind = row["actor_kind"]
        if kind not in ACTOR_KINDS:
            raise InputError(f"{path} row {row_no}: unknown actor_kind {kind!r}")
        try:
            count = int(row["all_count"])
        except (TypeError, ValueError):
            raise InputError(f"{path} row {row_no}: bad all_count")
        if count <= 0:
            raise InputError(f"{path} row {row_no}: all_count must be positive")
        key = (kind, row["actor_id"])
        if key in totals:
            raise InputError(f"{path} row {row_no}: duplicate actor {key}")
        totals[key] = count
    return totals, all_total


def totals_for_kind(totals: dict[tuple[str, str], int],
                    actor_kind: str) -> dict[str, int]:
    return {actor: n for (kind, actor), n in totals.items() if kind == actor_kind}
