"""Burst detection on yearly keyword streams (two-state batched automaton).

A term's years are modelled as binomial draws: the low state emits at the
stream's base rate p0 = sum(r)/sum(d), the high state at p1 = min(s*p0, 1).
Each year costs the negative log binomial likelihood of its (r_t, d_t)
under the state's rate, switching low->high costs gamma*ln(T), and the
cheapest state sequence is found by dynamic programming over suffixes.
Candidate values are always formed as (transition + year cost) + suffix
cost; float addition is monotone, so the DP minimum is bit-equal to a
brute-force fold over all 2^T sequences using the same grouping.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Corpus
from .cooccur import extract_terms

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class TermYearStream:
    term: str
    years: tuple[int, ...]
    r: tuple[int, ...]  # publications containing the term, per year
    d: tuple[int, ...]  # publications in the set, per year

    def __post_init__(self):
        if not (len(self.years) == len(self.r) == len(self.d)):
            raise ValueError("years, r, d must have equal lengths")
        if any(not 0 <= rt <= dt for rt, dt in zip(self.r, self.d)):
            raise ValueError("every year needs 0 <= r_t <= d_t")
        if any(b - a != 1 for a, b in zip(self.years, self.years[1:])):
            raise ValueError("years must be contiguous")


@dataclass(frozen=True, slots=True)
class BurstInterval:
    term: str
    begin: int
    end: int  # inclusive
    strength: float


def term_year_stream(pub_set: set[str], corpus: Corpus, term: str,
                     year_range: tuple[int, int]) -> TermYearStream:
    """Yearly (r_t, d_t) for one already-normalized term."""
    lo, hi = year_range
    years = tuple(range(lo, hi + 1))
    d = Counter()
    r = Counter()
    for pub_id in pub_set:
        rec = corpus.records[pub_id]
        if not lo <= rec.year <= hi:
            continue
        d[rec.year] += 1
        if term in extract_terms(rec):
            r[rec.year] += 1
    return TermYearStream(term, years,
                          tuple(r[y] for y in years),
                          tuple(d[y] for y in years))


def build_streams(pub_set: set[str], corpus: Corpus, year_range: tuple[int, int],
                  min_occurrence: int = 1) -> list[TermYearStream]:
    """Streams for every term occurring in >= min_occurrence publications,
    one corpus pass for all of them."""
    lo, hi = year_range
    years = tuple(range(lo, hi + 1))
    d: Counter[int] = Counter()
    per_term: dict[str, Counter[int]] = {}
    occurrence: Counter[str] = Counter()
    for pub_id in pub_set:
        rec = corpus.records[pub_id]
        if not lo <= rec.year <= hi:
            continue
        d[rec.year] += 1
        for term in extract_terms(rec):
            occurrence[term] += 1
            per_term.setdefault(term, Counter())[rec.year] += 1
    d_tuple = tuple(d[y] for y in years)
    return [
        TermYearStream(term, years,
                       tuple(per_term[term][y] for y in years), d_tuple)
        for term in sorted(occurrence)
        if occurrence[term] >= min_occurrence
    ]


def _ln_choose(d: int, r: int) -> float:
    return math.lgamma(d + 1) - math.lgamma(r + 1) - math.lgamma(d - r + 1)


def year_costs(stream: TermYearStream, p0: float, p1: float
               ) -> tuple[list[float], list[float]]:
    """Per-year negative log likelihood under each state's rate.

    Years with d_t = 0 cost nothing in either state. A rate of exactly 1
    makes any miss impossible, hence an infinite cost there.
    """

    def nll(r: int, d: int, p: float) -> float:
        if d == 0:
            return 0.0
        ll = _ln_choose(d, r)
        if r > 0:
            ll += r * math.log(p)
        if d > r:
            if p >= 1.0:
                return math.inf
            ll += (d - r) * math.log(1.0 - p)
        return -ll

    low = [nll(r, d, p0) for r, d in zip(stream.r, stream.d)]
    high = [nll(r, d, p1) for r, d in zip(stream.r, stream.d)]
    return low, high


def detect_bursts(stream: TermYearStream, s: float = 2.0,
                  gamma: float = 1.0) -> list[BurstInterval]:
    """Maximal high-state runs of the optimal state sequence.

    Ties go to the low state, so an interval only exists where the high
    state is strictly cheaper overall. Strength is the interval's summed
    per-year cost advantage cost_low(t) - cost_high(t).
    """
    if s <= 1.0:
        raise ValueError("s must be > 1")
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    total_d = sum(stream.d)
    if total_d == 0:
        raise ValueError("stream has no publications at all")
    p0 = sum(stream.r) / total_d
    if p0 == 0.0:
        return []
    p1 = min(s * p0, 1.0)
    if p1 <= p0:
        logger.warning("term %r: burst rate clamped to base rate (p0=%g); "
                       "no bursts detectable", stream.term, p0)
        return []

    T = len(stream.years)
    trans = gamma * math.log(T)
    cost_low, cost_high = year_costs(stream, p0, p1)

    # suffix DP; choice[t][prev_state] = cheapest state at year t
    v_low, v_high = 0.0, 0.0
    choice = [[0, 0] for _ in range(T)]
    for t in reversed(range(T)):
        new_v = [0.0, 0.0]
        for prev in (0, 1):
            stay_low = (0.0 + cost_low[t]) + v_low
            enter = trans if prev == 0 else 0.0
            go_high = (enter + cost_high[t]) + v_high
            if stay_low <= go_high:
                new_v[prev] = stay_low
                choice[t][prev] = 0
            else:
                new_v[prev] = go_high
                choice[t][prev] = 1
        v_low, v_high = new_v

    states = []
    prev = 0  # the automaton starts low
    for t in range(T):
        prev = choice[t][prev]
        states.append(prev)

    intervals: list[BurstInterval] = []
    t = 0
    while t < T:
        if states[t] == 1:
            begin = t
            while t + 1 < T and states[t + 1] == 1:
                t += 1
            strength = 0.0
            for u in range(begin, t + 1):
                strength += cost_low[u] - cost_high[u]
            intervals.append(BurstInterval(stream.term, stream.years[begin],
                                           stream.years[t], strength))
        t += 1
    return intervals


def optimal_cost(stream: TermYearStream, s: float = 2.0,
                 gamma: float = 1.0) -> float:
    """Cost of the optimal state sequence (0.0 for burst-free streams)."""
    total_d = sum(stream.d)
    if total_d == 0:
        raise ValueError("stream has no publications at all")
    p0 = sum(stream.r) / total_d
    p1 = min(s * p0, 1.0) if p0 else 0.0
    T = len(stream.years)
    if p0 == 0.0 or p1 <= p0:
        cost_low, _ = year_costs(stream, max(p0, 1e-300), 1.0)
        acc = 0.0
        for t in reversed(range(T)):
            acc = (0.0 + cost_low[t]) + acc
        return acc
    trans = gamma * math.log(T)
    cost_low, cost_high = year_costs(stream, p0, p1)
    v_low, v_high = 0.0, 0.0
    for t in reversed(range(T)):
        stay_from_low = min((0.0 + cost_low[t]) + v_low,
                            (trans + cost_high[t]) + v_high)
        stay_from_high = min((0.0 + cost_low[t]) + v_low,
                             (0.0 + cost_high[t]) + v_high)
        v_low, v_high = stay_from_low, stay_from_high
    return v_low


def top_bursts(pub_set: set[str], corpus: Corpus, k: int,
               year_range: tuple[int, int], s: float = 2.0, gamma: float = 1.0,
               min_occurrence: int = 1, threads: int = 1) -> list[BurstInterval]:
    """Strongest k burst intervals across all qualifying terms.

    Ranked by strength descending, then earlier begin, then term. Per-term
    detection is independent, so it fans out over threads; the ordered
    merge keeps the result identical for any worker count.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    streams = build_streams(pub_set, corpus, year_range, min_occurrence)

    def detect(stream: TermYearStream) -> list[BurstInterval]:
        return detect_bursts(stream, s=s, gamma=gamma)

    if threads > 1 and len(streams) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_stream = list(pool.map(detect, streams))
    else:
        per_stream = [detect(stream) for stream in streams]
    intervals = [interval for batch in per_stream for interval in batch]
    intervals.sort(key=lambda b: (-b.strength, b.begin, b.term))
    return intervals[:k]
