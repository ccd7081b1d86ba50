"""SDG-level interconnection matrices and their clustering.

Two linkage modes over the 17 goals: cocitation (a publication cites two
set members whose SDGs differ) and coclassification (one publication
carries two SDGs). Matrices are symmetric with a zero diagonal; cell
values are integer counts. Clustering reuses the co-occurrence module's
optimizer on the 17-node weighted graph.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from .cooccur import ClusterAssignment, cluster_graph
from .corpus import CitationGraph, Corpus
from .sdg import SDG_IDS, SdgAssignment

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class SdgMatrix:
    mode: str  # "cocitation" or "coclassification"
    cells: list[list[int]]  # 17x17, index = sdg - 1
    node_sizes: dict[int, int]
    node_avg_year: dict[int, float | None]

    def cell(self, s: int, t: int) -> int:
        return self.cells[s - 1][t - 1]

    def total(self) -> int:
        return sum(sum(row) for row in self.cells) // 2


def _empty_cells() -> list[list[int]]:
    return [[0] * 17 for _ in range(17)]


def _node_sizes(assignments: dict[str, SdgAssignment]) -> dict[int, int]:
    sizes = {s: 0 for s in SDG_IDS}
    for assignment in assignments.values():
        for s in assignment.sdgs:
            sizes[s] += 1
    return sizes


def sdg_avg_year(assignments: dict[str, SdgAssignment],
                 corpus: Corpus) -> dict[int, float | None]:
    """Mean publication year per SDG; None where the SDG is empty."""
    year_sum = {s: 0 for s in SDG_IDS}
    count = {s: 0 for s in SDG_IDS}
    for pub_id, assignment in assignments.items():
        year = corpus.records[pub_id].year
        for s in assignment.sdgs:
            year_sum[s] += year
            count[s] += 1
    return {
        s: (year_sum[s] / count[s]) if count[s] else None for s in SDG_IDS
    }


def sdg_cocitation_matrix(assignments: dict[str, SdgAssignment],
                          graph: CitationGraph, pub_set: set[str],
                          corpus: Corpus) -> SdgMatrix:
    """Count citers whose reference pairs bridge two SDGs.

    For each citing publication in the set and each unordered pair (x, y)
    of its distinct in-set references, every distinct unordered SDG cell
    {s, t} with s in sdgs(x), t in sdgs(y), s != t gains one count. A cell
    gains at most one count per (citer, x, y) triple no matter how many
    (s, t) combinations of the two label sets land on it.
    """
    cells = _empty_cells()
    for citer in sorted(pub_set):
        refs = [x for x in graph.references_of(citer) if x in pub_set]
        for x, y in itertools.combinations(refs, 2):
            sdgs_x = assignments[x].sdgs
            sdgs_y = assignments[y].sdgs
            hit: set[tuple[int, int]] = set()
            for s in sdgs_x:
                for t in sdgs_y:
                    if s != t:
                        hit.add((s, t) if s < t else (t, s))
            for s, t in hit:
                cells[s - 1][t - 1] += 1
                cells[t - 1][s - 1] += 1
    return SdgMatrix(
        mode="cocitation",
        cells=cells,
        node_sizes=_node_sizes(assignments),
        node_avg_year=sdg_avg_year(assignments, corpus),
    )


def sdg_coclassification_matrix(assignments: dict[str, SdgAssignment],
                                corpus: Corpus) -> SdgMatrix:
    """cell(s, t) = publications carrying both SDGs."""
    cells = _empty_cells()
    for assignment in assignments.values():
        for s, t in itertools.combinations(sorted(assignment.sdgs), 2):
            cells[s - 1][t - 1] += 1
            cells[t - 1][s - 1] += 1
    return SdgMatrix(
        mode="coclassification",
        cells=cells,
        node_sizes=_node_sizes(assignments),
        node_avg_year=sdg_avg_year(assignments, corpus),
    )


def cluster_sdgs(matrix: SdgMatrix, resolution: float = 1.0, seed: int = 1,
                 restarts: int = 10) -> ClusterAssignment:
    """Partition the 17 goals by modularity over the matrix weights.

    SDGs with no links end up as singletons; a zero matrix therefore
    yields 17 clusters.
    """
    weights = {
        (s, t): float(matrix.cell(s, t))
        for s, t in itertools.combinations(SDG_IDS, 2)
        if matrix.cell(s, t) > 0
    }
    return cluster_graph(list(SDG_IDS), weights, resolution=resolution,
                         min_cluster_size=1, seed=seed, restarts=restarts)
