"""Keyword co-occurrence networks: build, normalize, cluster, summarize.

Clustering is a seeded multilevel optimizer for weighted modularity with a
resolution parameter: local moving passes until quiescent, then the
partition is aggregated into supernodes and moving repeats on the smaller
graph. Aggregation matters: single-node moves alone cannot merge two
tightly knit groups even when the merged cluster is globally better, and
the resolution behaviour this module promises depends on finding those
merges. Several restarts run and the best objective wins, so results are
reproducible for a fixed (seed, restarts) pair.
"""

from __future__ import annotations

import itertools
import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Corpus, PublicationRecord

logger = logging.getLogger(__name__)


def extract_terms(record: PublicationRecord) -> set[str]:
    """Normalized, deduplicated union of the record's keyword lists."""
    return set(record.keywords())


@dataclass(slots=True)
class CooccurrenceNetwork:
    terms: list[str]  # sorted
    occurrence: dict[str, int]
    edges: dict[tuple[str, str], int]  # key (a, b) with a < b; value c_ij
    strengths: dict[tuple[str, str], float]
    total_pubs: int

    @property
    def total_links(self) -> int:
        return len(self.edges)

    @property
    def total_link_strength(self) -> int:
        return sum(self.edges.values())


def build_network(pub_set: set[str], corpus: Corpus,
                  min_occurrence: int = 1) -> CooccurrenceNetwork:
    """Co-occurrence counts over the set, thresholded by term occurrence.

    occurrence counts publications containing the term; c_ij counts
    publications containing both terms. Terms below min_occurrence are
    dropped before edges are counted.
    """
    if min_occurrence < 1:
        raise ValueError("min_occurrence must be >= 1")
    occurrence: Counter[str] = Counter()
    for pub_id in pub_set:
        occurrence.update(extract_terms(corpus.records[pub_id]))
    kept = {t for t, n in occurrence.items() if n >= min_occurrence}
    edges: Counter[tuple[str, str]] = Counter()
    for pub_id in pub_set:
        terms = sorted(extract_terms(corpus.records[pub_id]) & kept)
        edges.update(itertools.combinations(terms, 2))
    return CooccurrenceNetwork(
        terms=sorted(kept),
        occurrence={t: occurrence[t] for t in sorted(kept)},
        edges={pair: edges[pair] for pair in sorted(edges)},
        strengths={},
        total_pubs=len(pub_set),
    )


def association_strength(network: CooccurrenceNetwork) -> CooccurrenceNetwork:
    """Fill a_ij = 2*T*c_ij / (occ_i * occ_j), T = publications in the set."""
    T = network.total_pubs
    network.strengths = {
        (a, b): (2.0 * T * c) / (network.occurrence[a] * network.occurrence[b])
        for (a, b), c in network.edges.items()
    }
    return network


@dataclass(slots=True)
class ClusterAssignment:
    membership: dict  # node -> cluster id, 1-based, 1 = largest cluster
    modularity: float
    n_clusters: int


def modularity(weights: dict[tuple, float], membership: dict,
               resolution: float = 1.0) -> float:
    """Q = sum over clusters of [W_in/m - resolution*(K_c/2m)^2].

    weights holds each undirected edge once; nodes missing from any edge
    contribute nothing. Iteration is over sorted keys so equal partitions
    always produce bit-equal values.
    """
    m = 0.0
    w_in: dict = {}
    k_c: dict = {}
    for (u, v), w in sorted(weights.items()):
        m += w
        cu, cv = membership[u], membership[v]
        if cu == cv:
            w_in[cu] = w_in.get(cu, 0.0) + w
        k_c[cu] = k_c.get(cu, 0.0) + w
        k_c[cv] = k_c.get(cv, 0.0) + w
    if m == 0.0:
        return 0.0
    two_m = 2.0 * m
    q = 0.0
    for c in sorted(k_c):
        q += w_in.get(c, 0.0) / m - resolution * (k_c[c] / two_m) ** 2
    return q


def _local_move(adj: list[dict[int, float]], deg: list[float], m: float,
                resolution: float, rng: random.Random) -> list[int]:
    """One level of local moving; returns the community of each node.

    A node moves only on a strict objective gain; among equally best
    target communities the lowest id wins. Strictness is what guarantees
    termination, so a tie with the current community means staying put.
    """
    n = len(adj)
    comm = list(range(n))
    comm_deg = deg[:]
    order = list(range(n))
    two_m_m = 2.0 * m * m
    for _ in range(1000):  # safety cap; strict gains converge long before
        rng.shuffle(order)
        moves = 0
        for v in order:
            cv = comm[v]
            comm_deg[cv] -= deg[v]
            w_to: dict[int, float] = {}
            for u, w in adj[v].items():
                cu = comm[u]
                w_to[cu] = w_to.get(cu, 0.0) + w
            best_c = cv
            best_score = w_to.get(cv, 0.0) / m \
                - resolution * deg[v] * comm_deg[cv] / two_m_m
            for c in sorted(w_to):
                if c == cv:
                    continue
                score = w_to[c] / m - resolution * deg[v] * comm_deg[c] / two_m_m
                if score > best_score:
                    best_score = score
                    best_c = c
            comm_deg[best_c] += deg[v]
            if best_c != cv:
                comm[v] = best_c
                moves += 1
        if moves == 0:
            break
    return comm


def _compact(comm: list[int]) -> dict[int, int]:
    """Relabel community ids to 0..K-1 in order of first appearance."""
    mapping: dict[int, int] = {}
    for c in comm:
        if c not in mapping:
            mapping[c] = len(mapping)
    return mapping


def _one_run(n: int, adj: list[dict[int, float]], deg: list[float], m: float,
             resolution: float, rng: random.Random) -> list[int]:
    """Multilevel pass: local moving, aggregate, repeat until stable."""
    partition = list(range(n))
    cur_adj, cur_deg = adj, deg
    cur_loops = [0.0] * n
    while True:
        comm = _local_move(cur_adj, cur_deg, m, resolution, rng)
        mapping = _compact(comm)
        k = len(mapping)
        if k == len(cur_adj):
            break
        partition = [mapping[comm[partition[v]]] for v in range(n)]
        new_adj: list[dict[int, float]] = [dict() for _ in range(k)]
        new_loops = [0.0] * k
        for i in range(len(cur_adj)):
            ci = mapping[comm[i]]
            new_loops[ci] += cur_loops[i]
            for j, w in cur_adj[i].items():
                cj = mapping[comm[j]]
                if ci == cj:
                    if i < j:
                        new_loops[ci] += w
                else:
                    new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
        cur_adj = new_adj
        cur_loops = new_loops
        cur_deg = [sum(new_adj[i].values()) + 2.0 * new_loops[i] for i in range(k)]
    return partition


def _merge_small(partition: list[int], adj: list[dict[int, float]],
                 min_size: int) -> list[int]:
    """Fold clusters below min_size into the neighbor with the largest
    connecting weight; clusters with no outside edges stay as they are."""
    partition = partition[:]
    stuck: set[int] = set()
    while True:
        sizes = Counter(partition)
        if len(sizes) <= 1:
            break
        small = sorted(
            (c for c in sizes if sizes[c] < min_size and c not in stuck),
            key=lambda c: (sizes[c], c),
        )
        if not small:
            break
        c = small[0]
        members = [i for i, x in enumerate(partition) if x == c]
        conn: dict[int, float] = {}
        for i in members:
            for j, w in adj[i].items():
                cj = partition[j]
                if cj != c:
                    conn[cj] = conn.get(cj, 0.0) + w
        if not conn:
            stuck.add(c)
            continue
        target = sorted(conn, key=lambda t: (-conn[t], t))[0]
        for i in members:
            partition[i] = target
    return partition


def cluster_graph(nodes: list, weights: dict[tuple, float], resolution: float = 1.0,
                  min_cluster_size: int = 1, seed: int = 1,
                  restarts: int = 10, threads: int = 1) -> ClusterAssignment:
    """Cluster an arbitrary weighted undirected graph.

    nodes fixes the deterministic node order; weights maps node pairs to
    positive weights (each pair once, no self-pairs). Restarts draw
    independent visit orders from the seed; the best modularity wins, with
    exact ties going to the lexicographically smallest descending
    cluster-size vector. Greedy moving can in principle stall below the
    trivial one-cluster or all-singletons partitions, so both are checked
    and take over if they score higher.
    """
    nodes = list(nodes)
    if not nodes:
        raise ValueError("cannot cluster an empty graph")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    index = {node: i for i, node in enumerate(nodes)}
    n = len(nodes)
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    m = 0.0
    for (u, v) in sorted(weights):
        w = float(weights[(u, v)])
        if w <= 0:
            raise ValueError(f"edge weight for ({u!r}, {v!r}) must be positive")
        i, j = index[u], index[v]
        if i == j:
            raise ValueError(f"self-edge on node {u!r}")
        adj[i][j] = adj[i].get(j, 0.0) + w
        adj[j][i] = adj[j].get(i, 0.0) + w
        m += w
    deg = [sum(adj[i].values()) for i in range(n)]

    def q_of(partition: list[int]) -> float:
        return modularity(weights, {node: partition[index[node]] for node in nodes},
                          resolution)

    if m == 0.0:
        best = list(range(n))  # no edges: everything stays a singleton
        best_q = 0.0
    else:
        def one_attempt(attempt: int) -> list[int]:
            rng = random.Random(seed * 1000003 + attempt)
            return _one_run(n, adj, deg, m, resolution, rng)

        if threads > 1 and restarts > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partitions = list(pool.map(one_attempt, range(restarts)))
        else:
            partitions = [one_attempt(a) for a in range(restarts)]
        best: list[int] | None = None
        best_q = float("-inf")
        best_sizes: tuple | None = None
        for partition in partitions:  # selection in attempt order
            q = q_of(partition)
            sizes = tuple(sorted(Counter(partition).values(), reverse=True))
            if q > best_q or (q == best_q and sizes < best_sizes):
                best, best_q, best_sizes = partition, q, sizes
        for baseline in ([0] * n, list(range(n))):
            q = q_of(baseline)
            if q > best_q:
                best, best_q = baseline, q

    if min_cluster_size > 1:
        best = _merge_small(best, adj, min_cluster_size)
        best_q = q_of(best)

    # canonical ids: 1..k by size descending, ties by earliest node
    order: dict[int, int] = {}
    for c in sorted(set(best), key=lambda c: (-best.count(c), best.index(c))):
        order[c] = len(order) + 1
    membership = {node: order[best[index[node]]] for node in nodes}
    return ClusterAssignment(
        membership=membership,
        modularity=best_q,
        n_clusters=len(order),
    )


def cluster(network: CooccurrenceNetwork, resolution: float = 1.0,
            min_cluster_size: int = 1, seed: int = 1, restarts: int = 10,
            threads: int = 1) -> ClusterAssignment:
    """Cluster the term network on association strengths (raw counts if
    association_strength has not run)."""
    weights: dict[tuple, float]
    if network.strengths:
        weights = network.strengths
    else:
        weights = {pair: float(c) for pair, c in network.edges.items()}
    return cluster_graph(network.terms, weights, resolution=resolution,
                         min_cluster_size=min_cluster_size, seed=seed,
                         restarts=restarts, threads=threads)


@dataclass(slots=True)
class ClusterSummary:
    cluster_id: int
    label: str
    n_nodes: int
    paper_count: int
    core_paper_count: int
    core_paper_pct: float | None
    link_avg: float | None
    year_avg: float | None
    top_terms: list[tuple[str, int]]
    degenerate: bool


def cluster_summary(assignment: ClusterAssignment, pub_set: set[str],
                    corpus: Corpus, network: CooccurrenceNetwork,
                    core_ids: frozenset[str] | set[str],
                    top_terms: int = 10) -> list[ClusterSummary]:
    """Per-cluster statistics over the publications containing its terms.

    link_avg counts, per publication, the network edges both of whose
    terms the publication carries (term-pair links, not citation links),
    averaged over the cluster's publication set.
    """
    term_set = set(network.terms)
    pub_terms: dict[str, set[str]] = {}
    pub_links: dict[str, int] = {}
    for pub_id in pub_set:
        terms = extract_terms(corpus.records[pub_id]) & term_set
        pub_terms[pub_id] = terms
        pub_links[pub_id] = sum(
            1 for pair in itertools.combinations(sorted(terms), 2)
            if pair in network.edges
        )

    summaries: list[ClusterSummary] = []
    for cid in range(1, assignment.n_clusters + 1):
        cluster_terms = {t for t in network.terms if assignment.membership[t] == cid}
        pubs = sorted(p for p in pub_set if pub_terms[p] & cluster_terms)
        ranked = sorted(cluster_terms,
                        key=lambda t: (-network.occurrence[t], t))[:top_terms]
        top = [(t, network.occurrence[t]) for t in ranked]
        if not pubs:
            summaries.append(ClusterSummary(cid, "", len(cluster_terms), 0, 0,
                                            None, None, None, top, True))
            continue
        core_count = sum(1 for p in pubs if p in core_ids)
        summaries.append(ClusterSummary(
            cluster_id=cid,
            label="",
            n_nodes=len(cluster_terms),
            paper_count=len(pubs),
            core_paper_count=core_count,
            core_paper_pct=100.0 * core_count / len(pubs),
            link_avg=sum(pub_links[p] for p in pubs) / len(pubs),
            year_avg=sum(corpus.records[p].year for p in pubs) / len(pubs),
            top_terms=top,
            degenerate=False,
        ))
    return summaries
