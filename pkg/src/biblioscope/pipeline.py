"""Pipeline configuration, stage functions, and the report bundle.

Every stage reads the previous stage's serialized outputs, so each is
independently runnable; run_pipeline threads the in-memory objects through
instead to avoid redundant reloads, which is safe because the snapshot
round-trips losslessly. The bundle is a pure function of (config, input
files): no timestamps, no absolute paths, sorted iteration everywhere.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .burst import top_bursts
from .cooccur import (ClusterAssignment, association_strength, build_network,
                      cluster, cluster_summary)
from .corpus import (ORG_TYPES, Corpus, build_citation_graph, load_corpus,
                     save_corpus)
from .delineate import (DatasetLabels, expand_direct_citations, finalize,
                        parse_query, select_core)
from .errors import ConfigError, InputError, MissingStageError, StageError
from .exports import (fmt_pct, fmt_ratio, round_half_up, sha256_file,
                      sha256_text, write_csv, write_graphml, write_json,
                      read_json)
from .indicators import (ACTOR_KINDS, actor_table, growth_and_cagr,
                         load_external_totals, period_blocks, period_label,
                         ranked_rows, totals_for_kind, yearly_counts)
from .interlink import (cluster_sdgs, sdg_cocitation_matrix,
                        sdg_coclassification_matrix)
from .sdg import (SDG_IDS, SdgAssignment, classify_set, continent_tables,
                  institutions_per_sdg, load_glossary, prevalence)
from .corpus import CONTINENTS

logger = logging.getLogger(__name__)

STAGES = ("ingest", "delineate", "indicators", "cooccur", "burst",
          "classify", "interlink", "report")


@dataclass(slots=True)
class PipelineConfig:
    corpus_path: Path
    query_text: str
    output_dir: Path
    corpus_format: str = "jsonl"
    year_range: tuple[int, int] = (2000, 2017)
    org_types: frozenset[str] | str = frozenset({"HEI", "RC"})
    expansion_layers: int = 1
    min_occurrence: int = 50
    cluster_resolution: float = 1.0
    cluster_min_size: int = 1
    cluster_seed: int = 1
    cluster_restarts: int = 10
    cluster_top_terms: int = 10
    burst_s: float = 2.0
    burst_gamma: float = 1.0
    burst_top: int = 60
    glossary_path: Path | None = None
    external_totals_path: Path | None = None
    ai_display_multiplier: float = 100.0
    actor_min_count: int = 1
    block_len: int = 6
    classify_scan_text: bool = False
    echo: dict = field(default_factory=dict, repr=False)  # manifest-facing


_TOP_KEYS = {
    "corpus_path", "corpus_format", "query_text", "year_range", "org_types",
    "expansion_layers", "min_occurrence", "cluster", "burst", "glossary_path",
    "external_totals_path", "ai_display_multiplier", "actor_min_count",
    "block_len", "classify_scan_text", "output_dir",
}
_CLUSTER_KEYS = {"resolution", "min_cluster_size", "seed", "restarts", "top_terms"}
_BURST_KEYS = {"s", "gamma", "top"}

# CLI override name -> flat config key
OVERRIDE_KEYS = {
    "corpus_path", "corpus_format", "query_text", "expansion_layers",
    "min_occurrence", "cluster_resolution", "cluster_min_size", "cluster_seed",
    "cluster_restarts", "burst_s", "burst_gamma", "burst_top", "glossary_path",
    "external_totals_path", "actor_min_count", "classify_scan_text",
    "output_dir",
}


def _need(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Read the JSON config file and apply CLI flag overrides (flags win).

    Relative paths from the file resolve against the config file's
    directory; relative paths given as overrides resolve against the
    caller's working directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    _need(not unknown, f"unknown config keys: {sorted(unknown)}")

    flat: dict = {}
    for key in ("corpus_path", "corpus_format", "query_text", "year_range",
                "org_types", "expansion_layers", "min_occurrence",
                "glossary_path", "external_totals_path",
                "ai_display_multiplier", "actor_min_count", "block_len",
                "classify_scan_text", "output_dir"):
        if key in data:
            flat[key] = data[key]
    for section, keys, prefix in (("cluster", _CLUSTER_KEYS, "cluster_"),
                                  ("burst", _BURST_KEYS, "burst_")):
        if section in data:
            sub = data[section]
            _need(isinstance(sub, dict), f"config key {section!r} must be an object")
            bad = set(sub) - keys
            _need(not bad, f"unknown {section} keys: {sorted(bad)}")
            for k, v in sub.items():
                flat[prefix + k] = v
    # the cluster block's min_cluster_size maps onto cluster_min_size
    if "cluster_min_cluster_size" in flat:
        flat["cluster_min_size"] = flat.pop("cluster_min_cluster_size")

    overridden: set[str] = set()
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in OVERRIDE_KEYS:
                raise ConfigError(f"unknown override {key!r}")
            flat[key] = value
            overridden.add(key)

    for required in ("corpus_path", "query_text", "output_dir"):
        _need(required in flat and flat[required],
              f"config is missing required key {required!r}")

    base = path.parent

    def as_path(value, key: str) -> Path:
        p = Path(str(value))
        if p.is_absolute():
            return p
        return Path.cwd() / p if key in overridden else base / p

    year_range = flat.get("year_range", [2000, 2017])
    _need(isinstance(year_range, (list, tuple)) and len(year_range) == 2
          and all(isinstance(y, int) for y in year_range),
          "year_range must be [lo, hi] with integer years")
    lo, hi = year_range
    _need(lo <= hi, f"year_range lower bound {lo} exceeds upper bound {hi}")

    org_types = flat.get("org_types", ["HEI", "RC"])
    if org_types != "any":
        _need(isinstance(org_types, (list, tuple, set, frozenset)) and org_types,
              'org_types must be "any" or a nonempty list')
        org_types = frozenset(org_types)
        bad = set(org_types) - ORG_TYPES
        _need(not bad, f"unknown org_types: {sorted(bad)}")

    def num(key, default, kind, low=None, low_open=False):
        value = flat.get(key, default)
        _need(isinstance(value, (int, float)) and not isinstance(value, bool),
              f"config key {key!r} must be a number")
        if kind is int:
            _need(isinstance(value, int),
                  f"config key {key!r} must be an integer")
        if low is not None:
            if low_open:
                _need(value > low, f"config key {key!r} must be > {low}")
            else:
                _need(value >= low, f"config key {key!r} must be >= {low}")
        return value

    corpus_format = flat.get("corpus_format", "jsonl")
    _need(corpus_format in ("jsonl", "csv"),
          f"corpus_format must be jsonl or csv, got {corpus_format!r}")
    scan_text = flat.get("classify_scan_text", False)
    _need(isinstance(scan_text, bool), "classify_scan_text must be a boolean")

    config = PipelineConfig(
        corpus_path=as_path(flat["corpus_path"], "corpus_path"),
        query_text=str(flat["query_text"]),
        output_dir=as_path(flat["output_dir"], "output_dir"),
        corpus_format=corpus_format,
        year_range=(lo, hi),
        org_types=org_types,
        expansion_layers=int(num("expansion_layers", 1, int, low=1)),
        min_occurrence=int(num("min_occurrence", 50, int, low=1)),
        cluster_resolution=float(num("cluster_resolution", 1.0, float,
                                     low=0.0, low_open=True)),
        cluster_min_size=int(num("cluster_min_size", 1, int, low=1)),
        cluster_seed=int(num("cluster_seed", 1, int)),
        cluster_restarts=int(num("cluster_restarts", 10, int, low=1)),
        cluster_top_terms=int(num("cluster_top_terms", 10, int, low=1)),
        burst_s=float(num("burst_s", 2.0, float, low=1.0, low_open=True)),
        burst_gamma=float(num("burst_gamma", 1.0, float, low=0.0)),
        burst_top=int(num("burst_top", 60, int, low=1)),
        glossary_path=as_path(flat["glossary_path"], "glossary_path")
        if flat.get("glossary_path") else None,
        external_totals_path=as_path(flat["external_totals_path"],
                                     "external_totals_path")
        if flat.get("external_totals_path") else None,
        ai_display_multiplier=float(num("ai_display_multiplier", 100.0, float,
                                        low=0.0, low_open=True)),
        actor_min_count=int(num("actor_min_count", 1, int, low=1)),
        block_len=int(num("block_len", 6, int, low=1)),
        classify_scan_text=scan_text,
    )
    parse_query(config.query_text)  # bad query text is a config error

    echo = {
        "corpus_path": str(flat["corpus_path"]),
        "corpus_format": config.corpus_format,
        "query_text": config.query_text,
        "year_range": [lo, hi],
        "org_types": "any" if org_types == "any" else sorted(org_types),
        "expansion_layers": config.expansion_layers,
        "min_occurrence": config.min_occurrence,
        "cluster": {
            "resolution": config.cluster_resolution,
            "min_cluster_size": config.cluster_min_size,
            "seed": config.cluster_seed,
            "restarts": config.cluster_restarts,
            "top_terms": config.cluster_top_terms,
        },
        "burst": {"s": config.burst_s, "gamma": config.burst_gamma,
                  "top": config.burst_top},
        "glossary_path": str(flat["glossary_path"])
        if flat.get("glossary_path") else None,
        "external_totals_path": str(flat["external_totals_path"])
        if flat.get("external_totals_path") else None,
        "ai_display_multiplier": config.ai_display_multiplier,
        "actor_min_count": config.actor_min_count,
        "block_len": config.block_len,
        "classify_scan_text": config.classify_scan_text,
    }
    config.echo = echo
    return config


class Bundle:
    """Path arithmetic for one output directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    @property
    def summary(self) -> Path:
        return self.root / "summary.json"

    def dir(self, name: str) -> Path:
        return self.root / name

    def path(self, name: str, filename: str) -> Path:
        return self.root / name / filename

    def ensure(self, name: str) -> Path:
        d = self.dir(name)
        d.mkdir(parents=True, exist_ok=True)
        return d


def config_digest(echo: dict) -> str:
    return sha256_text(json.dumps(echo, sort_keys=True, separators=(",", ":")))


def _update_manifest(config: PipelineConfig, stage: str, payload: dict,
                     inputs: dict | None = None) -> None:
    bundle = Bundle(config.output_dir)
    bundle.root.mkdir(parents=True, exist_ok=True)
    digest = config_digest(config.echo)
    if bundle.manifest.is_file():
        manifest = read_json(bundle.manifest)
        if manifest.get("config_digest") != digest:
            raise ConfigError(
                f"{bundle.manifest} belongs to a different configuration; "
                "use a fresh output_dir or the original config"
            )
    else:
        manifest = {
            "config": config.echo,
            "config_digest": digest,
            "inputs": {},
            "stages": {},
        }
    manifest["stages"][stage] = payload
    if inputs:
        manifest["inputs"].update(inputs)
    write_json(bundle.manifest, manifest)


def _manifest_stages(config: PipelineConfig) -> dict:
    bundle = Bundle(config.output_dir)
    if not bundle.manifest.is_file():
        return {}
    return read_json(bundle.manifest).get("stages", {})


# ---------------------------------------------------------------- stages

def stage_ingest(config: PipelineConfig) -> Corpus:
    """Load and validate the input corpus; write the normalized snapshot."""
    corpus = load_corpus(config.corpus_path, config.corpus_format)
    bundle = Bundle(config.output_dir)
    bundle.ensure("corpus")
    save_corpus(corpus, bundle.path("corpus", "corpus.jsonl"), "jsonl")
    write_json(bundle.path("corpus", "load_report.json"), {
        "loaded": len(corpus),
        "skipped": [
            {"line": issue.line, "pub_id": issue.pub_id, "reason": issue.reason}
            for issue in corpus.skipped
        ],
    })
    _update_manifest(config, "ingest",
                     {"loaded": len(corpus), "skipped": len(corpus.skipped)},
                     inputs={"corpus": sha256_file(config.corpus_path)})
    logger.info("ingest: %d records (%d skipped)", len(corpus),
                len(corpus.skipped))
    return corpus


def _load_snapshot(config: PipelineConfig, stage: str) -> Corpus:
    path = Bundle(config.output_dir).path("corpus", "corpus.jsonl")
    if not path.is_file():
        raise MissingStageError(stage, "ingest")
    return load_corpus(path, "jsonl")


def stage_delineate(config: PipelineConfig, corpus: Corpus | None = None,
                    threads: int = 1) -> DatasetLabels:
    """Query matching, citation expansion, final filtering."""
    if corpus is None:
        corpus = _load_snapshot(config, "delineate")
    query = parse_query(config.query_text)
    core = select_core(corpus, query, config.year_range, threads=threads)
    graph = build_citation_graph(corpus)
    labels = expand_direct_citations(core, graph, config.expansion_layers)
    labels = finalize(labels, corpus, config.year_range, config.org_types)
    bundle = Bundle(config.output_dir)
    bundle.ensure("delineation")
    write_json(bundle.path("delineation", "report.json"), {
        "cardinalities": labels.report(),
        "expansion_layers": config.expansion_layers,
        "query": str(query),
    })
    write_csv(bundle.path("delineation", "provenance.csv"),
              ["pub_id", "provenance"], labels.provenance_rows())
    write_csv(bundle.path("delineation", "final_ids.csv"), ["pub_id"],
              [(pub_id,) for pub_id in sorted(labels.final)])
    _update_manifest(config, "delineate", labels.report())
    logger.info("delineate: %s", labels.report())
    return labels


def _load_labels(config: PipelineConfig, stage: str) -> DatasetLabels:
    bundle = Bundle(config.output_dir)
    prov_path = bundle.path("delineation", "provenance.csv")
    final_path = bundle.path("delineation", "final_ids.csv")
    if not prov_path.is_file() or not final_path.is_file():
        raise MissingStageError(stage, "delineate")
    core, cited, citing, expanded = set(), set(), set(), set()
    with open(prov_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            pub_id, prov = row["pub_id"], row["provenance"]
            expanded.add(pub_id)
            if prov == "core":
                core.add(pub_id)
            if prov in ("cited_only", "both"):
                cited.add(pub_id)
            if prov in ("citing_only", "both"):
                citing.add(pub_id)
    with open(final_path, encoding="utf-8", newline="") as fh:
        final = {row["pub_id"] for row in csv.DictReader(fh)}
    return DatasetLabels(
        core=frozenset(core), cited=frozenset(cited), citing=frozenset(citing),
        expanded=frozenset(expanded), phantoms=frozenset(),
        final=frozenset(final),
    )


def stage_indicators(config: PipelineConfig, corpus: Corpus | None = None,
                     labels: DatasetLabels | None = None) -> None:
    """Yearly series, growth, and per-period actor tables."""
    if corpus is None:
        corpus = _load_snapshot(config, "indicators")
    if labels is None:
        labels = _load_labels(config, "indicators")
    final = set(labels.final)
    lo, hi = config.year_range
    bundle = Bundle(config.output_dir)
    bundle.ensure("indicators")

    series = yearly_counts(final, corpus, config.year_range)
    write_csv(bundle.path("indicators", "yearly_counts.csv"), ["year", "count"],
              sorted(series.items()))

    growth_doc: dict = {"start_year": lo, "end_year": hi,
                        "start_count": series.get(lo, 0),
                        "end_count": series.get(hi, 0)}
    try:
        growth, cagr = growth_and_cagr(series, lo, hi)
        growth_doc["growth_pct"] = round_half_up(growth, 2)
        growth_doc["cagr_pct"] = round_half_up(cagr, 2)
    except ValueError as exc:
        growth_doc["growth_pct"] = None
        growth_doc["cagr_pct"] = None
        growth_doc["note"] = str(exc)
    write_json(bundle.path("indicators", "growth.json"), growth_doc)

    if config.external_totals_path is not None:
        totals, all_total = load_external_totals(config.external_totals_path)
        totals_digest = {"external_totals": sha256_file(config.external_totals_path)}
    else:
        totals, all_total = {}, None
        totals_digest = None
        logger.warning("no external totals configured; activity index "
                       "columns will be empty")

    periods: dict[str, set[str]] = {period_label((lo, hi)): final}
    for block, block_set in period_blocks(final, corpus, config.block_len,
                                          lo).items():
        periods.setdefault(period_label(block), block_set)

    header = ["actor_id", "actor_kind", "period", "topic_count",
              "topic_share_pct", "activity_index", "activity_index_display"]
    counts = {}
    for kind in ACTOR_KINDS:
        kind_totals = totals_for_kind(totals, kind)
        all_rows = []
        for label, pub_set in periods.items():
            all_rows.extend(actor_table(pub_set, corpus, kind, label,
                                        kind_totals, all_total))
        ranked = ranked_rows(all_rows, config.actor_min_count)

        def to_cells(rows):
            return [
                (r.actor_id, r.actor_kind, r.period, r.topic_count,
                 fmt_pct(r.topic_share_pct), fmt_ratio(r.activity_index),
                 fmt_pct(r.activity_index * config.ai_display_multiplier)
                 if r.activity_index is not None else "")
                for r in rows
            ]

        write_csv(bundle.path("indicators", f"actors_{kind}.csv"), header,
                  to_cells(ranked))
        write_csv(bundle.path("indicators", f"actors_{kind}_raw.csv"), header,
                  to_cells(all_rows))
        counts[f"actors_{kind}"] = len(ranked)

    payload = {"years": len(series), "periods": sorted(periods), **counts}
    _update_manifest(config, "indicators", payload, inputs=totals_digest)
    logger.info("indicators: %s", payload)


def stage_cooccur(config: PipelineConfig, corpus: Corpus | None = None,
                  labels: DatasetLabels | None = None, threads: int = 1) -> None:
    """Term network, association strengths, clusters, summaries."""
    if corpus is None:
        corpus = _load_snapshot(config, "cooccur")
    if labels is None:
        labels = _load_labels(config, "cooccur")
    final = set(labels.final)
    network = association_strength(
        build_network(final, corpus, config.min_occurrence)
    )
    if network.terms:
        assignment = cluster(network, resolution=config.cluster_resolution,
                             min_cluster_size=config.cluster_min_size,
                             seed=config.cluster_seed,
                             restarts=config.cluster_restarts, threads=threads)
    else:
        assignment = ClusterAssignment(membership={}, modularity=0.0,
                                       n_clusters=0)
        logger.warning("co-occurrence network is empty at min_occurrence=%d",
                       config.min_occurrence)
    summaries = cluster_summary(assignment, final, corpus, network,
                                labels.core, config.cluster_top_terms)

    bundle = Bundle(config.output_dir)
    bundle.ensure("cooccur")
    write_csv(
        bundle.path("cooccur", "network_edges.csv"),
        ["term_i", "term_j", "c_ij", "a_ij", "cluster_i", "cluster_j"],
        [
            (a, b, c, fmt_ratio(network.strengths[(a, b)]),
             assignment.membership[a], assignment.membership[b])
            for (a, b), c in network.edges.items()
        ],
    )
    write_graphml(
        bundle.path("cooccur", "network.graphml"),
        nodes=[
            (term, {"occurrence": network.occurrence[term],
                    "cluster": assignment.membership[term]})
            for term in network.terms
        ],
        edges=[
            (a, b, {"cooccurrence": c,
                    "association_strength": network.strengths[(a, b)]})
            for (a, b), c in network.edges.items()
        ],
    )
    write_csv(
        bundle.path("cooccur", "clusters.csv"),
        ["cluster_id", "label", "n_nodes", "paper_count", "core_paper_count",
         "core_paper_pct", "link_avg", "year_avg", "degenerate", "top_terms"],
        [
            (s.cluster_id, s.label, s.n_nodes, s.paper_count,
             s.core_paper_count, fmt_pct(s.core_paper_pct),
             fmt_ratio(s.link_avg), fmt_ratio(s.year_avg),
             int(s.degenerate),
             ";".join(f"{t}:{n}" for t, n in s.top_terms))
            for s in summaries
        ],
    )
    payload = {
        "items": len(network.terms),
        "links": network.total_links,
        "link_strength": network.total_link_strength,
        "clusters": assignment.n_clusters,
        "modularity": round_half_up(assignment.modularity, 4),
    }
    _update_manifest(config, "cooccur", payload)
    logger.info("cooccur: %s", payload)


def stage_burst(config: PipelineConfig, corpus: Corpus | None = None,
                labels: DatasetLabels | None = None, threads: int = 1) -> None:
    """Burst table over the final set's keyword streams."""
    if corpus is None:
        corpus = _load_snapshot(config, "burst")
    if labels is None:
        labels = _load_labels(config, "burst")
    final = set(labels.final)
    intervals = top_bursts(final, corpus, config.burst_top, config.year_range,
                           s=config.burst_s, gamma=config.burst_gamma,
                           min_occurrence=config.min_occurrence,
                           threads=threads)
    bundle = Bundle(config.output_dir)
    bundle.ensure("burst")
    write_csv(bundle.path("burst", "bursts.csv"),
              ["term", "strength", "begin", "end"],
              [(b.term, fmt_ratio(b.strength), b.begin, b.end)
               for b in intervals])
    _update_manifest(config, "burst", {"intervals": len(intervals)})
    logger.info("burst: %d intervals", len(intervals))


def stage_classify(config: PipelineConfig, corpus: Corpus | None = None,
                   labels: DatasetLabels | None = None,
                   threads: int = 1) -> dict[str, SdgAssignment]:
    """Glossary classification plus prevalence/continent/institution tables."""
    if config.glossary_path is None:
        raise InputError("no glossary_path configured; the classify stage "
                         "needs one")
    if corpus is None:
        corpus = _load_snapshot(config, "classify")
    if labels is None:
        labels = _load_labels(config, "classify")
    glossary = load_glossary(config.glossary_path)
    final = set(labels.final)
    assignments = classify_set(final, corpus, glossary,
                               scan_text=config.classify_scan_text,
                               threads=threads)
    prev_all = prevalence(assignments, "all")
    prev_cls = prevalence(assignments, "classified")
    tables = continent_tables(assignments, corpus)
    inst_rows, inst_total = institutions_per_sdg(assignments, corpus)

    bundle = Bundle(config.output_dir)
    bundle.ensure("sdg")
    write_csv(bundle.path("sdg", "assignments.csv"), ["pub_id", "sdgs"],
              [(pub_id, ";".join(str(s) for s in sorted(a.sdgs)))
               for pub_id, a in assignments.items()])
    write_csv(bundle.path("sdg", "prevalence.csv"),
              ["sdg", "count", "pct_of_classified", "pct_of_all"],
              [(s, prev_cls.counts[s], fmt_pct(prev_cls.pcts[s]),
                fmt_pct(prev_all.pcts[s])) for s in SDG_IDS])
    write_json(bundle.path("sdg", "classification.json"), {
        "total": prev_all.total,
        "classified": prev_all.classified,
        "classified_pct_of_all": round_half_up(prev_all.classified_pct_of_all, 2),
        "glossary_terms": glossary.term_count,
        "excluded_no_affiliation": tables.excluded_no_affiliation,
    })
    continent_header = ["sdg", *CONTINENTS]
    write_csv(bundle.path("sdg", "continent_counts.csv"), continent_header,
              [(s, *(tables.counts[s][c] for c in CONTINENTS))
               for s in SDG_IDS])
    write_csv(
        bundle.path("sdg", "continent_contribution.csv"), continent_header,
        [
            (s, *((fmt_pct(tables.contribution[s][c]) for c in CONTINENTS)
                  if tables.contribution[s] is not None
                  else ("",) * len(CONTINENTS)))
            for s in SDG_IDS
        ],
    )
    write_csv(
        bundle.path("sdg", "continent_profile.csv"), continent_header,
        [(s, *(fmt_pct(tables.profile[s][c]) for c in CONTINENTS))
         for s in SDG_IDS],
    )
    write_csv(bundle.path("sdg", "institutions_per_sdg.csv"),
              ["sdg", "institution_count", "pct"],
              [(r.sdg, r.institution_count, fmt_pct(r.pct))
               for r in inst_rows] + [("total", inst_total, "")])
    payload = {
        "total": prev_all.total,
        "classified": prev_all.classified,
        "excluded_no_affiliation": tables.excluded_no_affiliation,
        "institution_total": inst_total,
    }
    _update_manifest(config, "classify", payload,
                     inputs={"glossary": sha256_file(config.glossary_path)})
    logger.info("classify: %s", payload)
    return assignments


def _load_assignments(config: PipelineConfig,
                      stage: str) -> dict[str, SdgAssignment]:
    path = Bundle(config.output_dir).path("sdg", "assignments.csv")
    if not path.is_file():
        raise MissingStageError(stage, "classify")
    assignments = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sdgs = frozenset(int(x) for x in row["sdgs"].split(";") if x)
            assignments[row["pub_id"]] = SdgAssignment(row["pub_id"], sdgs)
    return assignments


def stage_interlink(config: PipelineConfig, corpus: Corpus | None = None,
                    labels: DatasetLabels | None = None,
                    assignments: dict[str, SdgAssignment] | None = None) -> None:
    """SDG interconnection matrices, average years, and SDG clusters."""
    if corpus is None:
        corpus = _load_snapshot(config, "interlink")
    if labels is None:
        labels = _load_labels(config, "interlink")
    if assignments is None:
        assignments = _load_assignments(config, "interlink")
    final = set(labels.final)
    graph = build_citation_graph(corpus)
    cocit = sdg_cocitation_matrix(assignments, graph, final, corpus)
    coclass = sdg_coclassification_matrix(assignments, corpus)
    partition = cluster_sdgs(cocit, resolution=config.cluster_resolution,
                             seed=config.cluster_seed,
                             restarts=config.cluster_restarts)

    bundle = Bundle(config.output_dir)
    bundle.ensure("interlink")
    # 17x17 cells, header = the SDG ids, rows in SDG order
    matrix_header = [str(s) for s in SDG_IDS]
    for name, matrix in (("cocitation_matrix.csv", cocit),
                         ("coclassification_matrix.csv", coclass)):
        write_csv(bundle.path("interlink", name), matrix_header,
                  [tuple(matrix.cells[s - 1]) for s in SDG_IDS])
    write_graphml(
        bundle.path("interlink", "cocitation.graphml"),
        nodes=[
            (s, {"size": cocit.node_sizes[s],
                 "avg_year": cocit.node_avg_year[s],
                 "cluster": partition.membership[s]})
            for s in SDG_IDS
        ],
        edges=[
            (s, t, {"weight": cocit.cell(s, t)})
            for s in SDG_IDS for t in SDG_IDS
            if s < t and cocit.cell(s, t) > 0
        ],
    )
    write_csv(bundle.path("interlink", "sdg_avg_year.csv"),
              ["sdg", "avg_year"],
              [(s, fmt_ratio(cocit.node_avg_year[s])) for s in SDG_IDS])
    write_csv(bundle.path("interlink", "sdg_clusters.csv"),
              ["sdg", "cluster"],
              [(s, partition.membership[s]) for s in SDG_IDS])
    payload = {
        "cocitation_total": cocit.total(),
        "coclassification_total": coclass.total(),
        "sdg_clusters": partition.n_clusters,
    }
    _update_manifest(config, "interlink", payload)
    logger.info("interlink: %s", payload)


def stage_report(config: PipelineConfig) -> None:
    """Collate the bundle into summary.json and render the figures."""
    from .report import build_report  # matplotlib import stays off other stages

    done = _manifest_stages(config)
    for required in STAGES[:-1]:
        if required not in done:
            raise MissingStageError("report", required)
    payload = build_report(config)
    _update_manifest(config, "report", payload)
    logger.info("report: %s", payload)


def _call(stage: str, fn, *args, **kwargs):
    """Uniform error surface: stage prefix on input problems, StageError
    on unexpected value errors, config problems passed through."""
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError):
        raise
    except InputError as exc:
        raise InputError(f"stage '{stage}': {exc}") from exc
    except ValueError as exc:
        raise StageError(stage, str(exc)) from exc


_THREADED_STAGES = frozenset({"delineate", "cooccur", "burst", "classify"})


def run_stage(stage: str, config: PipelineConfig, threads: int = 1):
    """One stage by name, reading upstream artifacts from the bundle."""
    table = {
        "ingest": stage_ingest,
        "delineate": stage_delineate,
        "indicators": stage_indicators,
        "cooccur": stage_cooccur,
        "burst": stage_burst,
        "classify": stage_classify,
        "interlink": stage_interlink,
        "report": stage_report,
    }
    if stage not in table:
        raise ConfigError(f"unknown stage {stage!r}")
    kwargs = {"threads": threads} if stage in _THREADED_STAGES else {}
    return _call(stage, table[stage], config, **kwargs)


def run_pipeline(config: PipelineConfig, threads: int = 1) -> Path:
    """All stages in order, sharing in-memory intermediates."""
    corpus = _call("ingest", stage_ingest, config)
    labels = _call("delineate", stage_delineate, config, corpus,
                   threads=threads)
    _call("indicators", stage_indicators, config, corpus, labels)
    _call("cooccur", stage_cooccur, config, corpus, labels, threads=threads)
    _call("burst", stage_burst, config, corpus, labels, threads=threads)
    assignments = _call("classify", stage_classify, config, corpus, labels,
                        threads=threads)
    _call("interlink", stage_interlink, config, corpus, labels, assignments)
    _call("report", stage_report, config)
    return Bundle(config.output_dir).root
