"""Topic-delineated corpus analysis: indicators, term networks, bursts,
and SDG interconnections, bundled into a reproducible report."""

from .burst import (BurstInterval, TermYearStream, build_streams,
                    detect_bursts, top_bursts)
from .cooccur import (ClusterAssignment, CooccurrenceNetwork,
                      association_strength, build_network, cluster,
                      cluster_graph, cluster_summary, modularity)
from .corpus import (Affiliation, CitationGraph, Corpus, PublicationRecord,
                     build_citation_graph, filter_pubs, load_corpus,
                     normalize_term, normalize_text, save_corpus, tokenize)
from .delineate import (DatasetLabels, TopicQuery, expand_direct_citations,
                        finalize, match_record, parse_query, select_core)
from .errors import (BiblioscopeError, ConfigError, GlossaryError, InputError,
                     MissingStageError, QueryParseError, StageError)
from .indicators import (ActivityIndexInput, ActorRow, activity_index,
                         actor_table, growth_and_cagr, load_external_totals,
                         period_blocks, yearly_counts)
from .interlink import (SdgMatrix, cluster_sdgs, sdg_cocitation_matrix,
                        sdg_coclassification_matrix)
from .pipeline import PipelineConfig, load_config, run_pipeline, run_stage
from .sdg import (SdgAssignment, SdgGlossary, classify, classify_set,
                  continent_tables, institutions_per_sdg, load_glossary,
                  prevalence)

__version__ = "0.1.0"

__all__ = [
    "Affiliation",
    "ActivityIndexInput",
    "ActorRow",
    "BiblioscopeError",
    "BurstInterval",
    "CitationGraph",
    "ClusterAssignment",
    "ConfigError",
    "CooccurrenceNetwork",
    "Corpus",
    "DatasetLabels",
    "GlossaryError",
    "InputError",
    "MissingStageError",
    "PipelineConfig",
    "PublicationRecord",
    "QueryParseError",
    "SdgAssignment",
    "SdgGlossary",
    "SdgMatrix",
    "StageError",
    "TermYearStream",
    "TopicQuery",
    "activity_index",
    "actor_table",
    "association_strength",
    "build_citation_graph",
    "build_network",
    "build_streams",
    "classify",
    "classify_set",
    "cluster",
    "cluster_graph",
    "cluster_sdgs",
    "cluster_summary",
    "continent_tables",
    "detect_bursts",
    "expand_direct_citations",
    "filter_pubs",
    "finalize",
    "growth_and_cagr",
    "institutions_per_sdg",
    "load_config",
    "load_corpus",
    "load_external_totals",
    "load_glossary",
    "match_record",
    "modularity",
    "normalize_term",
    "normalize_text",
    "parse_query",
    "period_blocks",
    "prevalence",
    "run_pipeline",
    "run_stage",
    "save_corpus",
    "sdg_cocitation_matrix",
    "sdg_coclassification_matrix",
    "select_core",
    "top_bursts",
    "yearly_counts",
    "__version__",
]
