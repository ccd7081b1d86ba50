"""Command line entry point.

Each stage is a subcommand; `run` executes the whole pipeline. Flags
override the corresponding config keys, so a config file can describe the
study while sweeps (seed, resolution, threshold) stay on the command line.
Exit codes: 0 ok, 2 configuration problem, 3 input data problem, 4 stage
could not run.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, InputError, StageError
from .pipeline import STAGES, load_config, run_pipeline, run_stage


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", required=True,
                    help="path to the JSON configuration file")
    sp.add_argument("--output-dir", dest="output_dir", default=None,
                    help="bundle directory (overrides the config)")
    sp.add_argument("--threads", type=int, default=1,
                    help="worker threads for the parallel stages (default 1)")
    sp.add_argument("-v", "--verbose", action="count", default=0,
                    help="-v for progress, -vv for debug output")


def _add_ingest_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--corpus", dest="corpus_path", default=None,
                    help="corpus file (overrides the config)")
    sp.add_argument("--format", dest="corpus_format", default=None,
                    choices=("jsonl", "csv"), help="corpus file format")


def _add_delineate_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--query", dest="query_text", default=None,
                    help="topic query (overrides the config)")
    sp.add_argument("--layers", dest="expansion_layers", type=int,
                    default=None, help="citation expansion layers")


def _add_indicator_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--external-totals", dest="external_totals_path",
                    default=None,
                    help="whole-database actor totals for the activity index")
    sp.add_argument("--min-count", dest="actor_min_count", type=int,
                    default=None,
                    help="smallest topic count kept in ranked actor tables")


def _add_cluster_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--resolution", dest="cluster_resolution", type=float,
                    default=None, help="clustering resolution")
    sp.add_argument("--seed", dest="cluster_seed", type=int, default=None,
                    help="clustering random seed")
    sp.add_argument("--restarts", dest="cluster_restarts", type=int,
                    default=None, help="clustering restarts")


def _add_cooccur_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--min-occurrence", dest="min_occurrence", type=int,
                    default=None,
                    help="smallest keyword occurrence kept in the network")
    _add_cluster_flags(sp)
    sp.add_argument("--min-cluster-size", dest="cluster_min_size", type=int,
                    default=None, help="merge clusters smaller than this")


def _add_burst_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--s", dest="burst_s", type=float, default=None,
                    help="burst state rate ratio")
    sp.add_argument("--gamma", dest="burst_gamma", type=float, default=None,
                    help="burst transition penalty weight")
    sp.add_argument("--top", dest="burst_top", type=int, default=None,
                    help="number of burst intervals kept")


def _add_classify_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--glossary", dest="glossary_path", default=None,
                    help="SDG glossary CSV (overrides the config)")
    sp.add_argument("--scan-text", dest="classify_scan_text",
                    action="store_const", const=True, default=None,
                    help="also match glossary terms in titles and abstracts")


_OVERRIDE_DESTS = (
    "corpus_path", "corpus_format", "query_text", "expansion_layers",
    "external_totals_path", "actor_min_count", "min_occurrence",
    "cluster_resolution", "cluster_seed", "cluster_restarts",
    "cluster_min_size", "burst_s", "burst_gamma", "burst_top",
    "glossary_path", "classify_scan_text", "output_dir",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biblioscope",
        description="Corpus delineation, indicators, term networks, bursts, "
                    "and SDG analysis in one report bundle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    flag_groups = {
        "ingest": (_add_ingest_flags,),
        "delineate": (_add_delineate_flags,),
        "indicators": (_add_indicator_flags,),
        "cooccur": (_add_cooccur_flags,),
        "burst": (_add_burst_flags,),
        "classify": (_add_classify_flags,),
        "interlink": (_add_cluster_flags,),
        "report": (),
    }
    descriptions = {
        "ingest": "load and validate the corpus, write the snapshot",
        "delineate": "match the query and expand over direct citations",
        "indicators": "yearly counts, growth, and actor tables",
        "cooccur": "keyword co-occurrence network and clusters",
        "burst": "burst detection over keyword year streams",
        "classify": "SDG glossary classification and prevalence tables",
        "interlink": "SDG co-citation and co-classification matrices",
        "report": "summary document and figures from the bundle",
    }
    for stage in STAGES:
        sp = sub.add_parser(stage, help=descriptions[stage])
        _add_common(sp)
        for add in flag_groups[stage]:
            add(sp)

    sp = sub.add_parser("run", help="all stages in order")
    _add_common(sp)
    for add in (_add_ingest_flags, _add_delineate_flags, _add_indicator_flags,
                _add_cooccur_flags, _add_burst_flags, _add_classify_flags):
        add(sp)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        dest: getattr(args, dest)
        for dest in _OVERRIDE_DESTS
        if getattr(args, dest, None) is not None
    }
    try:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        config = load_config(args.config, overrides)
        if args.command == "run":
            run_pipeline(config, threads=args.threads)
        else:
            run_stage(args.command, config, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
