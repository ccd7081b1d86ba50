"""Bundle summary and figures.

This module is the only one that touches matplotlib, and it reads from the
bundle's own files rather than recomputing anything, so the summary always
reflects what was actually written. Figures are rendered with the Agg
backend at a fixed size and dpi, with the Software metadata chunk stripped
so repeated runs produce byte-identical PNGs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import MissingStageError
from .exports import read_json, write_json
from .indicators import period_label
from .pipeline import Bundle, PipelineConfig
from .sdg import SDG_IDS

FIG_DPI = 100


def _read_rows(path: Path) -> list[dict[str, str]]:
    if not path.is_file():
        raise MissingStageError("report", path.parent.name)
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=FIG_DPI, metadata={"Software": None})
    plt.close(fig)


def _fig_yearly(series: list[tuple[int, int]], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    years = [y for y, _ in series]
    counts = [c for _, c in series]
    ax.bar(years, counts, color="#2b6cb0")
    ax.set_xlabel("publication year")
    ax.set_ylabel("publications")
    ax.set_title("Yearly output")
    fig.tight_layout()
    _save(fig, path)


def _fig_actors(rows: list[dict[str, str]], path: Path) -> None:
    """Volume vs specialization scatter for the full-period institution rows."""
    fig, ax = plt.subplots(figsize=(8, 6))
    xs, ys = [], []
    for row in rows:
        if not row["activity_index_display"]:
            continue
        xs.append(int(row["topic_count"]))
        ys.append(float(row["activity_index_display"]))
    if xs:
        ax.scatter(xs, ys, s=18, color="#2b6cb0", alpha=0.7)
        ax.axhline(100.0, color="#999999", linewidth=0.8, linestyle="--")
    ax.set_xlabel("publications on topic")
    ax.set_ylabel("activity index (world = 100)")
    ax.set_title("Institutional activity")
    fig.tight_layout()
    _save(fig, path)


def _fig_prevalence(rows: list[dict[str, str]], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 6))
    sdgs = [int(row["sdg"]) for row in rows]
    counts = [int(row["count"]) for row in rows]
    positions = list(range(len(sdgs)))
    ax.barh(positions, counts, color="#2b6cb0")
    ax.set_yticks(positions)
    ax.set_yticklabels([f"SDG {s}" for s in sdgs])
    ax.invert_yaxis()
    ax.set_xlabel("publications")
    ax.set_title("SDG prevalence")
    fig.tight_layout()
    _save(fig, path)


def _fig_bursts(rows: list[dict[str, str]], path: Path, limit: int = 15) -> None:
    rows = rows[:limit]
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.4 * len(rows) + 1.2)))
    for i, row in enumerate(rows):
        begin, end = int(row["begin"]), int(row["end"])
        ax.broken_barh([(begin - 0.4, end - begin + 0.8)], (i - 0.3, 0.6),
                       facecolors="#c05621")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([row["term"] for row in rows])
    ax.invert_yaxis()
    ax.set_xlabel("year")
    ax.set_title("Bursting terms")
    fig.tight_layout()
    _save(fig, path)


def build_report(config: PipelineConfig) -> dict:
    """Write summary.json and the figures; returns the manifest payload."""
    bundle = Bundle(config.output_dir)
    lo, hi = config.year_range
    full_period = period_label((lo, hi))

    delineation = read_json(bundle.path("delineation", "report.json"))
    growth = read_json(bundle.path("indicators", "growth.json"))
    yearly = [(int(r["year"]), int(r["count"]))
              for r in _read_rows(bundle.path("indicators", "yearly_counts.csv"))]
    actor_rows = _read_rows(bundle.path("indicators", "actors_institution.csv"))
    full_actor_rows = [r for r in actor_rows if r["period"] == full_period]
    bursts = _read_rows(bundle.path("burst", "bursts.csv"))
    classification = read_json(bundle.path("sdg", "classification.json"))
    prevalence_rows = _read_rows(bundle.path("sdg", "prevalence.csv"))
    cocit_rows = _read_rows(bundle.path("interlink", "cocitation_matrix.csv"))
    sdg_cluster_rows = _read_rows(bundle.path("interlink", "sdg_clusters.csv"))
    manifest_stages = read_json(bundle.manifest).get("stages", {})

    strongest = None
    for i, row in enumerate(cocit_rows):  # row i is SDG i+1
        s = i + 1
        for t in SDG_IDS:
            if t <= s:
                continue
            weight = int(row[str(t)])
            if weight > 0 and (strongest is None or weight > strongest["weight"]):
                strongest = {"sdg_i": s, "sdg_j": t, "weight": weight}

    summary = {
        "delineation": delineation["cardinalities"],
        "growth": {k: v for k, v in growth.items() if k != "schema_version"},
        "yearly_counts": {str(y): c for y, c in yearly},
        "top_institutions": [
            {
                "actor_id": r["actor_id"],
                "topic_count": int(r["topic_count"]),
                "topic_share_pct": r["topic_share_pct"],
                "activity_index_display": r["activity_index_display"] or None,
            }
            for r in full_actor_rows[:10]
        ],
        "network": manifest_stages.get("cooccur", {}),
        "top_bursts": [
            {"term": r["term"], "strength": r["strength"],
             "begin": int(r["begin"]), "end": int(r["end"])}
            for r in bursts[:10]
        ],
        "classification": {k: v for k, v in classification.items()
                           if k != "schema_version"},
        "prevalence": [
            {"sdg": int(r["sdg"]), "count": int(r["count"]),
             "pct_of_classified": r["pct_of_classified"] or None}
            for r in prevalence_rows
        ],
        "interlink": {
            "cocitation_total": manifest_stages.get("interlink", {})
            .get("cocitation_total"),
            "coclassification_total": manifest_stages.get("interlink", {})
            .get("coclassification_total"),
            "strongest_pair": strongest,
            "sdg_clusters": {r["sdg"]: int(r["cluster"])
                             for r in sdg_cluster_rows},
        },
    }
    write_json(bundle.summary, summary)

    figures = bundle.ensure("figures")
    _fig_yearly(yearly, figures / "yearly_output.png")
    _fig_actors(full_actor_rows, figures / "actor_activity.png")
    _fig_prevalence(prevalence_rows, figures / "sdg_prevalence.png")
    _fig_bursts(bursts, figures / "burst_timeline.png")

    return {"figures": sorted(p.name for p in figures.glob("*.png")),
            "summary": "summary.json"}
