import csv
import json
import shutil
from pathlib import Path

import pytest

from biblioscope.cli import build_parser, main
from biblioscope.errors import (ConfigError, InputError, MissingStageError,
                                QueryParseError, StageError)
from biblioscope.pipeline import (STAGES, Bundle, config_digest, load_config,
                                  run_pipeline, run_stage)

from conftest import DATA

CONFIG = DATA / "config.json"


@pytest.fixture(scope="module")
def bundle_root(tmp_path_factory):
    """One full pipeline run over the committed fixture, shared read-only."""
    root = tmp_path_factory.mktemp("bundle")
    config = load_config(CONFIG, {"output_dir": str(root)})
    run_pipeline(config)
    return root


def manifest_of(root: Path) -> dict:
    return json.loads((root / "manifest.json").read_text(encoding="utf-8"))


class TestLoadConfig:
    def test_fixture_config(self):
        config = load_config(CONFIG)
        assert config.corpus_path == DATA / "synthetic_corpus.jsonl"
        assert config.output_dir == DATA / "out"
        assert config.year_range == (2000, 2017)
        assert config.org_types == frozenset({"HEI", "RC"})
        assert config.min_occurrence == 5
        assert config.cluster_min_size == 2  # nested min_cluster_size
        assert config.cluster_restarts == 10
        assert config.burst_s == 2.0
        assert config.actor_min_count == 2
        assert config.classify_scan_text is False

    def test_echo_carries_raw_paths_and_no_output_dir(self):
        config = load_config(CONFIG)
        assert config.echo["corpus_path"] == "synthetic_corpus.jsonl"
        assert "output_dir" not in config.echo
        assert config.echo["org_types"] == ["HEI", "RC"]
        assert config.echo["cluster"]["min_cluster_size"] == 2

    def test_digest_ignores_output_dir(self, tmp_path):
        one = load_config(CONFIG, {"output_dir": str(tmp_path / "a")})
        two = load_config(CONFIG, {"output_dir": str(tmp_path / "b")})
        assert config_digest(one.echo) == config_digest(two.echo)

    def test_override_wins_and_lands_in_echo(self):
        config = load_config(CONFIG, {"burst_s": 3.0, "min_occurrence": 9})
        assert config.burst_s == 3.0
        assert config.min_occurrence == 9
        assert config.echo["burst"]["s"] == 3.0

    def test_none_overrides_ignored(self):
        config = load_config(CONFIG, {"burst_s": None})
        assert config.burst_s == 2.0

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError, match="unknown override"):
            load_config(CONFIG, {"block_len": 3})

    def write(self, tmp_path, data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def minimal(self, tmp_path, **extra):
        data = {
            "corpus_path": str(DATA / "synthetic_corpus.jsonl"),
            "query_text": 'TS="sustainable development goal*"',
            "output_dir": "out",
        }
        data.update(extra)
        return self.write(tmp_path, data)

    def test_defaults_on_minimal_config(self, tmp_path):
        config = load_config(self.minimal(tmp_path))
        assert config.min_occurrence == 50
        assert config.cluster_resolution == 1.0
        assert config.burst_top == 60
        assert config.block_len == 6
        assert config.glossary_path is None
        assert config.org_types == frozenset({"HEI", "RC"})

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        config = load_config(self.minimal(tmp_path, corpus_path="c.jsonl"))
        assert config.corpus_path == tmp_path / "c.jsonl"
        assert config.output_dir == tmp_path / "out"

    def test_relative_override_resolves_against_cwd(self, tmp_path, monkeypatch):
        path = self.minimal(tmp_path)
        workdir = tmp_path / "elsewhere"
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        config = load_config(path, {"output_dir": "out"})
        assert config.output_dir == workdir / "out"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "none.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{broken", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("[1]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)

    def test_missing_required_key(self, tmp_path):
        path = self.write(tmp_path, {"corpus_path": "c.jsonl", "output_dir": "o"})
        with pytest.raises(ConfigError, match="query_text"):
            load_config(path)

    def test_unknown_keys_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config(self.minimal(tmp_path, queries="x"))

    def test_unknown_nested_keys_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown cluster keys"):
            load_config(self.minimal(tmp_path, cluster={"gamma": 1.0}))

    def test_bad_query_is_a_config_error(self, tmp_path):
        path = self.minimal(tmp_path, query_text='TS="unclosed')
        with pytest.raises(QueryParseError):
            load_config(path)

    @pytest.mark.parametrize("patch,fragment", [
        ({"year_range": [2017, 2000]}, "exceeds"),
        ({"year_range": [2000]}, "year_range"),
        ({"year_range": ["2000", 2017]}, "year_range"),
        ({"org_types": []}, "org_types"),
        ({"org_types": ["LAB"]}, "unknown org_types"),
        ({"corpus_format": "xml"}, "corpus_format"),
        ({"expansion_layers": 0}, ">= 1"),
        ({"min_occurrence": True}, "must be a number"),
        ({"min_occurrence": 2.5}, "must be an integer"),
        ({"cluster": {"resolution": 0.0}}, "> 0"),
        ({"cluster": {"restarts": 0}}, ">= 1"),
        ({"burst": {"s": 1.0}}, "> 1"),
        ({"burst": {"gamma": -0.5}}, ">= 0"),
        ({"classify_scan_text": "yes"}, "boolean"),
        ({"ai_display_multiplier": 0}, "> 0"),
    ])
    def test_invalid_values_rejected(self, tmp_path, patch, fragment):
        with pytest.raises(ConfigError, match=fragment):
            load_config(self.minimal(tmp_path, **patch))

    def test_org_types_any(self, tmp_path):
        config = load_config(self.minimal(tmp_path, org_types="any"))
        assert config.org_types == "any"
        assert config.echo["org_types"] == "any"


class TestPipelineRun:
    def test_all_stages_recorded(self, bundle_root):
        stages = manifest_of(bundle_root)["stages"]
        assert sorted(stages) == sorted(STAGES)

    def test_frozen_stage_payloads(self, bundle_root):
        stages = manifest_of(bundle_root)["stages"]
        assert stages["ingest"] == {"loaded": 200, "skipped": 0}
        assert stages["delineate"] == {
            "core": 30, "cited": 52, "citing": 25,
            "expanded": 100, "final": 81, "phantoms": 33,
        }
        assert stages["cooccur"] == {
            "items": 26, "links": 222, "link_strength": 421,
            "clusters": 3, "modularity": 0.1336,
        }
        assert stages["burst"] == {"intervals": 4}
        assert stages["classify"] == {
            "total": 81, "classified": 79, "institution_total": 28,
            "excluded_no_affiliation": 0,
        }
        assert stages["interlink"] == {
            "cocitation_total": 629, "coclassification_total": 257,
            "sdg_clusters": 3,
        }

    def test_growth_numbers(self, bundle_root):
        growth = json.loads(
            (bundle_root / "indicators" / "growth.json").read_text())
        assert growth["start_year"] == 2000 and growth["end_year"] == 2017
        assert growth["start_count"] == 5 and growth["end_count"] == 14
        assert growth["growth_pct"] == 180.0
        assert growth["cagr_pct"] == 6.24

    EXPECTED_FILES = [
        "manifest.json",
        "summary.json",
        "corpus/corpus.jsonl",
        "corpus/load_report.json",
        "delineation/report.json",
        "delineation/provenance.csv",
        "delineation/final_ids.csv",
        "indicators/yearly_counts.csv",
        "indicators/growth.json",
        "indicators/actors_institution.csv",
        "indicators/actors_institution_raw.csv",
        "indicators/actors_country.csv",
        "indicators/actors_country_raw.csv",
        "indicators/actors_continent.csv",
        "indicators/actors_continent_raw.csv",
        "cooccur/network_edges.csv",
        "cooccur/network.graphml",
        "cooccur/clusters.csv",
        "burst/bursts.csv",
        "sdg/assignments.csv",
        "sdg/prevalence.csv",
        "sdg/classification.json",
        "sdg/continent_counts.csv",
        "sdg/continent_contribution.csv",
        "sdg/continent_profile.csv",
        "sdg/institutions_per_sdg.csv",
        "interlink/cocitation_matrix.csv",
        "interlink/coclassification_matrix.csv",
        "interlink/cocitation.graphml",
        "interlink/sdg_avg_year.csv",
        "interlink/sdg_clusters.csv",
        "figures/yearly_output.png",
        "figures/actor_activity.png",
        "figures/sdg_prevalence.png",
        "figures/burst_timeline.png",
    ]

    def test_bundle_layout_complete(self, bundle_root):
        for rel in self.EXPECTED_FILES:
            assert (bundle_root / rel).is_file(), f"missing {rel}"

    def test_every_csv_has_a_header(self, bundle_root):
        for path in sorted(bundle_root.rglob("*.csv")):
            with open(path, newline="", encoding="utf-8") as fh:
                header = next(csv.reader(fh), None)
            assert header, f"{path} is empty"
            assert any(cell for cell in header), f"{path} has a blank header"

    def test_every_json_carries_schema_version(self, bundle_root):
        for path in sorted(bundle_root.rglob("*.json")):
            obj = json.loads(path.read_text(encoding="utf-8"))
            assert obj.get("schema_version") == 1, path

    def test_matrix_csvs_are_17_by_17_with_sdg_header(self, bundle_root):
        for name in ("cocitation_matrix.csv", "coclassification_matrix.csv"):
            path = bundle_root / "interlink" / name
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
            assert rows[0] == [str(s) for s in range(1, 18)]
            assert len(rows) == 18
            assert all(len(row) == 17 for row in rows)
            cells = [[int(x) for x in row] for row in rows[1:]]
            for i in range(17):
                assert cells[i][i] == 0
                for j in range(17):
                    assert cells[i][j] == cells[j][i]

    def test_burst_table(self, bundle_root):
        with open(bundle_root / "burst" / "bursts.csv", newline="",
                  encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["term"] for r in rows] == [
            "microfinance", "water", "mobile technology", "climate change"]
        assert rows[0]["strength"] == "5.4793"
        assert (rows[0]["begin"], rows[0]["end"]) == ("2005", "2007")

    def test_summary_references_real_figures(self, bundle_root):
        summary = json.loads((bundle_root / "summary.json").read_text())
        stages = manifest_of(bundle_root)["stages"]
        assert stages["report"]["figures"] == sorted(stages["report"]["figures"])
        assert summary["interlink"]["strongest_pair"] == {
            "sdg_i": 1, "sdg_j": 4, "weight": 29}

    def test_rerunning_a_stage_is_idempotent(self, bundle_root):
        config = load_config(CONFIG, {"output_dir": str(bundle_root)})
        before = (bundle_root / "delineation" / "provenance.csv").read_bytes()
        manifest_before = (bundle_root / "manifest.json").read_bytes()
        run_stage("delineate", config)
        assert (bundle_root / "delineation" / "provenance.csv").read_bytes() \
            == before
        assert (bundle_root / "manifest.json").read_bytes() == manifest_before


class TestStageGuards:
    def test_downstream_stage_needs_ingest(self, tmp_path):
        config = load_config(CONFIG, {"output_dir": str(tmp_path / "fresh")})
        with pytest.raises(MissingStageError) as err:
            run_stage("cooccur", config)
        assert err.value.required == "ingest"
        assert "run the 'ingest' stage first" in str(err.value)

    def test_report_names_first_missing_stage(self, tmp_path):
        config = load_config(CONFIG, {"output_dir": str(tmp_path / "fresh")})
        with pytest.raises(MissingStageError) as err:
            run_stage("report", config)
        assert err.value.required == "ingest"

    def test_unknown_stage_rejected(self, tmp_path):
        config = load_config(CONFIG, {"output_dir": str(tmp_path)})
        with pytest.raises(ConfigError, match="unknown stage"):
            run_stage("summarize", config)

    def test_manifest_guards_against_foreign_config(self, tmp_path, bundle_root):
        other = tmp_path / "other.json"
        data = json.loads(CONFIG.read_text(encoding="utf-8"))
        data["corpus_path"] = str(DATA / "synthetic_corpus.jsonl")
        data["query_text"] = 'TS="millennium development goal*"'
        other.write_text(json.dumps(data), encoding="utf-8")
        config = load_config(other, {"output_dir": str(bundle_root)})
        with pytest.raises(ConfigError, match="different configuration"):
            run_stage("ingest", config)

    def test_missing_corpus_is_an_input_error(self, tmp_path):
        config = load_config(CONFIG, {
            "output_dir": str(tmp_path),
            "corpus_path": str(tmp_path / "absent.jsonl"),
        })
        with pytest.raises(InputError):
            run_stage("ingest", config)

    def test_classify_without_glossary(self, tmp_path):
        path = tmp_path / "config.json"
        data = json.loads(CONFIG.read_text(encoding="utf-8"))
        data["corpus_path"] = str(DATA / "synthetic_corpus.jsonl")
        data["external_totals_path"] = str(DATA / "external_totals.csv")
        del data["glossary_path"]
        path.write_text(json.dumps(data), encoding="utf-8")
        config = load_config(path, {"output_dir": str(tmp_path / "out")})
        run_stage("ingest", config)
        run_stage("delineate", config)
        with pytest.raises(InputError, match="glossary"):
            run_stage("classify", config)
        # the failure leaves earlier stage outputs untouched
        assert (tmp_path / "out" / "delineation" / "report.json").is_file()


class TestCli:
    def test_full_run_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "bundle"
        code = main(["run", "--config", str(CONFIG), "--output-dir", str(out)])
        assert code == 0
        assert (out / "summary.json").is_file()
        assert len(list((out / "figures").glob("*.png"))) == 4

    def test_run_flag_overrides_reach_the_manifest(self, tmp_path):
        out = tmp_path / "bundle"
        code = main(["run", "--config", str(CONFIG), "--output-dir", str(out),
                     "--s", "3.0", "--seed", "7"])
        assert code == 0
        config_echo = manifest_of(out)["config"]
        assert config_echo["burst"]["s"] == 3.0
        assert config_echo["cluster"]["seed"] == 7

    def test_stagewise_equals_run(self, tmp_path, bundle_root):
        out = tmp_path / "staged"
        for stage in STAGES:
            code = main([stage, "--config", str(CONFIG),
                         "--output-dir", str(out)])
            assert code == 0, stage
        staged = sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file())
        reference = sorted(p.relative_to(bundle_root)
                           for p in bundle_root.rglob("*") if p.is_file())
        assert staged == reference
        for rel in staged:
            assert (out / rel).read_bytes() == (bundle_root / rel).read_bytes(), rel

    def test_missing_config_file_is_exit_2(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "none.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_query_flag_is_exit_2(self, tmp_path, capsys):
        code = main(["delineate", "--config", str(CONFIG),
                     "--output-dir", str(tmp_path),
                     "--query", 'TS="unclosed'])
        assert code == 2
        assert "unbalanced quote" in capsys.readouterr().err

    def test_missing_corpus_is_exit_3(self, tmp_path, capsys):
        code = main(["ingest", "--config", str(CONFIG),
                     "--output-dir", str(tmp_path),
                     "--corpus", str(tmp_path / "absent.jsonl")])
        assert code == 3

    def test_stage_out_of_order_is_exit_4(self, tmp_path, capsys):
        code = main(["burst", "--config", str(CONFIG),
                     "--output-dir", str(tmp_path / "fresh")])
        assert code == 4
        assert "ingest" in capsys.readouterr().err

    def test_zero_threads_is_exit_2(self, tmp_path, capsys):
        code = main(["run", "--config", str(CONFIG),
                     "--output-dir", str(tmp_path), "--threads", "0"])
        assert code == 2

    def test_unknown_subcommand_fails_argparse(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["summarize", "--config", "x"])

    def test_every_stage_has_a_subcommand(self):
        parser = build_parser()
        text = parser.format_help()
        for stage in STAGES + ("run",):
            assert stage in text
