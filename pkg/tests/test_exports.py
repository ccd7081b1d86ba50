import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biblioscope.exports import (fmt, fmt_pct, fmt_ratio, read_json,
                                 round_half_up, sha256_file, sha256_text,
                                 write_csv, write_graphml, write_json)


class TestFormatting:
    def test_half_up_at_the_boundary(self):
        assert fmt_pct(0.005) == "0.01"
        assert fmt_pct(2.675) == "2.68"  # would be 2.67 under banker's rounding
        assert fmt_ratio(0.00005) == "0.0001"

    def test_negative_half_up_rounds_away_from_zero(self):
        assert fmt_pct(-0.005) == "-0.01"

    def test_negative_zero_normalized(self):
        assert fmt_pct(-0.0001) == "0.00"
        assert fmt_pct(-0.0) == "0.00"

    def test_none_is_empty_cell(self):
        assert fmt_pct(None) == ""
        assert fmt_ratio(None) == ""

    def test_fixed_width_padding(self):
        assert fmt_pct(50.0) == "50.00"
        assert fmt_ratio(1.0) == "1.0000"

    def test_decimal_uses_repr_not_binary_expansion(self):
        # 2.675 as a double is 2.67499999...; repr-based quantization must
        # still treat it as the literal the caller wrote
        assert fmt(2.675, 2) == "2.68"
        assert fmt(1.0049999999, 2) == "1.00"

    def test_round_half_up_float_variant(self):
        assert round_half_up(2.675, 2) == 2.68
        assert round_half_up(None, 2) is None

    @given(x=st.floats(min_value=-1e6, max_value=1e6,
                       allow_nan=False, allow_infinity=False))
    @settings(max_examples=200, deadline=None)
    def test_fmt_output_shape(self, x):
        text = fmt_pct(x)
        sign, _, rest = text.partition("-")
        body = rest if not sign else text
        whole, dot, frac = (rest or text).partition(".")
        assert dot == "." and len(frac) == 2
        assert abs(float(text) - x) <= 0.005 + 1e-9


class TestWriteCsv:
    def test_header_lf_and_empty_cells(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a", "b"], [(1, None), ("x", "y")])
        assert path.read_bytes() == b"a,b\n1,\nx,y\n"

    def test_raw_float_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="format it first"):
            write_csv(tmp_path / "t.csv", ["a"], [(0.5,)])

    def test_quoting_round_trip(self, tmp_path):
        import csv as csv_mod
        path = tmp_path / "t.csv"
        write_csv(path, ["a", "b"], [('with,comma', 'with "quote"')])
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv_mod.reader(fh))
        assert rows == [["a", "b"], ["with,comma", 'with "quote"']]


class TestWriteJson:
    def test_schema_version_injected_and_keys_sorted(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(path, {"zebra": 1, "alpha": 2})
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n") and not text.endswith("\n\n")
        obj = json.loads(text)
        assert obj["schema_version"] == 1
        assert list(obj) == sorted(obj)
        assert read_json(path) == obj

    def test_existing_schema_version_kept(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(path, {"schema_version": 9, "x": 1})
        assert read_json(path)["schema_version"] == 9

    def test_unicode_not_escaped(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(path, {"name": "café"})
        assert "café" in path.read_text(encoding="utf-8")


class TestWriteGraphml:
    def publish(self, tmp_path, directed=False):
        path = tmp_path / "g.graphml"
        write_graphml(
            path,
            nodes=[("n1", {"size": 3, "avg_year": 2010.5}),
                   ("n2", {"size": 1, "avg_year": None})],
            edges=[("n1", "n2", {"weight": 2.5})],
            directed=directed,
        )
        return path

    def test_parses_and_declares_typed_keys(self, tmp_path):
        root = ET.parse(self.publish(tmp_path)).getroot()
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        keys = {el.get("id"): el for el in root.findall(f"{ns}key")}
        assert keys["n_size"].get("attr.type") == "int"
        assert keys["n_avg_year"].get("attr.type") == "double"
        assert keys["e_weight"].get("for") == "edge"

    def test_none_attribute_omitted(self, tmp_path):
        root = ET.parse(self.publish(tmp_path)).getroot()
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        nodes = root.find(f"{ns}graph").findall(f"{ns}node")
        n2 = next(n for n in nodes if n.get("id") == "n2")
        assert [d.get("key") for d in n2.findall(f"{ns}data")] == ["n_size"]

    def test_doubles_use_ratio_formatting(self, tmp_path):
        text = self.publish(tmp_path).read_text(encoding="utf-8")
        assert ">2010.5000<" in text
        assert ">2.5000<" in text

    def test_edgedefault(self, tmp_path):
        root = ET.parse(self.publish(tmp_path, directed=True)).getroot()
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        assert root.find(f"{ns}graph").get("edgedefault") == "directed"

    def test_byte_stable_across_calls(self, tmp_path):
        first = self.publish(tmp_path).read_bytes()
        assert self.publish(tmp_path).read_bytes() == first


class TestHashes:
    def test_file_and_text_agree(self, tmp_path):
        path = tmp_path / "x"
        path.write_bytes("payload ünïcode".encode("utf-8"))
        assert sha256_file(path) == sha256_text("payload ünïcode")

    def test_known_digest(self, tmp_path):
        assert sha256_text("") == ("e3b0c44298fc1c149afbf4c8996fb924"
                                   "27ae41e4649b934ca495991b7852b855")
