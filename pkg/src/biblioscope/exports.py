"""Deterministic serialization shared by every stage.

Report bundles must be byte-identical across runs and worker counts, so
nothing here may depend on dict iteration accidents, locale, line-ending
defaults, or platform float printing. Ratios are written with 4 decimals
and percentages with 2, both half-up; callers format floats explicitly
because a raw float in a CSV row is almost always an oversight.
"""

from __future__ import annotations

import csv
import hashlib
import json
import xml.etree.ElementTree as ET
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

SCHEMA_VERSION = 1


def _quantize(x: float, places: int) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    d = Decimal(repr(float(x))).quantize(quantum, rounding=ROUND_HALF_UP)
    if d == 0:
        d = abs(d)  # never print "-0.00"
    return d


def fmt(x: float | None, places: int) -> str:
    """Fixed-decimal half-up string; None becomes the empty cell."""
    if x is None:
        return ""
    return str(_quantize(x, places))


def fmt_ratio(x: float | None) -> str:
    return fmt(x, 4)


def fmt_pct(x: float | None) -> str:
    return fmt(x, 2)


def round_half_up(x: float | None, places: int) -> float | None:
    """Half-up rounding that returns a float (for JSON payloads)."""
    if x is None:
        return None
    return float(_quantize(x, places))


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """CSV with LF line endings; cells must be str/int/None, never float."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            out = []
            for cell in row:
                if cell is None:
                    out.append("")
                elif isinstance(cell, float):
                    raise ValueError(
                        f"{path}: raw float {cell!r} in CSV row; format it first"
                    )
                else:
                    out.append(str(cell))
            writer.writerow(out)


def write_json(path: str | Path, obj: dict) -> None:
    """Sorted-key JSON document with a schema_version field."""
    if "schema_version" not in obj:
        obj = {"schema_version": SCHEMA_VERSION, **obj}
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text + "\n")


def read_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _attr_type(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "double"
    return "string"


def _attr_text(value, attr_type: str) -> str:
    if attr_type == "double":
        return fmt_ratio(value)
    if attr_type == "boolean":
        return "true" if value else "false"
    return str(value)


def write_graphml(path: str | Path, nodes: list[tuple], edges: list[tuple],
                  directed: bool = False) -> None:
    """Minimal GraphML writer with stable output.

    nodes: (id, {attr: value}); edges: (source, target, {attr: value}).
    Attribute keys are declared sorted by name; a None value omits that
    data element. Caller supplies nodes/edges already in canonical order.
    """
    root = ET.Element("graphml", {"xmlns": "http://graphml.graphdrawing.org/xmlns"})
    keys: dict[tuple[str, str], tuple[str, str]] = {}
    for domain, attr_maps in (("node", [a for _, a in nodes]),
                              ("edge", [a for _, _, a in edges])):
        names = sorted({k for attrs in attr_maps for k in attrs})
        for name in names:
            sample = next(
                (attrs[name] for attrs in attr_maps if attrs.get(name) is not None),
                "",
            )
            attr_type = _attr_type(sample)
            key_id = f"{domain[0]}_{name}"
            ET.SubElement(root, "key", {"id": key_id, "for": domain,
                                        "attr.name": name, "attr.type": attr_type})
            keys[(domain, name)] = (key_id, attr_type)
    graph = ET.SubElement(
        root, "graph", {"edgedefault": "directed" if directed else "undirected"}
    )
    for node_id, attrs in nodes:
        el = ET.SubElement(graph, "node", {"id": str(node_id)})
        for name in sorted(attrs):
            if attrs[name] is None:
                continue
            key_id, attr_type = keys[("node", name)]
            ET.SubElement(el, "data", {"key": key_id}).text = \
                _attr_text(attrs[name], attr_type)
    for source, target, attrs in edges:
        el = ET.SubElement(graph, "edge",
                           {"source": str(source), "target": str(target)})
        for name in sorted(attrs):
            if attrs[name] is None:
                continue
            key_id, attr_type = keys[("edge", name)]
            ET.SubElement(el, "data", {"key": key_id}).text = \
                _attr_text(attrs[name], attr_type)
    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write(body)
        fh.write("\n")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
