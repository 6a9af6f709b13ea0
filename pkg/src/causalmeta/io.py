"""CSV and JSON (de)serialization of datasets.

CSV layout: header ``label,n11,n10,n01,n00`` and one row per study. The JSON
mirror is ``{"name": ..., "studies": [{"label": ..., "n11": ..., ...}, ...]}``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ParseError
from .model import MetaDataset, StudyTable, validate_dataset

FIELDS = ("label", "n11", "n10", "n01", "n00")


def _parse_count(text: str, name: str, path: str, line: int) -> int:
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        raise ParseError(f"{name}={text!r} is not an integer count", path, line) from None


def parse_csv(text: str, name: str = "", path: str = "") -> MetaDataset:
    reader = csv.reader(io.StringIO(text))
    rows = [(i, r) for i, r in enumerate(reader, start=1) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("file is empty", path)
    line, header = rows[0]
    header = [h.strip().lstrip("\ufeff") for h in header]
    if tuple(header) != FIELDS:
        raise ParseError(f"expected header {','.join(FIELDS)}, got {','.join(header)}", path, line)
    studies = []
    for line, row in rows[1:]:
        if len(row) != len(FIELDS):
            raise ParseError(f"expected {len(FIELDS)} fields, got {len(row)}", path, line)
        label = row[0].strip()
        if not label:
            raise ParseError("empty study label", path, line)
        counts = [_parse_count(v, f, path, line) for f, v in zip(FIELDS[1:], row[1:])]
        studies.append(StudyTable(label, *counts))
    return MetaDataset(tuple(studies), name)


def format_csv(ds: MetaDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for s in ds.studies:
        w.writerow([s.label, s.n11, s.n10, s.n01, s.n00])
    return buf.getvalue()


def dataset_to_dict(ds: MetaDataset) -> dict:
    return {
        "name": ds.name,
        "studies": [{f: getattr(s, f) for f in FIELDS} for s in ds.studies],
    }


def dataset_from_dict(obj: dict, path: str = "") -> MetaDataset:
    if not isinstance(obj, dict) or not isinstance(obj.get("studies"), list):
        raise ParseError("expected an object with a 'studies' list", path)
    studies = []
    for i, rec in enumerate(obj["studies"]):
        if not isinstance(rec, dict) or set(rec) != set(FIELDS):
            raise ParseError(f"study #{i + 1} must have exactly the fields {', '.join(FIELDS)}", path)
        for f in FIELDS[1:]:
            v = rec[f]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ParseError(f"study #{i + 1}: {f}={v!r} is not an integer count", path)
        studies.append(StudyTable(str(rec["label"]), *(rec[f] for f in FIELDS[1:])))
    return MetaDataset(tuple(studies), str(obj.get("name", "")))


def format_json(ds: MetaDataset) -> str:
    return json.dumps(dataset_to_dict(ds), indent=2, ensure_ascii=False) + "\n"


def parse_json(text: str, path: str = "") -> MetaDataset:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    return dataset_from_dict(obj, path)


def load_dataset(path: str | Path, validate: bool = True) -> MetaDataset:
    """Read a ``.csv`` or ``.json`` dataset; the dataset name is the file stem."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 ({exc.reason} at byte {exc.start})", str(p)) from None
    if p.suffix.lower() == ".json":
        ds = parse_json(text, str(p))
        if not ds.name:
            ds = MetaDataset(ds.studies, p.stem)
    else:
        ds = parse_csv(text, p.stem, str(p))
    return validate_dataset(ds) if validate else ds


def save_dataset(ds: MetaDataset, path: str | Path) -> None:
    p = Path(path)
    text = format_json(ds) if p.suffix.lower() == ".json" else format_csv(ds)
    p.write_text(text, encoding="utf-8")
