import json

import pytest
from hypothesis import given, strategies as st

from causalmeta import MetaDataset, load_dataset, save_dataset
from causalmeta.errors import EmptyArm, ParseError
from causalmeta.io import format_csv, format_json, parse_csv, parse_json

labels = st.text(alphabet=st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=8)
count = st.integers(0, 10_000)


@st.composite
def datasets(draw):
    k = draw(st.integers(1, 6))
    labs = draw(st.lists(labels, min_size=k, max_size=k, unique=True))
    rows = [draw(st.tuples(count, count, count, count)) for _ in range(k)]
    return MetaDataset.from_counts(rows, name=draw(labels), labels=labs)


@given(datasets())
def test_csv_round_trip(ds):
    back = parse_csv(format_csv(ds), name=ds.name)
    assert back == ds


@given(datasets())
def test_json_round_trip(ds):
    assert parse_json(format_json(ds)) == ds


def test_load_sets_name_from_stem(tmp_path, two_study):
    p = tmp_path / "trial_set.csv"
    save_dataset(two_study, p)
    ds = load_dataset(p)
    assert ds.name == "trial_set"
    assert ds.studies == two_study.studies


def test_load_json(tmp_path, two_study):
    p = tmp_path / "x.json"
    save_dataset(MetaDataset(two_study.studies), p)
    assert load_dataset(p).name == "x"


def test_bom_and_blank_lines_tolerated():
    ds = parse_csv("\ufefflabel,n11,n10,n01,n00\n\nA,1,2,3,4\n\n")
    assert ds.k == 1


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("", None, "empty"),
        ("label,a,b,c,d\n", 1, "expected header"),
        ("label,n11,n10,n01,n00\nA,1,2,3\n", 2, "expected 5 fields"),
        ("label,n11,n10,n01,n00\nA,1,2,3,4\nB,1,x,3,4\n", 3, "n10='x'"),
        ("label,n11,n10,n01,n00\nA,1,2.5,3,4\n", 2, "not an integer"),
        ("label,n11,n10,n01,n00\n,1,2,3,4\n", 2, "empty study label"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ParseError) as info:
        parse_csv(text, path="data.csv")
    assert info.value.line == line
    assert fragment in str(info.value)
    if line is not None:
        assert str(info.value).startswith(f"data.csv:{line}:")


@pytest.mark.parametrize(
    "obj",
    [[], {"studies": [{"label": "A", "n11": 1}]}, {"studies": [{"label": "A", "n11": 1.0, "n10": 1, "n01": 1, "n00": 1}]}],
)
def test_json_shape_errors(obj):
    with pytest.raises(ParseError):
        parse_json(json.dumps(obj))


def test_malformed_json_reports_line():
    with pytest.raises(ParseError) as info:
        parse_json('{\n  "studies": [\n', path="d.json")
    assert info.value.line is not None


def test_load_validates(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("label,n11,n10,n01,n00\nA,0,0,1,1\n")
    with pytest.raises(EmptyArm):
        load_dataset(p)
    assert load_dataset(p, validate=False).k == 1
