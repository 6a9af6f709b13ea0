import re

import pytest

from causalmeta import MetaDataset, analyze
from causalmeta.forest import forest_rows, render_svg, render_text

NULL_DATA = MetaDataset.from_counts([(5, 15, 5, 15), (10, 30, 10, 30)], name="null")


@pytest.mark.parametrize("model, pooled", [("all", 3), ("re", 1), ("causal", 1)])
def test_text_row_count(two_study, model, pooled):
    text = render_text(analyze(two_study, "rr", model))
    rows = [l for l in text.splitlines() if l.startswith(("S1", "S2", "Fixed", "Random", "Causal"))]
    assert len(rows) == 2 + pooled
    assert sum("o" in l[-41:] for l in rows[:2]) == 2


def test_text_marks_pooled_rows(two_study):
    text = render_text(analyze(two_study, "rd"))
    for line in text.splitlines():
        if line.startswith(("Fixed", "Random", "Causal")):
            assert "#" in line and "<" in line


def test_svg_is_deterministic(three_study):
    a = render_svg(analyze(three_study, "or"))
    b = render_svg(analyze(three_study, "or"))
    assert a == b
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert 'width="760"' in a


def test_svg_counts(three_study):
    svg = render_svg(analyze(three_study, "rr"))
    assert svg.count('class="study"') == 3
    assert svg.count('class="pooled"') == 3


@pytest.mark.parametrize("measure", ["rd", "rr", "or"])
def test_null_effect_markers_on_null_line(measure):
    svg = render_svg(analyze(NULL_DATA, measure))
    null_x = re.search(r'<line class="null" x1="([\d.]+)"', svg).group(1)
    xs = re.findall(r'class="(?:study|pooled)"[^>]*data-x="([\d.]+)"', svg)
    assert len(xs) == 5
    assert set(xs) == {null_x}


def test_null_effect_text_markers():
    text = render_text(analyze(NULL_DATA, "rr"))
    for line in text.splitlines()[1:]:
        if line.startswith("S"):
            plot = line[-41:]
            assert "|" not in plot and "o" in plot


def test_rows_follow_studies(three_study):
    rows = forest_rows(analyze(three_study, "rd", "fe"))
    assert [r.label for r in rows] == ["S1", "S2", "S3", "Fixed effects"]
    assert [r.pooled for r in rows] == [False, False, False, True]


def test_title_is_escaped(two_study):
    assert "a &lt;b&gt;" in render_svg(analyze(two_study, "rd"), title="a <b>")
