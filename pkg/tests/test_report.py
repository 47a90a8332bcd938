import xml.etree.ElementTree as ET

import numpy as np
import pytest

from sphlab.experiments import StudyResult, StudyRow, QUANTITIES
from sphlab.report import emit_loglog_plot, emit_slope_table, study_plots

NS = "{http://www.w3.org/2000/svg}"


def _points(el):
    return np.array([[float(v) for v in p.split(",")] for p in el.get("points").split()])


def _fake(scheme, field="f1", dist="regular", slope=-1.0, fallbacks=0, ns=(625, 2500, 10000, 40000)):
    res = StudyResult(scheme, field, dist, "" if dist == "regular" else "42")
    for N in ns:
        val = {q: 0.5 * N ** slope for q in QUANTITIES}
        res.rows.append(StudyRow(N=N, h=N ** (-1 / 6), n_interior=2.8 * N ** 0.675, rmse=val,
                                 std={q: 0.1 * (2.8 * N ** 0.675) ** -1 for q in QUANTITIES},
                                 interior_rmse=val, fallbacks=fallbacks))
    return res


def test_two_parallel_lines(tmp_path):
    path = emit_loglog_plot({"a": ([10, 100], [1, 0.1])}, [-1.0], tmp_path / "p.svg")
    root = ET.parse(path).getroot()
    lines = root.findall(f"{NS}polyline")
    series = [l for l in lines if l.get("class") == "series"]
    ref = [l for l in lines if l.get("class") == "reference"]
    assert len(series) == 1 and len(ref) == 1
    s, r = _points(series[0]), _points(ref[0])
    slope_s = (s[-1, 1] - s[0, 1]) / (s[-1, 0] - s[0, 0])
    slope_r = (r[-1, 1] - r[0, 1]) / (r[-1, 0] - r[0, 0])
    assert slope_s == pytest.approx(slope_r, rel=1e-3)
    # anchored at the first data point
    assert np.allclose(r[0], s[0], atol=0.01)
    assert len(root.findall(f"{NS}circle")) == 2


def test_self_contained(tmp_path):
    path = emit_loglog_plot({"a": ([1, 2, 4], [3, 2, 1])}, [-1.0, -2.0], tmp_path / "p.svg",
                            title="x < y & z")
    text = path.read_text()
    assert "href" not in text and "<image" not in text
    ET.fromstring(text)
    assert "(-0.79)" in text  # fitted slope in the legend


def test_callable_reference(tmp_path):
    path = emit_loglog_plot({"a": ([100, 1000], [1e-2, 1e-3])},
                            [("n^-1 log n", lambda x: np.log(x) / x)], tmp_path / "p.svg")
    assert "n^-1 log n" in path.read_text()


def test_rejects_non_positive(tmp_path):
    with pytest.raises(ValueError, match="bad one"):
        emit_loglog_plot({"good": ([1, 2], [1, 2]), "bad one": ([1, 2], [1, 0])}, [], tmp_path / "p.svg")
    with pytest.raises(ValueError):
        emit_loglog_plot({}, [], tmp_path / "p.svg")


def test_full_table_shape():
    names = ["sph", "cspm", "fpm", "msph", "sphn", "cspmn", "fpmn"]
    results = [_fake(s, f) for s in reversed(names) for f in ("f1", "f2")]
    text, csv = emit_slope_table(results)
    lines = text.splitlines()
    assert lines[1].split() == ["quantity", "SPH", "CSPM", "FPM", "MSPH", "SPHn", "CSPMn", "FPMn"]
    row = next(l for l in lines if l.startswith("f1,xx"))
    assert row.split()[1:] == ["-----"] * 3 + ["-1.00"] + ["-----"] * 3
    assert csv.splitlines()[0] == "scheme,field,distribution,quantity,slope,intercept,r2,points"


def test_single_column_and_footnote():
    text, _ = emit_slope_table([_fake("fpm", fallbacks=30)])
    assert text.splitlines()[1].split() == ["quantity", "FPM"]
    assert "Degraded rows" in text and "N=625 fallbacks=30" in text


def test_distributions_in_separate_blocks():
    text, _ = emit_slope_table([_fake("fpm"), _fake("fpm", dist="irregular", slope=-0.5)])
    assert "(regular distribution)" in text and "(irregular distribution)" in text


def test_study_plots(tmp_path):
    results = [_fake("fpm"), _fake("fpmn"), _fake("msph")]
    paths = study_plots(results, tmp_path)
    names = {p.name for p in paths}
    assert "rmse_regular_f1_f.svg" in names and "rmse_regular_f1_fxx.svg" in names
    assert "std_regular_f1.svg" in names
    for p in paths:
        ET.parse(p)
