import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plm.engine import MetricsLog
from plm.report import read_csv, read_manifest, render_svg, sha256_file, write_csv, write_manifest


def _log(rows):
    log = MetricsLog()
    for it, *errs in rows:
        log.append(it, errs)
    return log


class TestCsv:
    def test_empty_log_is_header_only(self, tmp_path):
        write_csv(MetricsLog(), tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_bytes() == b"iteration,err_g1,err_g2,err_g3\n"

    def test_zero_row_format(self, tmp_path):
        write_csv(_log([(0, 0, 0, 0)]), tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_bytes().split(b"\n")[1] == b"0,0.000000,0.000000,0.000000"

    def test_lf_only(self, tmp_path):
        write_csv(_log([(0, 0.04, 0.5, 1.0), (1, 0, 0.08, 0.96)]), tmp_path / "c.csv")
        assert b"\r" not in (tmp_path / "c.csv").read_bytes()

    # errors are multiples of 1/25, which six decimals represent exactly
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 25), st.integers(0, 25), st.integers(0, 25)), max_size=40))
    def test_roundtrip(self, tmp_path_factory, counts):
        log = _log([(i, a / 25, b / 25, c / 25) for i, (a, b, c) in enumerate(counts)])
        path = tmp_path_factory.mktemp("csv") / "c.csv"
        write_csv(log, path)
        assert read_csv(path).rows == log.rows

    def test_bad_header(self, tmp_path):
        (tmp_path / "c.csv").write_text("it,a,b,c\n")
        with pytest.raises(ValueError):
            read_csv(tmp_path / "c.csv")


def _polylines(svg: str) -> dict[str, list[tuple[float, float]]]:
    out = {}
    for gid, pts in re.findall(r'<polyline id="(group\d)"[^>]*points="([^"]*)"', svg):
        out[gid] = [tuple(map(float, p.split(","))) for p in pts.split()]
    return out


class TestSvg:
    def test_three_polylines(self, tmp_path):
        render_svg(_log([(0, 0, 0, 0)]), tmp_path / "a.svg")
        svg = (tmp_path / "a.svg").read_text()
        assert svg.count("<polyline") == 3
        assert set(_polylines(svg)) == {"group1", "group2", "group3"}

    def test_error_axis_orientation(self, tmp_path):
        render_svg(_log([(0, 0.0, 1.0, 0.5), (10, 0.0, 1.0, 0.5)]), tmp_path / "a.svg")
        lines = _polylines((tmp_path / "a.svg").read_text())
        y0, y1, yh = lines["group1"][0][1], lines["group2"][0][1], lines["group3"][0][1]
        # SVG y grows downward: error 0 sits lowest, error 1 highest
        assert y0 > yh > y1
        assert yh == pytest.approx((y0 + y1) / 2)

    def test_iterations_increase_left_to_right(self, tmp_path):
        render_svg(_log([(0, 0, 0, 0), (5, 0, 0, 0), (9, 0, 0, 0)]), tmp_path / "a.svg")
        xs = [x for x, _ in _polylines((tmp_path / "a.svg").read_text())["group1"]]
        assert xs == sorted(xs) and xs[0] < xs[-1]

    def test_legend_and_axes(self, tmp_path):
        render_svg(_log([(0, 0, 0, 0)]), tmp_path / "a.svg", probs=(0.99, 0.01, 0.0))
        svg = (tmp_path / "a.svg").read_text()
        for label in ("group 1 (p=0.99)", "group 2 (p=0.01)", "group 3 (p=0)", "iteration", "error rate"):
            assert label in svg
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")

    def test_deterministic(self, tmp_path):
        log = _log([(i, i / 100, 0.5, 1 - i / 100) for i in range(50)])
        render_svg(log, tmp_path / "a.svg")
        render_svg(log, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_empty_log_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            render_svg(MetricsLog(), tmp_path / "a.svg")


def test_manifest_roundtrip(tmp_path):
    art = tmp_path / "x.bin"
    art.write_bytes(b"abc")
    write_manifest(tmp_path / "m.txt", [("tool", "plm"), ("config.seed", "0")], [art])
    m = read_manifest(tmp_path / "m.txt")
    assert m["tool"] == "plm" and m["config.seed"] == "0"
    assert m["sha256.x.bin"] == sha256_file(art)
    assert m["sha256.x.bin"] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
