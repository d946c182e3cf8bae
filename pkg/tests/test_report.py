import csv
import re

from peglab.report import (dumps_report, orbit_rows, plot_doubling, plot_pegs, plot_scan, read_report,
                           render_svg, write_report, write_rows)
from peglab.solver import solve
from peglab.curve import make_circle
from peglab.residual import Problem
from peglab.solver import SolveConfig


def test_svg_structure(ellipse_report, square_report):
    for r in (ellipse_report, square_report):
        svg = render_svg(r)
        assert svg.count("<polygon") == len(r.orbits)
        assert svg.count("<path") == 1
        assert svg.count("<line") == 2 * len(r.orbits)
        # every coordinate stays inside the canvas
        nums = [float(x) for x in re.findall(r'points="([^"]+)"', svg)[0].replace(",", " ").split()]
        assert all(0 <= x <= 600 for x in nums)


def test_svg_y_axis_points_up(ellipse_report):
    # the top vertex of the drawing (smallest svg y) must have the largest imaginary part
    svg = render_svg(ellipse_report)
    pts = re.findall(r'points="([^"]+)"', svg)[0].split()
    ys = [float(p.split(",")[1]) for p in pts]
    verts = ellipse_report.orbits[0].peg.vertices
    assert verts[ys.index(min(ys))].imag == max(v.imag for v in verts)


def test_circle_svg_shades_family():
    r = solve(make_circle(), Problem.rectangle(0.785), SolveConfig(grid_per_axis=10))
    svg = render_svg(r)
    assert svg.count("<polygon") == 0 and svg.count("<path") == 1 and "<circle" in svg


def test_json_file_round_trip(tmp_path, ellipse_report):
    p = tmp_path / "r.json"
    write_report(ellipse_report, p)
    assert dumps_report(read_report(p)) == dumps_report(ellipse_report)


def test_csv_and_figures(tmp_path, ellipse_report):
    p = tmp_path / "o.csv"
    write_rows(p, *orbit_rows(ellipse_report))
    rows = list(csv.DictReader(open(p)))
    assert len(rows) == 2 and rows[0]["kind"] == "rectangle"
    plot_pegs(ellipse_report, tmp_path / "a.png")
    plot_scan([0.1, 0.2], [2, 2], tmp_path / "b.png", [[1 + 1j, 1.1 + 1j]])
    plot_doubling([{"member": 0, "phi": 0.3, "orbits": 2}], tmp_path / "c.png")
    for n in "abc":
        assert (tmp_path / f"{n}.png").read_bytes()[:4] == b"\x89PNG"
