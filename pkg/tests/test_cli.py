import numpy as np
import pytest

from twophase.cli import RunConfig, main, run_experiment
from twophase.mesh import SplitPattern, build_initial_mesh
from twophase.output import CSV_COLUMNS, read_csv, read_vtk, write_csv, write_vtk
from twophase.problems import example1_spec


def test_csv_header_only(tmp_path):
    path = write_csv([], tmp_path / "t.csv")
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_csv_format(tmp_path):
    rec = dict(zip(CSV_COLUMNS, [1, 15, 6.0383356, 5.99747, 0.705, 1.45, 1.3, 2e-13, 0.09, 1e-12, 4.58]))
    path = write_csv([rec], tmp_path / "t.csv")
    line = path.read_text().splitlines()[1]
    assert line.startswith("1,15,6.03834e+00,5.99747e+00,7.05000e-01")
    back = read_csv(path)[0]
    assert back["num_nodes"] == 15 and back["J_primal"] == 6.03834


def test_vtk_counts_and_round_trip(tmp_path):
    m = example1_spec().mesh(1)
    rng = np.random.default_rng(3)
    u = rng.normal(size=m.num_nodes)
    cells = {k: rng.normal(size=m.num_triangles) for k in ("lambda", "mu", "density1", "density2", "density3")}
    path = write_vtk(m, tmp_path / "m.vtk", point_data={"u_lambda": u}, cell_data=cells)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "POINTS 15 double" in text and "CELLS 16 64" in text
    data = read_vtk(path)
    np.testing.assert_array_equal(data["points"][:, :2], m.vertices)
    np.testing.assert_array_equal(data["cells"], m.triangles)
    assert np.all(data["cell_types"] == 5)
    np.testing.assert_array_equal(data["point_data"]["u_lambda"], u)
    for k, v in cells.items():
        np.testing.assert_array_equal(data["cell_data"][k], v)


def test_vtk_point_data_only(tmp_path):
    m = build_initial_mesh((0, 1, 0, 1), 2, 2, SplitPattern.CRISSCROSS)
    path = write_vtk(m, tmp_path / "p.vtk", point_data={"u": np.arange(m.num_nodes, dtype=float)})
    data = read_vtk(path)
    assert "CELL_DATA" not in path.read_text()
    assert data["cell_data"] == {} and len(data["point_data"]["u"]) == m.num_nodes


def test_vtk_rejects_wrong_sizes(tmp_path):
    m = build_initial_mesh((0, 1, 0, 1), 1, 1, SplitPattern.DIAGONAL)
    with pytest.raises(ValueError):
        write_vtk(m, tmp_path / "x.vtk", cell_data={"a": np.zeros(5)})


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(example=3)
    with pytest.raises(ValueError):
        RunConfig(levels=0)
    with pytest.raises(ValueError):
        RunConfig(majorant_iters=-1)
    with pytest.raises(ValueError):
        RunConfig(example=2, reference="exact").reference_mode(RunConfig(example=2).problem())


def test_single_level_no_sweeps(tmp_path):
    recs = run_experiment(RunConfig(example=1, levels=1, majorant_iters=0, output_dir=tmp_path))
    assert len(recs) == 1
    r = recs[0]
    assert r.ok and r.num_nodes == 15 and r.majorant_sweeps == 0
    assert r.gap <= r.majorant_total
    rows = read_csv(tmp_path / "example1.csv")
    assert len(rows) == 1 and rows[0]["J_primal"] == pytest.approx(6.0383, abs=1e-4)


def test_run_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        run_experiment(RunConfig(example=2, levels=2, majorant_iters=50, output_dir=tmp_path / sub))
    for name in ("example2.csv", "example2_majorant.log"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_main_writes_all_outputs(tmp_path):
    code = main(["--example", "1", "--levels", "2", "--majorant-iters", "100", "--out", str(tmp_path), "--vtk", "-q"])
    assert code == 0
    assert (tmp_path / "example1.csv").exists()
    assert (tmp_path / "example1_level2.vtk").exists()
    log = (tmp_path / "example1_majorant.log").read_text().splitlines()
    assert log[0].startswith("# level 1")
    rows = read_csv(tmp_path / "example1.csv")
    assert all(r["gap"] <= r["majorant_total"] for r in rows)
    data = read_vtk(tmp_path / "example1_level2.vtk")
    assert set(data["cell_data"]) == {"lambda", "mu", "density1", "density2", "density3"}


def test_main_flags_broken_bounds(tmp_path):
    # a Friedrichs constant far too small no longer gives an upper bound
    code = main(["--example", "1", "--levels", "2", "--majorant-iters", "200", "--out", str(tmp_path),
                 "--friedrichs", "1e-4", "-q"])
    assert code == 1


def test_main_rejects_bad_config(tmp_path):
    assert main(["--levels", "0", "--out", str(tmp_path), "-q"]) == 2
