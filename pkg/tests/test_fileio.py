import json
import math

import numpy as np
import pytest

from fpt_fredholm import DensityGrid, graded_nodes, ig_density
from fpt_fredholm.errors import ValidationError
from fpt_fredholm.fileio import (
    RunManifest,
    atomic_write_text,
    read_density_csv,
    sha256_file,
    to_jsonable,
    write_crossings_csv,
    write_density_csv,
    write_json,
)


def test_density_csv_round_trip_is_exact(tmp_path):
    s = graded_nodes(8.0, 50)
    d = DensityGrid.from_values(s, ig_density(1.0, s))
    path = write_density_csv(tmp_path / "d.csv", d)
    assert path.read_text().splitlines()[0] == "s,f,F"
    again = read_density_csv(path)
    assert np.array_equal(again.s_nodes, d.s_nodes)
    assert np.array_equal(again.f_values, d.f_values)
    assert np.array_equal(again.F_values, np.concatenate([[0.0], np.cumsum(d.cell_masses())]))


def test_density_csv_without_F(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("s,f\n0.0,0.0\n1.0,0.5\n")
    d = read_density_csv(path)
    assert d.F_values is None and d.f_values[1] == 0.5


@pytest.mark.parametrize("text", [
    "", "a,b\n1,2\n", "s,f\n0.0,x\n1.0,0.1\n", "s,f\n0.0,0.0\n1.0,-0.5\n", "s,f\n0.5,0.0\n1.0,0.1\n",
])
def test_bad_density_csv(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    with pytest.raises(ValidationError):
        read_density_csv(path)


def test_missing_density_csv(tmp_path):
    with pytest.raises(ValidationError):
        read_density_csv(tmp_path / "nope.csv")


def test_json_handles_non_finite_and_numpy():
    obj = {"a": np.float64(0.1), "b": math.inf, "c": [np.int64(3), np.nan], "d": np.bool_(True)}
    data = json.loads(json.dumps(to_jsonable(obj), allow_nan=False))
    assert data == {"a": 0.1, "b": "inf", "c": [3, "nan"], "d": True}


def test_floats_round_trip(tmp_path):
    x = [0.1 + 0.2, 1e-300, 2.0 / 3.0]
    write_crossings_csv(tmp_path / "c.csv", x)
    assert [float(v) for v in (tmp_path / "c.csv").read_text().split()[1:]] == x
    write_json(tmp_path / "x.json", {"x": x})
    assert json.loads((tmp_path / "x.json").read_text())["x"] == x


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "a.txt", "one")
    atomic_write_text(tmp_path / "a.txt", "two")
    assert (tmp_path / "a.txt").read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]


def test_failed_write_keeps_old_file(tmp_path, monkeypatch):
    path = atomic_write_text(tmp_path / "a.json", "old")
    with pytest.raises(TypeError):
        write_json(path, {"bad": object()})

    def broken_replace(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr("fpt_fredholm.fileio.os.replace", broken_replace)
    with pytest.raises(OSError):
        atomic_write_text(path, "new")
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["a.json"]


def test_manifest_lists_hashes(tmp_path):
    inp = atomic_write_text(tmp_path / "in.json", "{}")
    out = atomic_write_text(tmp_path / "out" / "r.csv", "x\n1\n")
    m = RunManifest("solve", {"k": 1})
    m.add_input(inp)
    m.add_input(None)
    m.add_output(out)
    data = json.loads(m.write(tmp_path / "out").read_text())
    assert data["outputs"] == {"r.csv": sha256_file(out)}
    assert data["inputs"] == {str(inp): sha256_file(inp)}
    assert {"fpt_fredholm", "numpy", "scipy", "numba", "python"} <= set(data["versions"])
