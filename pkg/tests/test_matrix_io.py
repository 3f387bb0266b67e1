import numpy as np
import pandas as pd
import pytest

from src.data.matrix_io import (
    load_snapshots,
    read_linear_model,
    read_matrix,
    save_snapshots,
    write_error_series,
    write_linear_model,
    write_matrix,
    write_summary,
)
from src.models.core import PerturbationSpec
from src.models.gramian import empirical_gramian, record_snapshots
from src.models.oracle import random_linear_system
from src.models.sim import InputSignal
from src.utils.errors import ModelIOError


def test_matrix_file_round_trip_is_exact(tmp_path):
    M = np.random.default_rng(0).standard_normal((3, 5)) * 1e-7
    path = tmp_path / "m.txt"
    write_matrix(path, M)
    assert path.read_text().splitlines()[0] == "3 5"
    np.testing.assert_array_equal(read_matrix(path), M)


def test_matrix_files_accept_tabs_and_exponents(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 3\n1.5e-3\t-2E+2  0\n\t4 5.0e0 -6e-1\n")
    np.testing.assert_array_equal(read_matrix(path), [[1.5e-3, -200.0, 0.0], [4.0, 5.0, -0.6]])


@pytest.mark.parametrize("content", ["", "2\n1 2\n", "2 2\n1 2\n3\n", "1 2\n1 x\n", "2 1\n1\n"])
def test_malformed_matrix_files_are_rejected(tmp_path, content):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(ModelIOError) as info:
        read_matrix(path)
    assert info.value.exit_code == 3


def test_missing_matrix_file(tmp_path):
    with pytest.raises(ModelIOError):
        read_matrix(tmp_path / "absent.txt")


def test_linear_model_manifest(tmp_path):
    system = random_linear_system(3, 2, 1, seed=2)
    path = tmp_path / "model.cfg"
    write_linear_model(path, system)
    loaded, model = read_linear_model(path)
    np.testing.assert_array_equal(loaded.A, system.A)
    np.testing.assert_array_equal(loaded.C, system.C)
    assert model.dims.P == 0


def test_manifest_with_source_term(tmp_path):
    system = random_linear_system(3, 1, 1, seed=2)
    path = tmp_path / "model.cfg"
    write_linear_model(path, system, p=[0.1, 0.2, 0.3])
    _, model = read_linear_model(path)
    assert model.dims.P == 3
    x = np.zeros(3)
    np.testing.assert_allclose(model.f(x, np.zeros(1), model.p), [0.1, 0.2, 0.3])


def test_manifest_with_parameter_matrix(tmp_path):
    system = random_linear_system(3, 1, 1, seed=2)
    path = tmp_path / "model.cfg"
    write_linear_model(path, system, p=[2.0], F=np.ones((3, 1)))
    _, model = read_linear_model(path)
    assert model.dims.P == 1
    np.testing.assert_allclose(model.f(np.zeros(3), np.zeros(1), model.p), [2.0, 2.0, 2.0])


def test_manifest_errors(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text("a=a.txt\nb=b.txt\n")
    with pytest.raises(ModelIOError):
        read_linear_model(path)
    path.write_text("a a.txt\n")
    with pytest.raises(ModelIOError):
        read_linear_model(path)
    system = random_linear_system(3, 1, 1, seed=2)
    write_linear_model(path, system, p=[1.0, 2.0])
    with pytest.raises(ModelIOError):
        read_linear_model(path)


def test_snapshot_archive_replays_gramian(tmp_path, linear_model, grid):
    spec = PerturbationSpec.default(linear_model.dims)
    u = InputSignal.impulse(np.ones(2))
    data = record_snapshots('x', linear_model, grid, spec, u)
    path = tmp_path / "snapshots.npz"
    save_snapshots(path, data)
    loaded = load_snapshots(path)
    assert len(loaded.states) == len(data.states) and len(loaded.outputs) == len(data.outputs)
    np.testing.assert_array_equal(
        empirical_gramian('x', linear_model, grid, spec, u, data=loaded).matrix,
        empirical_gramian('x', linear_model, grid, spec, u).matrix)


def test_corrupt_snapshot_archive(tmp_path):
    path = tmp_path / "snapshots.npz"
    path.write_bytes(b"not an archive")
    with pytest.raises(ModelIOError):
        load_snapshots(path)


def test_error_series_csv(tmp_path):
    path = tmp_path / "wx.csv"
    write_error_series(path, [0.0, 0.5, 1.0], [0.0, 0.25, 0.125])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,relative_error"
    assert len(lines) == 4
    frame = pd.read_csv(path)
    np.testing.assert_array_equal(frame['relative_error'], [0.0, 0.25, 0.125])


def test_summary_csv(tmp_path):
    path = tmp_path / "summary.csv"
    write_summary(path, pd.DataFrame({'experiment': ['bt'], 'aggregate_error': [1e-3]}))
    assert path.read_text().splitlines()[0] == "experiment,aggregate_error"
    with pytest.raises(ModelIOError):
        write_summary(tmp_path / "missing" / "summary.csv", pd.DataFrame({'a': [1]}))
