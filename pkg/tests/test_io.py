from __future__ import annotations

import json

import numpy as np
import pytest

from mstar.errors import FormatError, IngestionError
from mstar.io import read_series_csv, read_weights_csv, write_json, write_series_csv, write_weights_csv


def test_series_roundtrip_is_exact(tmp_path, rng):
    data = rng.standard_normal((4, 3, 2))
    path = tmp_path / "s.csv"
    write_series_csv(data, path)
    np.testing.assert_array_equal(read_series_csv(path).data, data)
    assert path.read_text().splitlines()[0] == "t,i,j,value"


def test_series_indices_are_one_based(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("t,i,j,value\n1,1,1,5\n1,2,1,6\n2,1,1,7\n2,2,1,8\n")
    series = read_series_csv(path)
    assert series.data.shape == (2, 2, 1)
    assert series.data[1, 0, 0] == 7


@pytest.mark.parametrize(
    "body, error",
    [
        ("t,i,j,value\n1,1,1,5\n1,1,1,6\n2,1,1,1\n", FormatError),
        ("t,i,j,value\n1,1,1,5\n2,1,2,6\n", IngestionError),
        ("t,i,j,value\n0,1,1,5\n", FormatError),
        ("t,i,value\n1,1,5\n", FormatError),
        ("t,i,j,value\n1,1,1,abc\n2,1,1,1\n", FormatError),
    ],
)
def test_series_errors(tmp_path, body, error):
    path = tmp_path / "s.csv"
    path.write_text(body)
    with pytest.raises(error):
        read_series_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        read_series_csv(tmp_path / "nope.csv")


def test_weights_roundtrip_and_square(tmp_path, rng):
    w = rng.standard_normal((3, 3))
    path = tmp_path / "w.csv"
    write_weights_csv(w, path)
    np.testing.assert_array_equal(read_weights_csv(path), w)
    path.write_text("i,j,value\n1,1,1\n1,2,1\n")
    with pytest.raises(FormatError, match="square"):
        read_weights_csv(path)


def test_write_json_is_stable(tmp_path):
    path = tmp_path / "x.json"
    write_json({"b": np.float64(1.5), "a": np.arange(2)}, path)
    text = path.read_text()
    assert text.endswith("\n") and text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1], "b": 1.5}
    with pytest.raises(TypeError):
        write_json({"x": object()}, path)
