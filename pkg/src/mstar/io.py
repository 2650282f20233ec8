"""CSV readers and writers for matrix series and weight matrices.

Series files are long format with header ``t,i,j,value`` and 1-based
indices; weight files use ``i,j,value``. Both must be dense.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import FormatError, IngestionError
from .tensor_core import MatrixTimeSeries


def _read(path, columns: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise IngestionError(f"no such file: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")
    return frame


def _dense(frame: pd.DataFrame, keys: list[str], path) -> tuple[np.ndarray, tuple[int, ...]]:
    try:
        idx = frame[keys].to_numpy(dtype=np.int64)
        values = frame["value"].to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{path}: non-numeric entries ({exc})") from None
    if idx.size and idx.min() < 1:
        raise FormatError(f"{path}: indices are 1-based")
    if frame.duplicated(keys).any():
        raise FormatError(f"{path}: duplicate index rows")
    shape = tuple(int(m) for m in idx.max(axis=0)) if idx.size else (0,) * len(keys)
    if len(values) != int(np.prod(shape)) or len(values) == 0:
        raise IngestionError(f"{path}: expected a dense grid of shape {shape}, got {len(values)} rows")
    out = np.empty(shape)
    out[tuple((idx - 1).T)] = values
    return out, shape


def read_series_csv(path) -> MatrixTimeSeries:
    """Load a dense ``t,i,j,value`` file into a series of shape (n, p, q)."""
    frame = _read(path, ["t", "i", "j", "value"])
    data, _ = _dense(frame, ["t", "i", "j"], path)
    return MatrixTimeSeries(data)


def write_series_csv(series: MatrixTimeSeries | np.ndarray, path) -> None:
    data = series.data if isinstance(series, MatrixTimeSeries) else np.asarray(series, dtype=float)
    n, p, q = data.shape
    t, i, j = np.meshgrid(np.arange(1, n + 1), np.arange(1, p + 1), np.arange(1, q + 1), indexing="ij")
    frame = pd.DataFrame({"t": t.ravel(), "i": i.ravel(), "j": j.ravel(), "value": data.ravel()})
    frame.to_csv(path, index=False, float_format="%.17g")


def read_weights_csv(path) -> np.ndarray:
    """Load a dense square ``i,j,value`` weight matrix."""
    frame = _read(path, ["i", "j", "value"])
    w, shape = _dense(frame, ["i", "j"], path)
    if shape[0] != shape[1]:
        raise FormatError(f"{path}: weight matrix must be square, got {shape}")
    return w


def write_weights_csv(w: np.ndarray, path) -> None:
    w = np.asarray(w, dtype=float)
    i, j = np.meshgrid(np.arange(1, w.shape[0] + 1), np.arange(1, w.shape[1] + 1), indexing="ij")
    pd.DataFrame({"i": i.ravel(), "j": j.ravel(), "value": w.ravel()}).to_csv(
        path, index=False, float_format="%.17g"
    )


def write_json(obj, path) -> None:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
