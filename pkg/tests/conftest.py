from __future__ import annotations

import numpy as np
import pytest

from mstar.tensor_core import MatrixTimeSeries


def loop_vec(m: np.ndarray) -> np.ndarray:
    """Column stacking written out element by element."""
    p, q = m.shape
    out = np.empty(p * q)
    for j in range(q):
        for i in range(p):
            out[j * p + i] = m[i, j]
    return out


def loop_kron(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    q1, q2 = b.shape
    p1, p2 = a.shape
    out = np.empty((q1 * p1, q2 * p2))
    for i1 in range(q1):
        for j1 in range(q2):
            for i2 in range(p1):
                for j2 in range(p2):
                    out[i1 * p1 + i2, j1 * p2 + j2] = b[i1, j1] * a[i2, j2]
    return out


def loop_lag_covariances(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = data.shape[0]
    z = [loop_vec(x) for x in data]
    m = z[0].size
    s0 = np.zeros((m, m))
    s1 = np.zeros((m, m))
    for t in range(n):
        s0 += np.outer(z[t], z[t])
    for t in range(1, n):
        s1 += np.outer(z[t], z[t - 1])
    return s0 / n, s1 / n


def yw_residual(full0, full1, c0, c1) -> np.ndarray:
    """Generalized Yule-Walker residual ``S(1) - C0 S(1) - C1 S(0)``."""
    return full1 - c0 @ full1 - c1 @ full0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_series(rng):
    return MatrixTimeSeries(rng.standard_normal((40, 3, 2)))


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
