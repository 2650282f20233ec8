from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import loop_kron, loop_vec, yw_residual
from mstar.errors import DegenerateInputError, RankDeficiencyError, ValidationError
from mstar.simulate import gen_model_banded, kron_error, simulate_series
from mstar.star_banded import (
    BandedStarModel,
    band_mask,
    delta_rss,
    estimate_c,
    estimate_c_covariances,
    fit_banded,
    fit_banded_covariances,
    nkp_init,
    objective,
    predict_banded,
    project_band,
    rss_grid,
    rss_grid_covariances,
    select_bandwidths,
    select_from_rss,
    step_A,
    step_B,
)
from mstar.star_diag import FitConfig
from mstar.tensor_core import kron, lag_covariances, population_lag_covariances


def _e(size, r, c):
    e = np.zeros((size, size))
    e[r, c] = 1.0
    return e


def _support(size, band, zero_diagonal=False):
    return [(r, c) for r in range(size) for c in range(size) if abs(r - c) <= band and not (zero_diagonal and r == c)]


def dense_step_B(covs, A0, A1, kB):
    q = covs.q
    sup = _support(q, kB)
    cols = [loop_vec(loop_kron(_e(q, r, c), A0) @ covs.full1) for r, c in sup]
    cols += [loop_vec(loop_kron(_e(q, r, c), A1) @ covs.full0) for r, c in sup]
    coef = np.linalg.lstsq(np.column_stack(cols), loop_vec(covs.full1), rcond=None)[0]
    B0, B1 = np.zeros((q, q)), np.zeros((q, q))
    for k, (r, c) in enumerate(sup):
        B0[r, c] = coef[k]
        B1[r, c] = coef[len(sup) + k]
    return B0, B1


def dense_step_A(covs, B0, B1, kA):
    p = covs.p
    s0, s1 = _support(p, kA, True), _support(p, kA)
    cols = [loop_vec(loop_kron(B0, _e(p, r, c)) @ covs.full1) for r, c in s0]
    cols += [loop_vec(loop_kron(B1, _e(p, r, c)) @ covs.full0) for r, c in s1]
    coef = np.linalg.lstsq(np.column_stack(cols), loop_vec(covs.full1), rcond=None)[0]
    A0, A1 = np.zeros((p, p)), np.zeros((p, p))
    for k, (r, c) in enumerate(s0):
        A0[r, c] = coef[k]
    for k, (r, c) in enumerate(s1):
        A1[r, c] = coef[len(s0) + k]
    return A0, A1


@pytest.fixture
def covs22(rng):
    return lag_covariances(simulate_series(gen_model_banded(2, 2, 1, 1, 5), 200, seed=6))


@pytest.fixture
def covs43():
    return lag_covariances(simulate_series(gen_model_banded(4, 3, 1, 1, 7), 300, seed=8))


# -- least-squares steps ----------------------------------------------------------


def test_step_B_full_band_matches_dense(covs22, rng):
    A0 = np.array([[0.0, 0.7], [-0.4, 0.0]])
    A1 = rng.standard_normal((2, 2))
    got = step_B(covs22, A0, A1, 1)
    want = dense_step_B(covs22, A0, A1, 1)
    np.testing.assert_allclose(got[0], want[0], atol=1e-9)
    np.testing.assert_allclose(got[1], want[1], atol=1e-9)


def test_step_A_full_band_matches_dense(covs22, rng):
    B0, B1 = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    got = step_A(covs22, B0, B1, 1)
    want = dense_step_A(covs22, B0, B1, 1)
    np.testing.assert_allclose(got[0], want[0], atol=1e-9)
    np.testing.assert_allclose(got[1], want[1], atol=1e-9)
    assert np.all(np.diag(got[0]) == 0)


def test_steps_respect_narrow_bands(covs43, rng):
    A0 = project_band(rng.standard_normal((4, 4)), 1, zero_diagonal=True)
    A1 = project_band(rng.standard_normal((4, 4)), 1)
    B0, B1 = step_B(covs43, A0, A1, 0)
    np.testing.assert_allclose((B0, B1), dense_step_B(covs43, A0, A1, 0), atol=1e-9)
    assert np.count_nonzero(B0 - np.diag(np.diag(B0))) == 0
    A0n, A1n = step_A(covs43, B0, B1, 1)
    np.testing.assert_allclose((A0n, A1n), dense_step_A(covs43, B0, B1, 1), atol=1e-9)
    assert not np.any(A1n[~band_mask(4, 1)])


def test_objective_matches_full_residual(covs43, rng):
    A0, A1 = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    B0, B1 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    want = np.sum(yw_residual(covs43.full0, covs43.full1, kron(B0, A0), kron(B1, A1)) ** 2)
    assert objective(covs43, A0, A1, B0, B1) == pytest.approx(want, rel=1e-10)


def test_objective_trace_is_non_increasing(covs43):
    trace: list[float] = []
    fit_banded_covariances(covs43, 1, 1, FitConfig(tolerance=1e-10, max_iterations=40), trace=trace)
    assert np.all(np.diff(trace) <= 1e-10 * max(trace))


# -- unrestricted row regressions ------------------------------------------------


def test_estimate_c_matches_dense_joint_regression(rng):
    p, q, kA, kB = 3, 2, 1, 0
    series = simulate_series(gen_model_banded(p, q, kA, kB, 1), 400, seed=2)
    covs = lag_covariances(series)
    s0 = np.kron(band_mask(q, kB), band_mask(p, kA, True))
    s1 = np.kron(band_mask(q, kB), band_mask(p, kA))
    m = p * q
    cols, where = [], []
    for k, s, full in ((0, s0, covs.full1), (1, s1, covs.full0)):
        for r, c in zip(*np.nonzero(s)):
            e = np.zeros((m, m))
            e[r, c] = 1.0
            cols.append(loop_vec(e @ full))
            where.append((k, r, c))
    coef = np.linalg.lstsq(np.column_stack(cols), loop_vec(covs.full1), rcond=None)[0]
    want = np.zeros((2, m, m))
    for value, (k, r, c) in zip(coef, where):
        want[k, r, c] = value
    c0, c1 = estimate_c(series, kA, kB)
    np.testing.assert_allclose(c0, want[0], atol=1e-9)
    np.testing.assert_allclose(c1, want[1], atol=1e-9)
    assert np.all(np.diag(c0) == 0)


def test_estimate_c_population_recovers_truth():
    truth = gen_model_banded(5, 4, 1, 1, 9)
    covs = population_lag_covariances(truth.transition(), 5, 4)
    c0, c1 = estimate_c_covariances(covs, 1, 1, strict=False)
    # the minimum-norm solution solves the moment equations exactly
    np.testing.assert_allclose(yw_residual(covs.full0, covs.full1, c0, c1), 0.0, atol=1e-9)
    t0, t1 = truth.coefficient_matrices()
    # rows with a full-rank design are pinned down exactly
    s0 = np.kron(band_mask(4, 1), band_mask(5, 1, True))
    s1 = np.kron(band_mask(4, 1), band_mask(5, 1))
    identified = 0
    for i in range(20):
        x = np.concatenate([covs.full1[s0[i]], covs.full0[s1[i]]]).T
        sv = np.linalg.svd(x, compute_uv=False)
        if sv[-1] > 1e-6 * sv[0]:
            identified += 1
            np.testing.assert_allclose(c0[i], t0[i], atol=1e-8)
            np.testing.assert_allclose(c1[i], t1[i], atol=1e-8)
    assert identified > 0


def test_estimate_c_strict_raises_on_singular_rows():
    covs = population_lag_covariances(gen_model_banded(2, 2, 1, 1, 0).transition(), 2, 2)
    with pytest.raises(RankDeficiencyError):
        estimate_c_covariances(covs, 1, 1, strict=True)


def test_nkp_init_exact_on_kronecker_input(rng):
    truth = gen_model_banded(4, 3, 1, 1, 4)
    c0, c1 = truth.coefficient_matrices()
    A0, B0, A1, B1 = nkp_init(c0, c1, 4, 3, 1, 1)
    assert kron_error(A0, B0, truth.A0, truth.B0) < 1e-10
    assert kron_error(A1, B1, truth.A1, truth.B1) < 1e-10
    assert np.linalg.norm(A0) == pytest.approx(1.0)
    with pytest.raises(DegenerateInputError):
        nkp_init(np.eye(12), c1, 4, 3, 1, 1)


# -- fitting -------------------------------------------------------------------


def test_population_fixed_point():
    truth = gen_model_banded(5, 4, 2, 1, 21)
    covs = population_lag_covariances(truth.transition(), 5, 4)
    fit = fit_banded_covariances(covs, 2, 1, FitConfig(tolerance=1e-12, max_iterations=500))
    assert kron_error(fit.model.A0, fit.model.B0, truth.A0, truth.B0) < 1e-7
    assert kron_error(fit.model.A1, fit.model.B1, truth.A1, truth.B1) < 1e-7
    assert fit.objective < 1e-14


def test_truth_is_stationary_point():
    truth = gen_model_banded(4, 4, 1, 1, 3)
    covs = population_lag_covariances(truth.transition(), 4, 4)
    B0, B1 = step_B(covs, truth.A0, truth.A1, 1)
    np.testing.assert_allclose(B0, truth.B0, atol=1e-9)
    np.testing.assert_allclose(B1, truth.B1, atol=1e-9)


def test_fit_banded_output_structure():
    series = simulate_series(gen_model_banded(4, 3, 1, 1, 2), 300, seed=3)
    fit = fit_banded(series, 1, 1)
    m = fit.model
    assert not np.any(m.A0[~band_mask(4, 1, True)])
    assert not np.any(m.B1[~band_mask(3, 1)])
    assert np.linalg.norm(m.A0) == pytest.approx(1.0)
    assert fit.to_dict(n=300)["kA"] == 1
    with pytest.raises(ValidationError):
        fit_banded(series, 4, 1)


def test_predict_banded_dense(rng):
    model = gen_model_banded(3, 3, 1, 1, 5)
    x = rng.standard_normal((3, 3))
    c0, c1 = model.coefficient_matrices()
    want = np.linalg.solve(np.eye(9) - c0, c1 @ loop_vec(x))
    np.testing.assert_allclose(loop_vec(predict_banded(model, x)), want, atol=1e-12)


def test_model_rejects_out_of_band_entries():
    A = np.zeros((3, 3))
    A[0, 2] = 1.0
    with pytest.raises(ValidationError):
        BandedStarModel(A, np.eye(3), np.eye(2), np.eye(2), 1, 1)


# -- bandwidth selection ----------------------------------------------------------------


def test_rss_is_monotone_in_both_bands():
    series = simulate_series(gen_model_banded(5, 5, 1, 1, 2), 300, seed=1)
    grid = rss_grid(series, 3)
    assert grid.rss.shape == (25, 4, 4)
    tol = 1e-9 * grid.rss.max()
    assert np.all(np.diff(grid.rss, axis=1) <= tol)
    assert np.all(np.diff(grid.rss, axis=2) <= tol)


def test_population_rss_vanishes_above_truth():
    truth = gen_model_banded(6, 6, 1, 1, 12)
    covs = population_lag_covariances(truth.transition(), 6, 6)
    rss = rss_grid_covariances(covs, 3).rss
    assert np.all(rss[:, 1:, 1:] < 1e-16)
    assert np.all(rss[:, 0, :].max(axis=1) > 1e-12) or np.any(rss[:, :, 0] > 1e-12)
    d = delta_rss(rss)
    assert np.all(np.abs(d[:, 1:, 1:]) < 1e-16)


def test_delta_rss_hand_example():
    rss = np.array([[[4.0, 2.0], [1.0, 0.0]]])
    # 0.5 * ((4 - 1) + (4 - 2))
    np.testing.assert_allclose(delta_rss(rss), [[[2.5]]])


def test_select_from_rss_synthetic_grid():
    # one row, drops concentrate at (kA, kB) = (2, 1)
    K = 3
    rss = np.zeros((1, K + 2, K + 2))
    for a in range(K + 2):
        for b in range(K + 2):
            rss[0, a, b] = 10.0 * (a < 2) + 5.0 * (b < 1)
    kA, kB, ratios, _, _ = select_from_rss(rss, K, 1e-3)
    assert (kA, kB) == (2, 1)
    assert np.all(np.isfinite(ratios))


def test_select_from_rss_skips_flagged_cells():
    K = 2
    rss = np.ones((1, K + 2, K + 2))
    rss[0, :, 1:] = 0.0  # true kB = 1
    rss[0, 2:, 2:] = -5.0  # artefact drop at (2, 2), flagged
    flagged = np.zeros(rss.shape, dtype=bool)
    flagged[0, 2:, 2:] = True
    assert select_from_rss(rss, K, 1e-3, flagged)[1] == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_ratios_never_nan(seed):
    rng = np.random.default_rng(seed)
    rss = np.sort(rng.exponential(size=(4, 5, 5)), axis=1)[:, ::-1]
    rss = np.sort(rss, axis=2)[:, :, ::-1].copy()
    rss[rng.random(rss.shape) < 0.3] = 0.0
    kA, kB, ratios, row_kA, row_kB = select_from_rss(rss, 3, 1e-4)
    assert not np.any(np.isnan(ratios))
    assert 1 <= kA <= 3 and 1 <= kB <= 3


def test_select_bandwidths_validation_and_output():
    series = simulate_series(gen_model_banded(5, 5, 1, 1, 2), 200, seed=1)
    sel = select_bandwidths(series, K=2)
    assert 1 <= sel.kA_hat <= 2 and 1 <= sel.kB_hat <= 2
    assert sel.omega_n == pytest.approx(0.1 * 25 / 200)
    d = sel.to_dict()
    assert sum(d["per_row_votes"]["kA"].values()) == 25
    with pytest.raises(ValidationError):
        select_bandwidths(series, K=0)
    with pytest.raises(ValidationError):
        select_bandwidths(series, K=2, omega_factor=0.0)
    with pytest.raises(ValidationError):
        rss_grid(series, 5)
