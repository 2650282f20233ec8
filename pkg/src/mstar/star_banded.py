"""Spatio-temporal autoregression with unknown banded weight matrices.

Model::

    X_t = A0 X_t B0' + A1 X_{t-1} B1' + E_t

``A0, A1`` (p×p) are banded with bandwidth ``kA``, ``B0, B1`` (q×q) with
bandwidth ``kB``, and ``diag(A0) = 0``. Only ``B_k ⊗ A_k`` is identified;
fitted models are reported with ``||A_k||_F = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DimensionError, RankDeficiencyError, ValidationError
from .star_diag import FitConfig
from .tensor_core import (
    LagCovariances,
    MatrixTimeSeries,
    TransitionForm,
    kron,
    kron_distance,
    lag_covariances,
    nearest_kronecker,
    one_step_forecast,
    stationarity_check,
)

log = logging.getLogger(__name__)

RCOND_LIMIT = 1e-12


def band_mask(size: int, band: int, zero_diagonal: bool = False) -> np.ndarray:
    """Boolean support of a banded ``size x size`` matrix."""
    idx = np.arange(size)
    mask = np.abs(idx[:, None] - idx[None, :]) <= band
    if zero_diagonal:
        mask &= ~np.eye(size, dtype=bool)
    return mask


def project_band(m: np.ndarray, band: int, zero_diagonal: bool = False) -> np.ndarray:
    return np.where(band_mask(m.shape[0], band, zero_diagonal), m, 0.0)


@dataclass(frozen=True)
class BandedStarModel:
    A0: np.ndarray
    A1: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    kA: int
    kB: int
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("A0", "A1", "B0", "B1"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        p, q = self.A0.shape[0], self.B0.shape[0]
        for name, m, size in (("A0", self.A0, p), ("A1", self.A1, p), ("B0", self.B0, q), ("B1", self.B1, q)):
            if m.shape != (size, size):
                raise DimensionError(f"{name} must be square of size {size}")
        if not (0 <= self.kA < p) or not (0 <= self.kB < q):
            raise ValidationError(f"bandwidths must satisfy 0 <= kA < p, 0 <= kB < q; got {(self.kA, self.kB)}")
        for name, m, band, zd in (
            ("A0", self.A0, self.kA, True),
            ("A1", self.A1, self.kA, False),
            ("B0", self.B0, self.kB, False),
            ("B1", self.B1, self.kB, False),
        ):
            if np.any(m[~band_mask(m.shape[0], band, zd)] != 0):
                raise ValidationError(f"{name} has nonzero entries outside its band")
        if self.check:
            self.transition()

    @property
    def p(self) -> int:
        return self.A0.shape[0]

    @property
    def q(self) -> int:
        return self.B0.shape[0]

    def coefficient_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return kron(self.B0, self.A0), kron(self.B1, self.A1)

    def transition(self) -> TransitionForm:
        return stationarity_check(*self.coefficient_matrices())

    def normalized(self) -> "BandedStarModel":
        a0, b0 = normalize_pair(self.A0, self.B0)
        a1, b1 = normalize_pair(self.A1, self.B1)
        return BandedStarModel(a0, a1, b0, b1, self.kA, self.kB, check=False)

    def to_dict(self) -> dict:
        return {
            "A0": self.A0.tolist(),
            "A1": self.A1.tolist(),
            "B0": self.B0.tolist(),
            "B1": self.B1.tolist(),
            "kA": self.kA,
            "kB": self.kB,
            "norm_convention": "A_unit_frobenius",
        }


@dataclass(frozen=True)
class BandedFit:
    model: BandedStarModel
    iterations: int
    final_delta: float
    objective: float
    converged: bool
    init: BandedStarModel | None = None

    def to_dict(self, n: int | None = None) -> dict:
        out = self.model.to_dict()
        out.update(
            n=n,
            p=self.model.p,
            q=self.model.q,
            iterations=self.iterations,
            final_delta=self.final_delta,
            objective=self.objective,
            converged=self.converged,
        )
        return out


@dataclass(frozen=True)
class BandwidthSelection:
    kA_hat: int
    kB_hat: int
    per_row_ratios: np.ndarray  # (pq, K, K), [i, kA-1, kB-1]
    omega_n: float
    K: int
    row_kA: np.ndarray  # per-row A votes given kB_hat
    row_kB: np.ndarray  # per-row B votes from the joint argmax
    flagged_cells: int = 0

    def to_dict(self) -> dict:
        return {
            "kA_hat": self.kA_hat,
            "kB_hat": self.kB_hat,
            "omega_n": self.omega_n,
            "K": self.K,
            "per_row_votes": {
                "kA": {str(k): int(np.sum(self.row_kA == k)) for k in range(1, self.K + 1)},
                "kB": {str(k): int(np.sum(self.row_kB == k)) for k in range(1, self.K + 1)},
            },
            "flagged_cells": self.flagged_cells,
        }


def normalize_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale ``a`` to unit Frobenius norm with a positive largest-magnitude entry; ``b`` absorbs the scale."""
    norm = np.linalg.norm(a)
    if norm == 0:
        return a.copy(), b.copy()
    flat = a.ravel()
    scale = norm if flat[np.argmax(np.abs(flat))] > 0 else -norm
    return a / scale, b * scale


# -- alternating least squares ------------------------------------------------


def _lstsq_strict(x: np.ndarray, y: np.ndarray, what: str, index: int) -> np.ndarray:
    if x.shape[1] == 0:
        return np.empty(0)
    xtx = x.T @ x
    if x.shape[0] < x.shape[1] or not np.any(xtx) or np.linalg.cond(xtx) * RCOND_LIMIT >= 1.0:
        raise RankDeficiencyError(f"{what}: normal matrix for row {index} is singular", index=index)
    return np.linalg.solve(xtx, x.T @ y)


def _step_B(covs: LagCovariances, A0, A1, kB: int) -> tuple[np.ndarray, np.ndarray]:
    q = covs.q
    # P0[i, k] = A0 S_ik(1), P1[i, k] = A1 S_ik(0)
    p0 = np.einsum("ab,ikbc->ikac", A0, covs.sigma1, optimize=True)
    p1 = np.einsum("ab,ikbc->ikac", A1, covs.sigma0, optimize=True)
    p0 = p0.reshape(q, -1)
    p1 = p1.reshape(q, -1)
    mask = band_mask(q, kB)
    B0 = np.zeros((q, q))
    B1 = np.zeros((q, q))
    for j in range(q):
        support = np.flatnonzero(mask[j])
        x = np.concatenate([p0[support], p1[support]]).T
        coef = _lstsq_strict(x, covs.sigma1[j].ravel(), "step_B", j)
        B0[j, support] = coef[: support.size]
        B1[j, support] = coef[support.size :]
    return B0, B1


def _step_A(covs: LagCovariances, B0, B1, kA: int) -> tuple[np.ndarray, np.ndarray]:
    p = covs.p
    # T0[j, k] = sum_i b0[j,i] S_ik(1); column l of the design for row m is T0[:, :, l, :]
    t0 = np.einsum("ji,ikbc->bjkc", B0, covs.sigma1, optimize=True).reshape(p, -1)
    t1 = np.einsum("ji,ikbc->bjkc", B1, covs.sigma0, optimize=True).reshape(p, -1)
    mask0 = band_mask(p, kA, zero_diagonal=True)
    mask1 = band_mask(p, kA)
    A0 = np.zeros((p, p))
    A1 = np.zeros((p, p))
    for m in range(p):
        s0 = np.flatnonzero(mask0[m])
        s1 = np.flatnonzero(mask1[m])
        x = np.concatenate([t0[s0], t1[s1]]).T
        y = covs.sigma1[:, :, m, :].ravel()
        coef = _lstsq_strict(x, y, "step_A", m)
        A0[m, s0] = coef[: s0.size]
        A1[m, s1] = coef[s0.size :]
    return A0, A1


def step_B(covs: LagCovariances, A0, A1, kB: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise least squares for ``B0, B1`` on their band given ``A0, A1``."""
    A0, A1 = np.asarray(A0, float), np.asarray(A1, float)
    if A0.shape != (covs.p, covs.p) or A1.shape != (covs.p, covs.p):
        raise DimensionError("A0/A1 do not match the covariance dimensions")
    return _step_B(covs, A0, A1, kB)


def step_A(covs: LagCovariances, B0, B1, kA: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise least squares for ``A0, A1`` on their band given ``B0, B1``; ``diag(A0)`` stays zero."""
    B0, B1 = np.asarray(B0, float), np.asarray(B1, float)
    if B0.shape != (covs.q, covs.q) or B1.shape != (covs.q, covs.q):
        raise DimensionError("B0/B1 do not match the covariance dimensions")
    return _step_A(covs, B0, B1, kA)


def objective(covs: LagCovariances, A0, A1, B0, B1) -> float:
    """Yule-Walker residual sum of squares over all column pairs."""
    fitted = np.einsum("ji,ab,ikbc->jkac", B0, A0, covs.sigma1, optimize=True) + np.einsum(
        "ji,ab,ikbc->jkac", B1, A1, covs.sigma0, optimize=True
    )
    return float(np.sum((covs.sigma1 - fitted) ** 2))


# -- NKP initialisation -------------------------------------------------------


def kron_support(p: int, q: int, kA: int, kB: int, zero_diagonal: bool) -> np.ndarray:
    """Zero pattern of ``B ⊗ A`` for banded ``B`` (kB) and ``A`` (kA)."""
    return np.kron(band_mask(q, kB), band_mask(p, kA, zero_diagonal))


def _row_designs(covs: LagCovariances, kA: int, kB: int):
    p, q = covs.p, covs.q
    s0 = kron_support(p, q, kA, kB, zero_diagonal=True)
    s1 = kron_support(p, q, kA, kB, zero_diagonal=False)
    for i in range(p * q):
        i0 = np.flatnonzero(s0[i])
        i1 = np.flatnonzero(s1[i])
        # Sigma1' c0 + Sigma0' c1: the columns used are rows of Sigma1 and Sigma0
        x = np.concatenate([covs.full1[i0], covs.full0[i1]]).T
        yield i, i0, i1, x, covs.full1[i]


def _lstsq_min_norm(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """Minimum-norm least squares; the flag reports a rank-deficient design."""
    if x.shape[1] == 0:
        return np.empty(0), False
    coef, _, rank, sv = np.linalg.lstsq(x, y, rcond=None)
    deficient = rank < x.shape[1] or sv[-1] <= RCOND_LIMIT**0.5 * sv[0]
    return coef, bool(deficient)


def estimate_c_covariances(
    covs: LagCovariances, kA: int, kB: int, strict: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    m = covs.p * covs.q
    c0 = np.zeros((m, m))
    c1 = np.zeros((m, m))
    deficient = 0
    for i, i0, i1, x, y in _row_designs(covs, kA, kB):
        if strict:
            coef = _lstsq_strict(x, y, "estimate_c", i)
        else:
            coef, flag = _lstsq_min_norm(x, y)
            deficient += flag
        c0[i, i0] = coef[: i0.size]
        c1[i, i1] = coef[i0.size :]
    if deficient:
        log.info("estimate_c: %d rank-deficient rows solved by minimum-norm least squares", deficient)
    return c0, c1


def estimate_c(series: MatrixTimeSeries, kA: int, kB: int, strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise generalized Yule-Walker estimates of ``C0 = B0⊗A0`` and ``C1 = B1⊗A1`` on their Kronecker-band support.

    Rows near the matrix edges can be exactly unidentified when the
    covariances are noise free. ``strict`` raises on them; otherwise they
    get the minimum-norm solution.
    """
    _check_bands(series.p, series.q, kA, kB)
    return estimate_c_covariances(lag_covariances(series), kA, kB, strict)


def nkp_init(c0, c1, p: int, q: int, kA: int | None = None, kB: int | None = None):
    """Nearest-Kronecker factors of ``C0`` and ``C1`` projected onto the band constraints.

    Returns ``(A0, B0, A1, B1)`` with ``||A_k||_F = 1``. Bandwidths default to
    full bands (only the diagonal of ``A0`` is zeroed).
    """
    kA = p - 1 if kA is None else kA
    kB = q - 1 if kB is None else kB
    out = []
    for k, c in enumerate((c0, c1)):
        a_full, b_full = nearest_kronecker(c, p, q, "A_unit_frobenius")
        a = project_band(a_full, kA, zero_diagonal=(k == 0))
        b = project_band(b_full, kB)
        # relative test: projection can leave pure roundoff behind
        if np.linalg.norm(a) <= 1e-10 * np.linalg.norm(a_full) or np.linalg.norm(b) <= 1e-10 * np.linalg.norm(b_full):
            raise DegenerateInputError(f"NKP factor of C{k} vanishes after band projection")
        a, b = normalize_pair(a, b)
        out.extend([a, b])
    return tuple(out)


def _check_bands(p: int, q: int, kA: int, kB: int) -> None:
    if not (0 <= kA < p) or not (0 <= kB < q):
        raise ValidationError(f"bandwidths must satisfy 0 <= kA < p={p}, 0 <= kB < q={q}; got {(kA, kB)}")


def fit_banded_covariances(
    covs: LagCovariances,
    kA: int,
    kB: int,
    config: FitConfig = FitConfig(),
    init: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None,
    trace: list[float] | None = None,
) -> BandedFit:
    """Iterated estimator on precomputed covariances.

    ``init`` is ``(A0, B0, A1, B1)``; by default it comes from
    :func:`nkp_init` applied to :func:`estimate_c_covariances`.
    """
    p, q = covs.p, covs.q
    _check_bands(p, q, kA, kB)
    if init is None:
        init = nkp_init(*estimate_c_covariances(covs, kA, kB, strict=False), p, q, kA, kB)
    A0, B0, A1, B1 = (np.asarray(m, dtype=float).copy() for m in init)
    init_model = BandedStarModel(A0, A1, B0, B1, kA, kB, check=False)

    prev = (B0, A0, B1, A1)
    delta = np.inf
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        B0, B1 = _step_B(covs, A0, A1, kB)
        if trace is not None:
            trace.append(objective(covs, A0, A1, B0, B1))
        A0, A1 = _step_A(covs, B0, B1, kA)
        if trace is not None:
            trace.append(objective(covs, A0, A1, B0, B1))
        delta = kron_distance(B0, A0, prev[0], prev[1]) + kron_distance(B1, A1, prev[2], prev[3])
        prev = (B0, A0, B1, A1)
        if delta <= config.tolerance:
            break

    converged = bool(delta <= config.tolerance)
    if not converged:
        log.warning("fit_banded stopped after %d iterations (delta=%.3g)", iterations, delta)
    model = BandedStarModel(A0, A1, B0, B1, kA, kB, check=False).normalized()
    return BandedFit(
        model=model,
        iterations=iterations,
        final_delta=float(delta),
        objective=objective(covs, model.A0, model.A1, model.B0, model.B1),
        converged=converged,
        init=init_model,
    )


def fit_banded(series: MatrixTimeSeries, kA: int, kB: int, config: FitConfig = FitConfig()) -> BandedFit:
    """NKP-initialised iterated Yule-Walker fit with known bandwidths."""
    _check_bands(series.p, series.q, kA, kB)
    return fit_banded_covariances(lag_covariances(series), kA, kB, config)


# -- bandwidth selection ------------------------------------------------------


@dataclass(frozen=True)
class RssGrid:
    rss: np.ndarray  # (pq, K+1, K+1), [i, kA, kB]
    flagged: np.ndarray  # bool, same shape: pseudo-inverse fallback used

    @property
    def K(self) -> int:
        return self.rss.shape[1] - 1


def rss_grid_covariances(covs: LagCovariances, K: int) -> RssGrid:
    p, q = covs.p, covs.q
    if K < 1:
        raise ValidationError("K must be >= 1")
    m = p * q
    rss = np.zeros((m, K + 1, K + 1))
    flagged = np.zeros((m, K + 1, K + 1), dtype=bool)
    for ka in range(K + 1):
        for kb in range(K + 1):
            # bands beyond the matrix size are the full band
            for i, _, _, x, y in _row_designs(covs, min(ka, p - 1), min(kb, q - 1)):
                coef, flagged[i, ka, kb] = _lstsq_min_norm(x, y)
                resid = y - x @ coef
                rss[i, ka, kb] = float(resid @ resid)
    return RssGrid(rss=rss, flagged=flagged)


def rss_grid(series: MatrixTimeSeries, K: int) -> RssGrid:
    """Residual sums of squares of the row-wise C-regressions for ``kA, kB in 0..K``.

    Bandwidth 0 means a diagonal ``B`` and an empty ``A0`` support. Cells whose
    design is rank deficient fall back to the minimum-norm solution and are
    flagged.
    """
    if K < 1 or K >= min(series.p, series.q):
        raise ValidationError(f"K must satisfy 1 <= K < min(p, q), got {K}")
    return rss_grid_covariances(lag_covariances(series), K)


def delta_rss(rss: np.ndarray) -> np.ndarray:
    """Average of the A- and B-direction RSS drops; shape loses one step in each band axis."""
    here = rss[:, :-1, :-1]
    return 0.5 * ((here - rss[:, 1:, :-1]) + (here - rss[:, :-1, 1:]))


def select_from_rss(
    rss: np.ndarray, K: int, omega_n: float, flagged: np.ndarray | None = None
) -> tuple[int, int, np.ndarray, np.ndarray, np.ndarray]:
    """Two-step ratio estimator on an RSS grid covering bands ``0..K+1``.

    When ``flagged`` is given, ratios that touch a rank-deficient RSS cell
    are left out of the per-row argmax: such a regression interpolates and
    its RSS drop says nothing about the band.
    """
    if rss.shape[1] < K + 2 or rss.shape[2] < K + 2:
        raise ValidationError("RSS grid must cover bandwidths 0..K+1")
    rss = rss[:, : K + 2, : K + 2]
    d = delta_rss(rss)  # [i, kA, kB] for kA, kB in 0..K
    if flagged is None:
        bad = np.zeros(d.shape, dtype=bool)
    else:
        f = flagged[:, : K + 2, : K + 2]
        bad = f[:, :-1, :-1] | f[:, 1:, :-1] | f[:, :-1, 1:]
    # ratios[i, kA-1, kB-1] = (d(kA, kB-1) + w) / (d(kA, kB) + w)
    ratios = (d[:, 1:, :-1] + omega_n) / (d[:, 1:, 1:] + omega_n)
    usable = ~(bad[:, 1:, :-1] | bad[:, 1:, 1:])
    m = ratios.shape[0]
    flat = np.where(usable, ratios, -np.inf).reshape(m, -1).argmax(axis=1)
    row_kB = flat % K + 1
    kB_hat = int(row_kB.max())
    ratio_a = (d[:, :-1, kB_hat] + omega_n) / (d[:, 1:, kB_hat] + omega_n)
    usable_a = ~(bad[:, :-1, kB_hat] | bad[:, 1:, kB_hat])
    row_kA = np.where(usable_a, ratio_a, -np.inf).argmax(axis=1) + 1
    kA_hat = int(row_kA.max())
    return kA_hat, kB_hat, ratios, row_kA, row_kB


def select_bandwidths_covariances(
    covs: LagCovariances, n: int, K: int = 4, omega_factor: float = 0.1, skip_flagged: bool = True
) -> BandwidthSelection:
    if K < 1:
        raise ValidationError("K must be >= 1")
    if omega_factor <= 0:
        raise ValidationError("omega_factor must be positive")
    omega_n = omega_factor * covs.p * covs.q / n
    grid = rss_grid_covariances(covs, K + 1)
    kA_hat, kB_hat, ratios, row_kA, row_kB = select_from_rss(
        grid.rss, K, omega_n, grid.flagged if skip_flagged else None
    )
    flagged = int(grid.flagged.sum())
    if flagged:
        log.info("rss grid: %d row/cell fits used the pseudo-inverse fallback", flagged)
    return BandwidthSelection(
        kA_hat=kA_hat,
        kB_hat=kB_hat,
        per_row_ratios=ratios,
        omega_n=omega_n,
        K=K,
        row_kA=row_kA,
        row_kB=row_kB,
        flagged_cells=flagged,
    )


def select_bandwidths(
    series: MatrixTimeSeries, K: int = 4, omega_factor: float = 0.1, skip_flagged: bool = True
) -> BandwidthSelection:
    """Ratio-based selection of ``(kA, kB)`` with regulariser ``omega_factor * p * q / n``."""
    return select_bandwidths_covariances(lag_covariances(series), series.n, K, omega_factor, skip_flagged)


def predict_banded(model: BandedStarModel, x_last: np.ndarray) -> np.ndarray:
    """One-step-ahead forecast of ``X_{t+1}`` from ``X_t``."""
    x_last = np.asarray(x_last, dtype=float)
    if x_last.shape != (model.p, model.q):
        raise DimensionError(f"x_last must be {(model.p, model.q)}")
    return one_step_forecast(*model.coefficient_matrices(), x_last)
