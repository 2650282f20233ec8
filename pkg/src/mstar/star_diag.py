"""Spatio-temporal autoregression with known weights and diagonal coefficients.

Model::

    X_t = D(a0) W0 X_t V0' D(b0) + D(a1) W1 X_{t-1} V1' D(b1) + E_t

Estimated by iterated generalized Yule-Walker least squares: with the row
coefficients fixed the column coefficients solve ``q`` independent
two-parameter regressions, and vice versa.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, RankDeficiencyError, ValidationError
from .tensor_core import (
    LagCovariances,
    MatrixTimeSeries,
    TransitionForm,
    kron,
    lag_covariances,
    one_step_forecast,
    stationarity_check,
)

log = logging.getLogger(__name__)

RCOND_LIMIT = 1e-12


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = 1e-6
    max_iterations: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")


@dataclass(frozen=True)
class DiagStarModel:
    W0: np.ndarray
    W1: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    alpha0: np.ndarray
    alpha1: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("W0", "W1", "V0", "V1", "alpha0", "alpha1", "beta0", "beta1"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        p, q = self.p, self.q
        _check_weights(self.W0, self.W1, self.V0, self.V1, p, q)
        for name, size in (("alpha0", p), ("alpha1", p), ("beta0", q), ("beta1", q)):
            if getattr(self, name).shape != (size,):
                raise DimensionError(f"{name} must have length {size}")
        if np.any(np.diag(self.W0) != 0):
            raise ValidationError("W0 must have a zero diagonal")
        if self.check:
            self.transition()

    @property
    def p(self) -> int:
        return self.W0.shape[0]

    @property
    def q(self) -> int:
        return self.V0.shape[0]

    def coefficient_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """``C0 = (D(b0)V0) ⊗ (D(a0)W0)`` and ``C1 = (D(b1)V1) ⊗ (D(a1)W1)``."""
        c0 = kron(self.beta0[:, None] * self.V0, self.alpha0[:, None] * self.W0)
        c1 = kron(self.beta1[:, None] * self.V1, self.alpha1[:, None] * self.W1)
        return c0, c1

    def transition(self) -> TransitionForm:
        return stationarity_check(*self.coefficient_matrices())

    def products(self) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
        """The identifiable pairs ``(beta_k, alpha_k)`` for ``k = 0, 1``."""
        return (self.beta0, self.alpha0), (self.beta1, self.alpha1)

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0.tolist(),
            "alpha1": self.alpha1.tolist(),
            "beta0": self.beta0.tolist(),
            "beta1": self.beta1.tolist(),
        }


@dataclass(frozen=True)
class DiagFit:
    model: DiagStarModel
    iterations: int
    final_delta: float
    objective: float
    converged: bool

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


def _check_weights(W0, W1, V0, V1, p: int, q: int) -> None:
    for name, m, size in (("W0", W0, p), ("W1", W1, p), ("V0", V0, q), ("V1", V1, q)):
        if np.shape(m) != (size, size):
            raise DimensionError(f"{name} must be {size}x{size}, got {np.shape(m)}")


def _moment_blocks(covs: LagCovariances, W0, W1, V0, V1) -> tuple[np.ndarray, np.ndarray]:
    """``H0[j,k] = sum_i v0[j,i] W0 S_ik(1)`` and ``H1[j,k] = sum_i v1[j,i] W1 S_ik(0)``.

    With these the Yule-Walker residual for block ``(j, k)`` is
    ``S_jk(1) - b0_j D(a0) H0[j,k] - b1_j D(a1) H1[j,k]``.
    """
    h0 = np.einsum("ji,ab,ikbc->jkac", V0, W0, covs.sigma1, optimize=True)
    h1 = np.einsum("ji,ab,ikbc->jkac", V1, W1, covs.sigma0, optimize=True)
    return h0, h1


def _solve_normal(x: np.ndarray, y: np.ndarray, what: str, index: int) -> np.ndarray:
    xtx = x.T @ x
    if not np.all(np.isfinite(xtx)) or np.linalg.cond(xtx) * RCOND_LIMIT >= 1.0 or not np.any(xtx):
        raise RankDeficiencyError(f"{what}: normal matrix for index {index} is singular", index=index)
    return np.linalg.solve(xtx, x.T @ y)


def _step_beta(covs, h0, h1, alpha0, alpha1) -> tuple[np.ndarray, np.ndarray]:
    q = covs.q
    beta0 = np.empty(q)
    beta1 = np.empty(q)
    for j in range(q):
        y = covs.sigma1[j].ravel()
        x = np.column_stack(
            [(alpha0[None, :, None] * h0[j]).ravel(), (alpha1[None, :, None] * h1[j]).ravel()]
        )
        beta0[j], beta1[j] = _solve_normal(x, y, "step_beta", j)
    return beta0, beta1


def _step_alpha(covs, h0, h1, beta0, beta1) -> tuple[np.ndarray, np.ndarray]:
    p = covs.p
    alpha0 = np.empty(p)
    alpha1 = np.empty(p)
    for m in range(p):
        y = covs.sigma1[:, :, m, :].ravel()
        x = np.column_stack(
            [
                (beta0[:, None, None] * h0[:, :, m, :]).ravel(),
                (beta1[:, None, None] * h1[:, :, m, :]).ravel(),
            ]
        )
        alpha0[m], alpha1[m] = _solve_normal(x, y, "step_alpha", m)
    return alpha0, alpha1


def step_beta(covs: LagCovariances, W0, W1, V0, V1, alpha0, alpha1) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares column coefficients given the row coefficients."""
    _check_weights(W0, W1, V0, V1, covs.p, covs.q)
    h0, h1 = _moment_blocks(covs, W0, W1, V0, V1)
    return _step_beta(covs, h0, h1, np.asarray(alpha0, float), np.asarray(alpha1, float))


def step_alpha(covs: LagCovariances, W0, W1, V0, V1, beta0, beta1) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares row coefficients given the column coefficients."""
    _check_weights(W0, W1, V0, V1, covs.p, covs.q)
    h0, h1 = _moment_blocks(covs, W0, W1, V0, V1)
    return _step_alpha(covs, h0, h1, np.asarray(beta0, float), np.asarray(beta1, float))


def _objective(covs, h0, h1, alpha0, alpha1, beta0, beta1) -> float:
    resid = (
        covs.sigma1
        - beta0[:, None, None, None] * alpha0[None, None, :, None] * h0
        - beta1[:, None, None, None] * alpha1[None, None, :, None] * h1
    )
    return float(np.sum(resid**2))


def objective(covs: LagCovariances, model: DiagStarModel) -> float:
    """Generalized Yule-Walker criterion summed over all column pairs."""
    h0, h1 = _moment_blocks(covs, model.W0, model.W1, model.V0, model.V1)
    return _objective(covs, h0, h1, model.alpha0, model.alpha1, model.beta0, model.beta1)


def _diag_distance(b1, a1, b2, a2) -> float:
    # ||D(b1)⊗D(a1) - D(b2)⊗D(a2)||_F; both products are diagonal
    return float(np.linalg.norm(np.outer(b1, a1) - np.outer(b2, a2)))


def normalize(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    """Rescale so ``||alpha||_2 = 1`` with a positive largest-magnitude entry; ``beta`` absorbs the scale."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    norm = np.linalg.norm(alpha)
    if norm == 0:
        return alpha.copy(), beta.copy()
    scale = norm if alpha[np.argmax(np.abs(alpha))] > 0 else -norm
    return alpha / scale, beta * scale


def fit_diag_covariances(
    covs: LagCovariances,
    W0,
    W1,
    V0,
    V1,
    config: FitConfig = FitConfig(),
    init: tuple[np.ndarray, np.ndarray] | None = None,
    trace: list[float] | None = None,
) -> DiagFit:
    """Iterated estimator on precomputed covariances.

    ``init`` overrides the random standard-normal start for ``(alpha0, alpha1)``.
    If ``trace`` is given, the objective after every half-step is appended to it.
    """
    W0, W1, V0, V1 = (np.asarray(m, dtype=float) for m in (W0, W1, V0, V1))
    p, q = covs.p, covs.q
    _check_weights(W0, W1, V0, V1, p, q)
    h0, h1 = _moment_blocks(covs, W0, W1, V0, V1)

    if init is None:
        rng = np.random.default_rng(config.seed)
        alpha0, alpha1 = rng.standard_normal(p), rng.standard_normal(p)
    else:
        alpha0, alpha1 = (np.asarray(a, dtype=float).copy() for a in init)

    prev = None
    delta = np.inf
    iterations = 0
    beta0 = beta1 = None
    for iterations in range(1, config.max_iterations + 1):
        beta0, beta1 = _step_beta(covs, h0, h1, alpha0, alpha1)
        if trace is not None:
            trace.append(_objective(covs, h0, h1, alpha0, alpha1, beta0, beta1))
        alpha0, alpha1 = _step_alpha(covs, h0, h1, beta0, beta1)
        if trace is not None:
            trace.append(_objective(covs, h0, h1, alpha0, alpha1, beta0, beta1))
        current = (beta0, alpha0, beta1, alpha1)
        if prev is not None:
            delta = _diag_distance(current[0], current[1], prev[0], prev[1]) + _diag_distance(
                current[2], current[3], prev[2], prev[3]
            )
            if delta <= config.tolerance:
                break
        prev = current

    converged = bool(delta <= config.tolerance)
    if not converged:
        log.warning("fit_diag stopped after %d iterations (delta=%.3g)", iterations, delta)
    alpha0, beta0 = normalize(alpha0, beta0)
    alpha1, beta1 = normalize(alpha1, beta1)
    model = DiagStarModel(W0, W1, V0, V1, alpha0, alpha1, beta0, beta1, check=False)
    return DiagFit(
        model=model,
        iterations=iterations,
        final_delta=float(delta),
        objective=_objective(covs, h0, h1, alpha0, alpha1, beta0, beta1),
        converged=converged,
    )


def fit_diag(series: MatrixTimeSeries, W0, W1, V0, V1, config: FitConfig = FitConfig()) -> DiagFit:
    """Fit the diagonal-coefficient model to a series."""
    _check_weights(W0, W1, V0, V1, series.p, series.q)
    return fit_diag_covariances(lag_covariances(series), W0, W1, V0, V1, config)


def predict_diag(model: DiagStarModel, x_last: np.ndarray) -> np.ndarray:
    """One-step-ahead forecast of ``X_{t+1}`` from ``X_t``."""
    x_last = np.asarray(x_last, dtype=float)
    if x_last.shape != (model.p, model.q):
        raise DimensionError(f"x_last must be {(model.p, model.q)}")
    return one_step_forecast(*model.coefficient_matrices(), x_last)


def band_weights(size: int, band: int = 2, value: float = 1.0, diagonal: float | None = None) -> np.ndarray:
    """Weight matrix with ``value`` on the first ``band`` off-diagonals on both sides."""
    idx = np.arange(size)
    dist = np.abs(idx[:, None] - idx[None, :])
    w = np.where((dist >= 1) & (dist <= band), value, 0.0)
    if diagonal is not None:
        np.fill_diagonal(w, diagonal)
    return w
